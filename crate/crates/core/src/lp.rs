//! Small dense linear programs.
//!
//! A two-phase tableau simplex with Bland's rule. Problems here have at most
//! a few hundred variables, so a dense tableau is adequate and the anti-cycling
//! rule keeps the pivot sequence deterministic.

use thiserror::Error;

/// Pivot and reduced-cost tolerance.
pub const PIVOT_TOL: f64 = 1e-9;

const FEAS_TOL: f64 = 1e-9;
const DEFAULT_ITERATION_LIMIT: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("invalid linear program: {0}")]
    InvalidInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Self { coeffs, relation, rhs }
    }
}

/// `optimize c·x` subject to linear constraints and `lower ≤ x ≤ upper`.
///
/// Lower bounds default to zero and must be finite; upper bounds are optional.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<Option<f64>>,
    pub iteration_limit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        let n = objective.len();
        Self {
            objective,
            sense,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![None; n],
            iteration_limit: DEFAULT_ITERATION_LIMIT,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: Option<f64>) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    fn check(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if n == 0 {
            return Err(LpError::InvalidInput("no variables".into()));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::InvalidInput("bound vectors have the wrong length".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::InvalidInput("non-finite objective".into()));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::InvalidInput(format!("constraint {k} has the wrong length")));
            }
            if c.coeffs.iter().any(|x| !x.is_finite()) || !c.rhs.is_finite() {
                return Err(LpError::InvalidInput(format!("constraint {k} is not finite")));
            }
        }
        for j in 0..n {
            if !self.lower[j].is_finite() {
                return Err(LpError::InvalidInput(format!(
                    "variable {j} needs a finite lower bound"
                )));
            }
            if let Some(u) = self.upper[j] {
                if !(u >= self.lower[j]) {
                    return Err(LpError::Infeasible);
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        self.check()?;
        let n = self.n_vars();

        // Shift to y = x − lower ≥ 0 and turn finite upper bounds into rows.
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(self.constraints.len() + n);
        for c in &self.constraints {
            let shift: f64 = c.coeffs.iter().zip(&self.lower).map(|(a, l)| a * l).sum();
            rows.push((c.coeffs.clone(), c.relation, c.rhs - shift));
        }
        for j in 0..n {
            if let Some(u) = self.upper[j] {
                let mut coeffs = vec![0.0; n];
                coeffs[j] = 1.0;
                rows.push((coeffs, Relation::Le, u - self.lower[j]));
            }
        }
        for row in rows.iter_mut() {
            if row.2 < 0.0 {
                row.0.iter_mut().for_each(|a| *a = -*a);
                row.2 = -row.2;
                row.1 = match row.1 {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }

        let sign = match self.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        let cost: Vec<f64> = self.objective.iter().map(|c| sign * c).collect();
        let mut tableau = Tableau::build(n, &rows);
        tableau.iteration_limit = self.iteration_limit;
        tableau.phase_one()?;
        tableau.phase_two(&cost)?;

        let y = tableau.primal(n);
        let x: Vec<f64> = y.iter().zip(&self.lower).map(|(y, l)| y + l).collect();
        let objective = self.objective.iter().zip(&x).map(|(c, x)| c * x).sum();
        Ok(LpSolution {
            objective,
            x,
            iterations: tableau.iterations,
        })
    }
}

/// Convenience form: equality rows `(a, b)` meaning `a·x = b`, inequality rows
/// meaning `a·x ≤ b`, and per-variable `(lower, upper)` bounds.
pub fn lp_solve(
    objective: &[f64],
    sense: Sense,
    eq_constraints: &[(Vec<f64>, f64)],
    ineq_constraints: &[(Vec<f64>, f64)],
    bounds: &[(f64, Option<f64>)],
) -> Result<LpSolution, LpError> {
    let mut lp = LinearProgram::new(objective.to_vec(), sense);
    for (a, b) in eq_constraints {
        lp.add(a.clone(), Relation::Eq, *b);
    }
    for (a, b) in ineq_constraints {
        lp.add(a.clone(), Relation::Le, *b);
    }
    if bounds.len() != objective.len() {
        return Err(LpError::InvalidInput("one bound pair per variable".into()));
    }
    for (j, &(l, u)) in bounds.iter().enumerate() {
        lp.set_bounds(j, l, u);
    }
    lp.solve()
}

/// Dense tableau in the form `B⁻¹[A | b]` with a reduced-cost row for maximization.
struct Tableau {
    /// `m` rows of `width + 1` entries; the last entry is the right-hand side.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
    /// Columns at or beyond this index are artificial.
    first_artificial: usize,
    reduced: Vec<f64>,
    iterations: usize,
    iteration_limit: usize,
}

impl Tableau {
    fn build(n: usize, rows: &[(Vec<f64>, Relation, f64)]) -> Self {
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let first_artificial = n + n_slack;
        let width = first_artificial + n_art;
        let mut out = Vec::with_capacity(rows.len());
        let mut basis = Vec::with_capacity(rows.len());
        let mut slack = n;
        let mut art = first_artificial;
        for (coeffs, relation, rhs) in rows {
            let mut row = vec![0.0; width + 1];
            row[..n].copy_from_slice(coeffs);
            row[width] = *rhs;
            match relation {
                Relation::Le => {
                    row[slack] = 1.0;
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis.push(art);
                    art += 1;
                }
            }
            out.push(row);
        }
        Self {
            rows: out,
            basis,
            width,
            first_artificial,
            reduced: vec![0.0; width + 1],
            iterations: 0,
            iteration_limit: DEFAULT_ITERATION_LIMIT,
        }
    }

    /// Sets the reduced-cost row for `maximize cost·z` under the current basis.
    fn price(&mut self, cost: &[f64]) {
        let mut reduced = vec![0.0; self.width + 1];
        reduced[..cost.len()].copy_from_slice(cost);
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost.get(b).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (d, a) in reduced.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
        }
        self.reduced = reduced;
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|x| *x /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for (x, a) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * a;
                }
                row[col] = 0.0;
            }
        }
        let f = self.reduced[col];
        if f != 0.0 {
            for (x, a) in self.reduced.iter_mut().zip(&pivot_row) {
                *x -= f * a;
            }
            self.reduced[col] = 0.0;
        }
        self.basis[r] = col;
        self.iterations += 1;
    }

    /// Runs Bland's rule over columns `< allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<(), LpError> {
        loop {
            if self.iterations >= self.iteration_limit {
                return Err(LpError::IterationLimit);
            }
            let Some(col) = (0..allowed).find(|&j| self.reduced[j] > PIVOT_TOL) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[col];
                if a > PIVOT_TOL {
                    let ratio = row[self.width].max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((k, r)) => {
                            if ratio < r - 1e-12 || (ratio <= r + 1e-12 && self.basis[i] < self.basis[k]) {
                                Some((i, ratio))
                            } else {
                                Some((k, r))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Err(LpError::Unbounded),
                Some((r, _)) => self.pivot(r, col),
            }
        }
    }

    fn phase_one(&mut self) -> Result<(), LpError> {
        if self.first_artificial == self.width {
            return Ok(());
        }
        let mut cost = vec![0.0; self.width];
        cost[self.first_artificial..].iter_mut().for_each(|c| *c = -1.0);
        self.price(&cost);
        self.optimize(self.width)?;
        let scale = 1.0 + self.rows.iter().map(|r| r[self.width].abs()).fold(0.0, f64::max);
        let infeasibility: f64 = self
            .rows
            .iter()
            .zip(&self.basis)
            .filter(|(_, &b)| b >= self.first_artificial)
            .map(|(r, _)| r[self.width])
            .sum();
        if infeasibility > FEAS_TOL * scale {
            return Err(LpError::Infeasible);
        }
        // Drive zero-level artificials out of the basis; rows where that is
        // impossible are linear combinations of the others.
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.first_artificial {
                let col = (0..self.first_artificial).find(|&j| self.rows[i][j].abs() > PIVOT_TOL);
                match col {
                    Some(j) => {
                        self.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        Ok(())
    }

    fn phase_two(&mut self, cost: &[f64]) -> Result<(), LpError> {
        self.price(cost);
        self.optimize(self.first_artificial)
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < n {
                y[b] = row[self.width].max(0.0);
            }
        }
        y
    }
}
