//! Multi-reward, multi-policy evaluation in tabular discounted MDPs.
//!
//! The crate covers exact evaluation algebra ([`mdp`]), one-step value
//! deviations and confusing models ([`deviation`]), reward sets and their
//! complexity coefficients ([`rewards`]), the occupancy allocation program
//! ([`allocation`], backed by the dense simplex in [`lp`]), exploration
//! agents ([`agents`]) and the benchmark environments ([`envs`]).

pub mod agents;
pub mod allocation;
pub mod deviation;
pub mod envs;
pub mod lp;
pub mod mdp;
pub mod nonconvex;
pub mod rewards;
