//! Semi-discrete sub-partitioning of layered measures.
//!
//! A [`measure::LayeredMeasure`] is a weighted point cloud in which every
//! point carries a density row on the probability simplex over `q` layers.
//! Agents demand per-layer masses ([`partition::DemandMatrix`]); a price
//! matrix induces a sub-partition by net-income maximization. The crate
//! provides:
//!
//! * feasibility oracles for demand matrices — exact enumeration and an LP
//!   relaxation under which the achievable set is exactly convex;
//! * the concave dual of demand matching, its supergradient, and an ascent
//!   solver with equilibrium detection;
//! * a constructive witness for demands with a unique sub-partition that no
//!   price matrix can serve, verified by threshold, grid and solver evidence;
//! * partial orders on layered measures decided by kernel feasibility, with
//!   convex-function and sampling cross-checks, and the q-layer transport LP.

pub mod counterexample;
pub mod dual_solver;
pub mod io;
pub mod lp;
pub mod mat;
pub mod measure;
pub mod order;
pub mod partition;
pub mod pricing;

pub use mat::Mat;
pub use measure::{CostField, LayeredMeasure};
pub use partition::{Assignment, DemandMatrix, FractionalAssignment};
pub use pricing::{PriceMatrix, TieRule};
