//! Certified numerics for Baker domains of meromorphic maps `z + 1 + Σ a_p/(z − p)²`
//! with poles on a line or lattice.
//!
//! * [`complexmap`]: the map family, coefficient budgets, certified evaluation.
//! * [`orbit`]: forward orbits with drift certification, step ratios, Abel function.
//! * [`hypmetric`]: upper and lower bounds for hyperbolic densities and distances.
//! * [`classifier`]: type verdicts from step-ratio enclosures.
//! * [`loops`]: pushing closed curves forward, windings, contractibility.

pub mod classifier;
pub mod complexmap;
pub mod hypmetric;
pub mod loops;
pub mod orbit;

pub use complexmap::{build_map, coefficient_budget, BoundInterval, MapModel, ModelError, PoleCase};
pub use num_complex::Complex64;
