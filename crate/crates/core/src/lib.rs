//! Simulation and verification laboratory for supercritical measure-valued
//! branching processes.
//!
//! The crate has two halves that check each other:
//!
//! * an **analytic layer** (`semigroup`, `spectral`, `quad`) evaluating the
//!   mean semigroup, variance formula, resolvents, ground-state transforms
//!   and closed-form eigendata by quadrature or in closed form, and
//! * a **particle engine** (`particle`, `experiment`) approximating the
//!   measure-valued process by a uniform-mass branching particle system
//!   with exact spatial transitions, driven from reproducible
//!   counter-based random streams.
//!
//! The experiment layer runs multi-path ensembles against the analytic
//! targets: moment matching, martingale diagnostics, and the long-time
//! scaling limit of normalized mass functionals.

pub mod error;
pub mod experiment;
pub mod field;
pub mod model;
pub mod ode;
pub mod particle;
pub mod presets;
pub mod quad;
pub mod report;
pub mod rng;
pub mod semigroup;
pub mod spatial;
pub mod spectral;
pub mod stats;
pub mod testfn;

pub use error::{Error, Result};
