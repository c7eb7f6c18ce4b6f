//! Estimators of optimal transport maps onto discrete targets.
//!
//! Three estimators are provided, together with the machinery to compare
//! them on synthetic problems with a known ground-truth map:
//!
//! - the entropic map [`maps::EntropicMapModel`], the barycentric projection
//!   of the entropic plan between two empirical measures, fitted by
//!   log-domain Sinkhorn ([`sinkhorn`]);
//! - the exact semi-discrete Brenier map [`maps::SemiDiscreteMap`], an
//!   argmax over affine functions that partitions space into Laguerre cells;
//! - the one-nearest-neighbour map [`onenn::OneNNModel`], built from an exact
//!   optimal assignment.
//!
//! [`semidual`] solves the entropic problem when the source is a density
//! discretised by quadrature, [`experiments`] runs seeded Monte Carlo
//! convergence-rate studies, and [`measures`] holds the point-cloud types,
//! samplers, divergences and variances used throughout.
//!
//! All potentials exchanged between modules are documented with their
//! convention: Sinkhorn works with the cost `½‖x − y‖²`, everything else with
//! inner-product potentials `φ = ½‖x‖² − f`, `ψ = ½‖y‖² − g`.

pub mod error;
pub mod experiments;
pub mod maps;
pub mod measures;
pub mod numeric;
pub mod onenn;
pub mod random;
pub mod semidual;
pub mod serialize;
pub mod sinkhorn;
pub mod verify;

pub use error::{Error, Result};
pub use maps::{fit_entropic, EntropicMapModel, SemiDiscreteMap, TransportMap};
pub use measures::{DiscreteMeasure, PointCloud};
pub use onenn::{fit_onenn, solve_assignment, OneNNModel};
pub use random::RandomSource;
pub use sinkhorn::{DualPotentials, SinkhornOptions, SinkhornReport};
