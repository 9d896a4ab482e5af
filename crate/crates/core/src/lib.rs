//! Discrete magnetic fractional Sobolev seminorms on gridded domains.
//!
//! The crate discretizes, by the midpoint rule on uniform 1D/2D grids,
//!
//! ```text
//! [f]^p_{s,p,A}(H) = sum_{(i,j) in H, i != j} |f_i - e^{i θ_ij} f_j|^p |x_i - x_j|^{-(N+sp)} v_i v_j
//! θ_ij = (x_i - x_j) · A((x_i + x_j) / 2)
//! ```
//!
//! together with the regional magnetic fractional Laplacian associated with the
//! `p = 2` form, its spectrum, the variational energies `E^{p,q}_{s,A}`, the
//! Poincaré–Wirtinger constants and the punctured-domain experiments.
//!
//! | module | contents |
//! |--------|----------|
//! | [`domain`] | grids, Λ/Γ splits, pair regions |
//! | [`fields`] | grid functions, `L^q` norms, magnetic potentials, example functions |
//! | [`seminorm`] | pair sums, diamagnetic / embedding / norm-equivalence checks, reduced kernel |
//! | [`operator`] | dense Hermitian operator and its quadratic form |
//! | [`spectral`] | eigenpairs, deflated Rayleigh minimization, gaps |
//! | [`variational`] | energies, ground states, Poincaré constants, best constant `S` |
//! | [`experiments`] | the counterexamples and the punctured inequality study |

pub mod domain;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod operator;
pub mod report;
pub mod seminorm;
pub mod spectral;
pub mod variational;

mod pairs;

pub use num_complex::Complex64;

pub use domain::{build_grid, split, BoundingBox, DomainSpec, Grid, PairRegion, Point, SubsetMask};
pub use error::{Error, Result};
pub use fields::{Exponent, GridFunction, VectorField, WeightFunction};
pub use operator::RegionalOperator;
pub use seminorm::{magnetic_seminorm, SeminormBreakdown, SeminormParams};
pub use spectral::Spectrum;
