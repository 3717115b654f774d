//! Sliced Wasserstein distances between multivariate samples, with
//! asymptotically valid two-sample inference.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces:
//!
//! - [`geometry`]: uniform directions on the sphere and linear projections.
//! - [`ot1d`]: exact optimal transport between one-dimensional empirical
//!   measures via the quantile coupling.
//! - [`potentials`]: c-concave optimal potentials for the quadratic cost and
//!   their discrete c-conjugates.
//! - [`estimators`]: the Monte Carlo sliced estimate and its variance
//!   components.
//! - [`inference`]: studentized statistic, p-values and confidence intervals.
//! - [`distributions`]: Gaussian reference samples, closed-form ground truth
//!   and the `J_alpha` tail diagnostic.
//!
//! IO, parallel drivers and the simulation harness live in the `swd` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod distributions;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod inference;
pub mod normal;
pub mod ot1d;
pub mod potentials;
pub mod rng;
pub mod sum;

pub use error::{Error, Result};
pub use estimators::{
    analyze, combined_variance, sliced_estimate, v_hat_sq, w_hat_sq, Analysis, ChunkPartial, SlicedEstimate,
    VarianceComponents, VarianceMode, WHat,
};
pub use geometry::{project, sample_directions, DirectionSet, SampleMatrix};
pub use inference::{confidence_interval, effective_rate, test_statistic, two_sided_pvalue, InferenceReport};
pub use ot1d::{coupling_cells, quantile, sort_projection, wasserstein_pp, CouplingCell, Exponent, SortedProjection};
pub use potentials::{
    c_conjugate, duality_gap, potential_table, potential_values, row_assignment, ConjugateMethod, PotentialRow,
    PotentialTable,
};
