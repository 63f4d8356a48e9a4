//! Nearest neighbor-Dirichlet mixture (NN-DM) density estimation.
//!
//! Every observation owns a Gaussian kernel whose parameters get a conjugate
//! normal-inverse-Wishart update from the observation's `k`-nearest
//! neighborhood. Kernels are mixed with Dirichlet(α + 1, …, α + 1) weights.
//! The mean of the resulting pseudo-posterior is a closed-form mixture of
//! Student-t kernels, and Monte Carlo draws are independent, so uncertainty
//! bands need no Markov chain.
//!
//! ```
//! use nndm::{Dataset, FitOptions, fit};
//!
//! let data = Dataset::from_rows(&[vec![-1.2], vec![-0.4], vec![0.1], vec![0.3], vec![1.5]]).unwrap();
//! let model = fit(&data, &FitOptions::default()).unwrap();
//! let f0 = model.posterior_mean_density(&[0.0]).unwrap();
//! assert!(f0 > 0.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod hyper;
pub mod kernel;
mod linalg;
pub mod model_io;
pub mod neighbors;
pub mod posterior;
pub mod rng;
pub mod sampling;

pub use data::Dataset;
pub use error::{NndmError, Result};
pub use estimator::{fit, AlphaChoice, Delta0Choice, FitOptions, FittedModel};
pub use hyper::Hyperparameters;
pub use neighbors::{build_loo_stats, build_neighborhoods, count_unique_members, LooStats, Neighborhood};
pub use posterior::NeighborhoodPosterior;
pub use sampling::DensityDraw;
