//! Few-shot learning with kernel feature maps.
//!
//! * [`kernel`]: linear, polynomial, Gaussian and Laplacian kernels, and
//!   feature-space geometry through the kernel trick.
//! * [`bounds`]: closed-form lower bounds for quasi-orthogonality, the
//!   concentration of the empirical feature mean, and the few-shot rule.
//! * [`fewshot`]: the kernel-mean classifier that adds a new class to an
//!   existing predictor from a handful of examples.
//! * [`experiments`]: seeded Monte Carlo estimators that check the bounds and
//!   probe feature-space geometry.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod fewshot;
pub mod kernel;
pub mod sum;

pub use error::{Error, Result};
pub use kernel::{Kernel, SupportSample};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
