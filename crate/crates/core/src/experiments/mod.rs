//! Seeded Monte Carlo experiments on synthetic distributions.
//!
//! Each experiment is a set of independent trials. Trial `t` draws all of its
//! randomness from [`RngStream::trial_rng`]`(t)`, trial outcomes are collected
//! in index order, and aggregation uses integer counts or compensated sums, so
//! results are bit-identical for any worker count.

mod beta;
mod geometry;
mod rng;
mod sampling;
mod stats;
mod verify;

pub use beta::{estimate_beta, BetaConfig, BetaEstimate, FeatureCenter};
pub use geometry::{
    estimate_pairwise_quasi_orth, estimate_separability, is_separable, QuasiOrthEstimate,
};
pub use rng::RngStream;
pub use sampling::{sample_uniform_ball, sample_uniform_cube};
pub use stats::{wilson_interval, Aggregate, Z_95};
pub use verify::{
    verify_fewshot, verify_lhd, verify_quasi_orth, EventCheck, FewShotVerification,
    MIN_SOUNDNESS_TRIALS,
};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;

/// Support region of a synthetic class in input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClassRegion {
    UniformBall { center: Vec<f64>, radius: f64 },
    UniformCube { half_width: f64 },
}

impl ClassRegion {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(invalid("center", "dimension must be >= 1"));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(ClassRegion::UniformBall { center, radius })
    }

    pub fn cube(half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid(
                "half_width",
                format!("must be positive, got {half_width}"),
            ));
        }
        Ok(ClassRegion::UniformCube { half_width })
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(invalid("n", "dimension must be >= 1"));
        }
        match self {
            ClassRegion::UniformBall { center, .. } if center.len() != n => {
                Err(Error::DimensionMismatch {
                    expected: n,
                    actual: center.len(),
                })
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn fill<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        match self {
            ClassRegion::UniformBall { center, radius } => {
                sampling::fill_ball(out, center, *radius, rng)
            }
            ClassRegion::UniformCube { half_width } => sampling::fill_cube(out, *half_width, rng),
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; n];
        self.fill(&mut v, rng);
        v
    }
}

/// Two synthetic classes in `R^n` and the kernel used to look at them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    n: usize,
    x_center: Vec<f64>,
    x_radius: f64,
    y_class: ClassRegion,
    kernel: Kernel,
}

impl SyntheticScenario {
    pub fn new(n: usize, x_radius: f64, y_class: ClassRegion, kernel: Kernel) -> Result<Self> {
        let x = ClassRegion::ball(vec![0.0; n.max(1)], x_radius)?;
        x.check_dim(n)?;
        y_class.check_dim(n)?;
        Ok(Self {
            n,
            x_center: vec![0.0; n],
            x_radius,
            y_class,
            kernel,
        })
    }

    /// Identity map, `X` the ball of radius `r_x` at the origin, `Y` the ball of
    /// radius `r_y` centred at `(c_y_norm, 0, ..., 0)`.
    pub fn identity_balls(n: usize, r_x: f64, c_y_norm: f64, r_y: f64) -> Result<Self> {
        let mut c = vec![0.0; n];
        if n > 0 {
            c[0] = c_y_norm;
        }
        Self::new(n, r_x, ClassRegion::ball(c, r_y)?, Kernel::Linear)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }
    pub fn x_radius(&self) -> f64 {
        self.x_radius
    }
    pub fn x_center(&self) -> &[f64] {
        &self.x_center
    }
    pub fn y_class(&self) -> &ClassRegion {
        &self.y_class
    }

    pub(crate) fn x_region(&self) -> ClassRegion {
        ClassRegion::UniformBall {
            center: self.x_center.clone(),
            radius: self.x_radius,
        }
    }

    /// `(c_Y, r_Y)` when the Y class is a ball under the identity map.
    pub(crate) fn identity_y_ball(&self) -> Result<(&[f64], f64)> {
        match (&self.kernel, &self.y_class) {
            (Kernel::Linear, ClassRegion::UniformBall { center, radius }) => {
                Ok((center.as_slice(), *radius))
            }
            _ => Err(Error::UnsupportedRegime(format!(
                "closed-form constants are exact only for the linear kernel on a uniform ball (got {} kernel, {:?})",
                self.kernel, self.y_class
            ))),
        }
    }
}

/// How many trials to run and on how many worker threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialPlan {
    pub trials: u64,
    pub workers: usize,
}

impl TrialPlan {
    pub fn new(trials: u64, workers: usize) -> Result<Self> {
        if trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        if workers == 0 {
            return Err(invalid("workers", "must be >= 1"));
        }
        Ok(Self { trials, workers })
    }
}

/// Runs `f(t)` for `t = 0..trials` on `workers` threads and returns the
/// outcomes in trial order.
pub(crate) fn run_trials<T, F>(trials: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if workers <= 1 {
        return Ok((0..trials).map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    Ok(pool.install(|| (0..trials).into_par_iter().map(f).collect()))
}
