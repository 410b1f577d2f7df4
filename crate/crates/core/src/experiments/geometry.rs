//! Estimators for how often random points are quasi-orthogonal or linearly
//! separable in feature space, with inputs uniform on `[-1, 1]^n`.

use serde::{Deserialize, Serialize};

use super::{run_trials, sampling, Aggregate, RngStream, TrialPlan};
use crate::error::{invalid, Error, Result};
use crate::kernel::Kernel;
use crate::sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiOrthEstimate {
    pub aggregate: Aggregate,
    /// Pairs redrawn because a self-kernel was zero.
    pub resampled: u64,
}

/// Frequency of `|cos_phi(x, y)| <= delta` over independent uniform pairs.
pub fn estimate_pairwise_quasi_orth(
    kernel: Kernel,
    n: usize,
    delta: f64,
    plan: TrialPlan,
    stream: &RngStream,
) -> Result<QuasiOrthEstimate> {
    if n == 0 {
        return Err(invalid("n", "dimension must be >= 1"));
    }
    if !(delta >= 0.0) {
        return Err(invalid("delta", format!("must be >= 0, got {delta}")));
    }
    let outcomes = run_trials(plan.trials, plan.workers, |t| {
        let mut rng = stream.trial_rng(t);
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut redraws = 0u64;
        loop {
            sampling::fill_cube(&mut x, 1.0, &mut rng);
            sampling::fill_cube(&mut y, 1.0, &mut rng);
            match kernel.feature_cosine(&x, &y) {
                Ok(c) => return Ok((c.abs().min(1.0) <= delta, redraws)),
                Err(Error::Degenerate(_)) => redraws += 1,
                Err(e) => return Err(e),
            }
        }
    })?;
    let mut hits = 0u64;
    let mut resampled = 0u64;
    for o in outcomes {
        let (hit, r) = o?;
        hits += hit as u64;
        resampled += r;
    }
    Ok(QuasiOrthEstimate {
        aggregate: Aggregate::new(hits, plan.trials),
        resampled,
    })
}

/// Kernel mean `s(z) = (1/m) sum_j k(y_j, z)` of a point set.
enum SetMean<'a> {
    // explicit mean vector; the linear kernel is the identity map
    Linear(Vec<f64>),
    Generic { kernel: Kernel, ys: &'a [Vec<f64>] },
}

impl<'a> SetMean<'a> {
    fn new(kernel: Kernel, ys: &'a [Vec<f64>]) -> Self {
        match kernel {
            Kernel::Linear => {
                let n = ys[0].len();
                let m = ys.len() as f64;
                let mean = (0..n)
                    .map(|i| sum::sum(ys.iter().map(|y| y[i])) / m)
                    .collect();
                SetMean::Linear(mean)
            }
            _ => SetMean::Generic { kernel, ys },
        }
    }

    fn at(&self, z: &[f64]) -> f64 {
        match self {
            SetMean::Linear(mean) => sum::dot(mean, z),
            SetMean::Generic { kernel, ys } => {
                sum::sum(ys.iter().map(|y| kernel.eval_unchecked(y, z))) / ys.len() as f64
            }
        }
    }
}

/// Whether the hyperplane through `phi(x)` with normal `phi(x) - mu` strictly
/// separates `phi(x)` from every `phi(y)`, `mu` being the feature mean of `ys`:
/// `k(x,x) - s(x) > k(x,y) - s(y)` for all `y`.
pub fn is_separable(kernel: Kernel, x: &[f64], ys: &[Vec<f64>]) -> Result<bool> {
    if ys.is_empty() {
        return Err(invalid("set_size", "point set must be non-empty"));
    }
    for y in ys {
        if y.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: y.len(),
            });
        }
    }
    let mean = SetMean::new(kernel, ys);
    let lhs = kernel.eval_unchecked(x, x) - mean.at(x);
    let positive = kernel.is_bounded_positive();
    for y in ys {
        let kxy = kernel.eval_unchecked(x, y);
        // s(y) >= 0 for positive kernels, so kxy < lhs already settles this y
        if positive && kxy < lhs {
            continue;
        }
        if !(lhs > kxy - mean.at(y)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Frequency with which a random point is separable from `set_size` others.
pub fn estimate_separability(
    kernel: Kernel,
    n: usize,
    set_size: usize,
    plan: TrialPlan,
    stream: &RngStream,
) -> Result<Aggregate> {
    if n == 0 {
        return Err(invalid("n", "dimension must be >= 1"));
    }
    if set_size == 0 {
        return Err(invalid("set_size", "must be >= 1"));
    }
    let outcomes = run_trials(plan.trials, plan.workers, |t| {
        let mut rng = stream.trial_rng(t);
        let mut x = vec![0.0; n];
        sampling::fill_cube(&mut x, 1.0, &mut rng);
        let ys: Vec<Vec<f64>> = (0..set_size)
            .map(|_| {
                let mut y = vec![0.0; n];
                sampling::fill_cube(&mut y, 1.0, &mut rng);
                y
            })
            .collect();
        is_separable(kernel, &x, &ys)
    })?;
    let mut hits = 0u64;
    for o in outcomes {
        hits += o? as u64;
    }
    Ok(Aggregate::new(hits, plan.trials))
}
