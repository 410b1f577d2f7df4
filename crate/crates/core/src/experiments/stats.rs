use serde::{Deserialize, Serialize};

use crate::bounds::BoundValue;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 {
        0.0
    } else {
        (centre - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Success count over independent trials with its Wilson interval and,
/// for verification runs, the theoretical lower bound it is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: u64,
    pub successes: u64,
    pub frequency: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound: Option<BoundValue>,
}

impl Aggregate {
    pub fn new(successes: u64, trials: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(successes, trials, Z_95);
        Self {
            trials,
            successes,
            frequency: if trials == 0 {
                0.0
            } else {
                successes as f64 / trials as f64
            },
            ci_lo,
            ci_hi,
            bound: None,
        }
    }

    pub fn with_bound(mut self, bound: BoundValue) -> Self {
        self.bound = Some(bound);
        self
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }

    /// `frequency >= bound.clamped - 3 half-widths`; true when no bound is attached.
    pub fn bound_holds(&self) -> bool {
        match self.bound {
            Some(b) => self.frequency >= b.clamped - 3.0 * self.half_width(),
            None => true,
        }
    }

    /// True unless the intervals show `self` is clearly larger than `next`.
    pub fn ci_consistent_le(&self, next: &Aggregate) -> bool {
        self.ci_lo <= next.ci_hi
    }
}
