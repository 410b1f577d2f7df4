//! Effective-dimension estimation from feature-space volume ratios.
//!
//! `V(r)` is the fraction of a base region whose feature image lies within
//! `r` of a centre. Fitting `log V` against `log r` by least squares gives the
//! scaling exponent; for the identity map on a ball centred at the origin the
//! exponent is the input dimension.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::{run_trials, ClassRegion, RngStream, TrialPlan};
use crate::bounds::DimensionProfile;
use crate::error::{invalid, Error, Result};
use crate::kernel::{clamp_nonnegative, Kernel, SupportSample};

const BATCH: u64 = 16_384;

type DistanceFn<'a> = Box<dyn Fn(&[f64]) -> Result<f64> + Sync + 'a>;

/// Centre in feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureCenter {
    /// An explicit point; only meaningful for the linear kernel, whose feature
    /// space is the input space.
    Explicit(Vec<f64>),
    /// The kernel mean of a set of anchor points.
    AnchorMean(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaConfig {
    pub radii: Vec<f64>,
    pub samples: u64,
    pub bootstrap: usize,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub radii: Vec<f64>,
    pub hits: Vec<u64>,
    pub samples: u64,
    /// `V(r) / V(region)` per radius.
    pub volumes: Vec<f64>,
    /// Least-squares slope of `log V` on `log r`.
    pub alpha_hat: f64,
    /// 95% percentile bootstrap interval for `alpha_hat`.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Flat log-log fit (`alpha_hat == 0`).
    pub degenerate: bool,
    pub min_distance: f64,
}

impl BetaEstimate {
    /// Tabulated profile: at each radius below the largest, the exponent of the
    /// volume ratio against the largest radius; at the largest, `alpha_hat`.
    pub fn profile(&self, kernel: Kernel, n: usize) -> Result<DimensionProfile> {
        if self.degenerate {
            return Err(Error::Degenerate(
                "volume does not change across radii; exponent is 0".into(),
            ));
        }
        let last = self.radii.len() - 1;
        let (r_max, v_max) = (self.radii[last], self.volumes[last]);
        let mut betas: Vec<f64> = (0..last)
            .map(|i| (self.volumes[i] / v_max).ln() / (self.radii[i] / r_max).ln())
            .collect();
        betas.push(self.alpha_hat);
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0)) {
            return Err(Error::Degenerate(format!(
                "non-positive local exponent {b}"
            )));
        }
        DimensionProfile::tabulated(
            self.radii.clone(),
            betas,
            format!(
                "estimated for {kernel} in n = {n} from {} samples",
                self.samples
            ),
        )
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn fit_from_hits(log_r: &[f64], hits: &[u64], samples: u64) -> Option<f64> {
    if hits.contains(&0) {
        return None;
    }
    let log_v: Vec<f64> = hits
        .iter()
        .map(|&h| (h as f64 / samples as f64).ln())
        .collect();
    Some(slope(log_r, &log_v))
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Monte Carlo volume-ratio scaling exponent around `center`.
pub fn estimate_beta(
    kernel: Kernel,
    n: usize,
    region: &ClassRegion,
    center: &FeatureCenter,
    config: &BetaConfig,
    stream: &RngStream,
) -> Result<BetaEstimate> {
    region.check_dim(n)?;
    let plan = TrialPlan::new(config.samples, config.workers)?;
    let mut radii = config.radii.clone();
    if radii.len() < 2 {
        return Err(invalid("radii", "need at least two radii"));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(invalid("radii", "radii must be positive"));
    }
    radii.sort_by(f64::total_cmp);
    if radii.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("radii", "radii must be distinct"));
    }

    // squared feature distance to the centre, minus a per-point term
    let distance_sq: DistanceFn = match center {
        FeatureCenter::Explicit(c) => {
            if kernel != Kernel::Linear {
                return Err(invalid(
                    "center",
                    "an explicit centre is only defined for the linear kernel; use anchors",
                ));
            }
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: c.len(),
                });
            }
            let c = c.clone();
            Box::new(move |x: &[f64]| Ok(crate::sum::dist_sq(x, &c)))
        }
        FeatureCenter::AnchorMean(anchors) => {
            let z = SupportSample::new(kernel, anchors.clone(), "anchors")?;
            if z.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: z.dim(),
                });
            }
            let m = z.k() as f64;
            let mean_norm_sq = z.gram_sum() / (m * m);
            Box::new(move |x: &[f64]| {
                let v = kernel.eval_unchecked(x, x) - 2.0 * z.mean_score(x)? + mean_norm_sq;
                clamp_nonnegative(v, "feature distance")
            })
        }
    };

    let thresholds: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let batches = plan.trials.div_ceil(BATCH);
    let per_batch = run_trials(batches, plan.workers, |b| -> Result<(Vec<u64>, f64)> {
        let mut rng = stream.trial_rng(b);
        let count = BATCH.min(plan.trials - b * BATCH);
        // bins[i]: distance in (r_{i-1}, r_i]; last bin: beyond the largest radius
        let mut bins = vec![0u64; thresholds.len() + 1];
        let mut min_d = f64::INFINITY;
        let mut x = vec![0.0; n];
        for _ in 0..count {
            region.fill(&mut x, &mut rng);
            let d2 = distance_sq(&x)?;
            min_d = min_d.min(d2);
            let bin = thresholds.partition_point(|&t| t < d2);
            bins[bin] += 1;
        }
        Ok((bins, min_d.sqrt()))
    })?;

    let mut bins = vec![0u64; thresholds.len() + 1];
    let mut min_distance = f64::INFINITY;
    for r in per_batch {
        let (b, d) = r?;
        for (acc, v) in bins.iter_mut().zip(b) {
            *acc += v;
        }
        min_distance = min_distance.min(d);
    }
    let hits: Vec<u64> = bins[..radii.len()]
        .iter()
        .scan(0u64, |acc, &b| {
            *acc += b;
            Some(*acc)
        })
        .collect();
    if let Some(i) = hits.iter().position(|&h| h == 0) {
        return Err(Error::RadiusTooSmall {
            radius: radii[i],
            min_distance,
        });
    }
    let samples = plan.trials;
    let log_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let alpha_hat = fit_from_hits(&log_r, &hits, samples).expect("all radii were hit");

    // Resampling the points only changes the bin counts, so a multinomial
    // redraw of the bins is the nonparametric bootstrap.
    let mut rng = stream.trial_rng(u64::MAX);
    let probs: Vec<f64> = bins.iter().map(|&b| b as f64 / samples as f64).collect();
    let mut boot = Vec::with_capacity(config.bootstrap);
    for _ in 0..config.bootstrap {
        let counts = multinomial(samples, &probs, &mut rng)?;
        let h: Vec<u64> = counts[..radii.len()]
            .iter()
            .scan(0u64, |acc, &b| {
                *acc += b;
                Some(*acc)
            })
            .collect();
        if let Some(a) = fit_from_hits(&log_r, &h, samples) {
            boot.push(a);
        }
    }
    let (ci_lo, ci_hi) = if boot.is_empty() {
        (alpha_hat, alpha_hat)
    } else {
        boot.sort_by(f64::total_cmp);
        (percentile(&boot, 0.025), percentile(&boot, 0.975))
    };

    Ok(BetaEstimate {
        volumes: hits.iter().map(|&h| h as f64 / samples as f64).collect(),
        radii,
        hits,
        samples,
        alpha_hat,
        ci_lo,
        ci_hi,
        degenerate: alpha_hat.abs() < 1e-12,
        min_distance,
    })
}

fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    let mut out = Vec::with_capacity(probs.len());
    let mut left = n;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if i == probs.len() - 1 || left == 0 {
            out.push(left);
            left = 0;
            continue;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let c = Binomial::new(left, q)
            .map_err(|e| invalid("bootstrap", e.to_string()))?
            .sample(rng);
        out.push(c);
        left -= c;
        mass -= p;
    }
    Ok(out)
}
