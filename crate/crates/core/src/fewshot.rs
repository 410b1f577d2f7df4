//! Kernel-mean few-shot rule.
//!
//! A fitted [`FewShotModel`] accepts `x` into the new class when
//! `(1/k) sum_i k(x_i, x) - theta D(Z) >= 0` and otherwise defers to a base
//! predictor.

use serde::{Deserialize, Serialize};

use crate::bounds::{
    delta_feasible, optimize_delta_theta, optimize_theta, required_d, theta_interval, BoundParams,
    GridSpec, PnMode,
};
use crate::error::{invalid, Error, Result};
use crate::kernel::{Kernel, SupportSample};

/// The already-trained classifier `F` consulted when the new-class rule declines.
pub trait BasePredictor {
    fn predict(&self, x: &[f64]) -> String;
}

/// Returns the same label for every input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantPredictor(pub String);

impl BasePredictor for ConstantPredictor {
    fn predict(&self, _x: &[f64]) -> String {
        self.0.clone()
    }
}

impl<F: Fn(&[f64]) -> String> BasePredictor for F {
    fn predict(&self, x: &[f64]) -> String {
        self(x)
    }
}

/// Bound constants needed by the optimising policies.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundContext {
    /// New-class side: `A_Y`, `r_Y`, `k`, `C*`, profile. Its `delta` is ignored.
    pub y: BoundParams,
    /// Base-class side: `A_X`, `r_X`, `C*`, profile.
    pub x: BoundParams,
    pub n: usize,
    pub grid: GridSpec,
    pub mode: PnMode,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum DeltaPolicy {
    Fixed(f64),
    /// Joint grid search of `(delta, theta)` maximising `min(p_n, p_e)`.
    Optimize(BoundContext),
}

#[derive(Debug, Clone, PartialEq, Default)]
#[allow(clippy::large_enum_variant)]
pub enum ThetaPolicy {
    Fixed(f64),
    #[default]
    MidRange,
    /// Uses the optimiser's theta. With a fixed delta the bound context must
    /// be supplied here.
    Optimize(Option<BoundContext>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotModel {
    kernel: Kernel,
    support: Vec<Vec<f64>>,
    new_label: String,
    r_y: f64,
    d: f64,
    delta: f64,
    delta_cap: f64,
    theta: f64,
    #[serde(skip)]
    sample: Option<SupportSample>,
}

impl FewShotModel {
    pub fn fit(
        support: SupportSample,
        r_y: f64,
        delta_policy: &DeltaPolicy,
        theta_policy: &ThetaPolicy,
    ) -> Result<Self> {
        if !(r_y.is_finite() && r_y > 0.0) {
            return Err(invalid("r_y", format!("must be positive, got {r_y}")));
        }
        let k = support.k();
        let d = support.d_statistic()?;

        let mut optimum = None;
        let delta = match delta_policy {
            DeltaPolicy::Fixed(delta) => *delta,
            DeltaPolicy::Optimize(ctx) => {
                check_context(ctx, r_y, k)?;
                let o = optimize_delta_theta(d, &ctx.y, &ctx.x, ctx.n, &ctx.grid, ctx.mode)?;
                optimum = Some(o);
                o.delta
            }
        };
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
        }
        let delta_cap = delta_feasible(d, r_y, k, delta);
        if !(delta_cap > 0.0) {
            return Err(Error::Infeasible {
                d,
                required: required_d(r_y, k, delta),
                delta,
                delta_cap,
            });
        }
        let (lo, hi) = theta_interval(delta_cap, r_y);
        let theta = match theta_policy {
            ThetaPolicy::MidRange => 0.5 * (lo + hi),
            ThetaPolicy::Fixed(t) => {
                if !(*t >= lo && *t <= hi) {
                    return Err(Error::ThetaOutOfRange { theta: *t, lo, hi });
                }
                *t
            }
            ThetaPolicy::Optimize(ctx) => match (optimum, ctx) {
                (Some(o), _) => o.theta,
                (None, Some(ctx)) => {
                    check_context(ctx, r_y, k)?;
                    optimize_theta(d, delta, &ctx.y, &ctx.x, ctx.n, &ctx.grid, ctx.mode)?.theta
                }
                (None, None) => {
                    return Err(invalid(
                        "theta",
                        "theta optimisation needs bound constants when delta is fixed",
                    ))
                }
            },
        };
        Ok(Self {
            kernel: support.kernel(),
            support: support.points().to_vec(),
            new_label: support.label().to_string(),
            r_y,
            d,
            delta,
            delta_cap,
            theta,
            sample: Some(support),
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }
    pub fn support(&self) -> &SupportSample {
        self.sample
            .as_ref()
            .expect("support sample is rebuilt on load")
    }
    pub fn new_label(&self) -> &str {
        &self.new_label
    }
    pub fn r_y(&self) -> f64 {
        self.r_y
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn delta_cap(&self) -> f64 {
        self.delta_cap
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `(1/k) sum_i k(x_i, x) - theta D(Z)`.
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        Ok(self.support().mean_score(x)? - self.theta * self.d)
    }

    pub fn accepts(&self, x: &[f64]) -> Result<bool> {
        Ok(self.margin(x)? >= 0.0)
    }

    pub fn classify(&self, x: &[f64], base: &dyn BasePredictor) -> Result<String> {
        if self.accepts(x)? {
            Ok(self.new_label.clone())
        } else {
            Ok(base.predict(x))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Parses and re-validates a model written by [`to_json`](Self::to_json).
    pub fn from_json(s: &str) -> Result<Self> {
        let mut m: Self =
            serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        let sample = SupportSample::new(m.kernel, m.support.clone(), m.new_label.clone())?;
        let d = sample.d_statistic()?;
        if d != m.d {
            return Err(Error::ModelInvariant(format!(
                "stored D = {} but support gives {d}",
                m.d
            )));
        }
        if !(m.r_y > 0.0 && m.delta > 0.0 && m.delta < 1.0) {
            return Err(Error::ModelInvariant("r_y or delta out of range".into()));
        }
        let cap = delta_feasible(d, m.r_y, sample.k(), m.delta);
        if cap != m.delta_cap || !(cap > 0.0) {
            return Err(Error::ModelInvariant(format!(
                "stored Delta = {} but recomputed {cap}",
                m.delta_cap
            )));
        }
        let (lo, hi) = theta_interval(cap, m.r_y);
        if !(m.theta >= lo && m.theta <= hi) {
            return Err(Error::ModelInvariant(format!(
                "theta = {} outside [{lo}, {hi}]",
                m.theta
            )));
        }
        m.sample = Some(sample);
        Ok(m)
    }
}

fn check_context(ctx: &BoundContext, r_y: f64, k: usize) -> Result<()> {
    if ctx.y.r() != r_y {
        return Err(invalid(
            "r_y",
            format!(
                "bound context has r_Y = {} but fit was given {r_y}",
                ctx.y.r()
            ),
        ));
    }
    if ctx.y.k() != k {
        return Err(invalid(
            "k",
            format!(
                "bound context has k = {} but support has {k} points",
                ctx.y.k()
            ),
        ));
    }
    Ok(())
}

/// Several new classes, tried in registration order; the first model that
/// accepts wins.
#[derive(Debug, Clone, Default)]
pub struct FewShotCascade {
    models: Vec<FewShotModel>,
}

impl FewShotCascade {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, model: FewShotModel) {
        self.models.push(model);
    }

    pub fn models(&self) -> &[FewShotModel] {
        &self.models
    }

    pub fn classify(&self, x: &[f64], base: &dyn BasePredictor) -> Result<String> {
        for m in &self.models {
            if m.accepts(x)? {
                return Ok(m.new_label.clone());
            }
        }
        Ok(base.predict(x))
    }
}
