//! Closed-form probability bounds for quasi-orthogonality, the law of high
//! dimension, and the kernel few-shot rule.
//!
//! Every bound has the shape `1 - (failure terms)`. The failure terms are
//! powers of a base in `[0, 1]` raised to an effective dimension supplied by a
//! [`DimensionProfile`]. Bounds are returned as [`BoundValue`]s; a value at or
//! below zero is reported as vacuous rather than raised as an error, since
//! parameter sweeps cross vacuous regions routinely.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Effective dimension `beta(c, r, n)` as a function of the radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionProfile {
    pub kind: ProfileKind,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProfileKind {
    Constant {
        beta: f64,
    },
    /// Piecewise-linear in the radius, held at the end values outside the table.
    Tabulated {
        radii: Vec<f64>,
        betas: Vec<f64>,
    },
}

impl DimensionProfile {
    pub fn constant(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(invalid("beta", format!("must be positive, got {beta}")));
        }
        Ok(Self {
            kind: ProfileKind::Constant { beta },
            description: format!("constant beta = {beta}"),
        })
    }

    /// The identity feature map on `R^n`: `beta = n`.
    pub fn identity(n: usize) -> Self {
        Self {
            kind: ProfileKind::Constant { beta: n as f64 },
            description: format!("identity map, beta = n = {n}"),
        }
    }

    pub fn tabulated(
        radii: Vec<f64>,
        betas: Vec<f64>,
        description: impl Into<String>,
    ) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if radii.len() != betas.len() {
            return Err(invalid(
                "profile",
                format!("{} radii but {} betas", radii.len(), betas.len()),
            ));
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) || radii.iter().any(|r| !r.is_finite()) {
            return Err(invalid(
                "profile",
                "radii must be finite and strictly increasing",
            ));
        }
        if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(invalid("profile", "betas must be positive"));
        }
        Ok(Self {
            kind: ProfileKind::Tabulated { radii, betas },
            description: description.into(),
        })
    }

    /// `n` is accepted for signature parity with `beta(c, r, n)`; a profile
    /// is always built for one fixed dimension.
    pub fn beta_at(&self, radius: f64, _n: usize) -> Result<f64> {
        if !(radius >= 0.0) {
            return Err(Error::Domain(format!("radius must be >= 0, got {radius}")));
        }
        match &self.kind {
            ProfileKind::Constant { beta } => Ok(*beta),
            ProfileKind::Tabulated { radii, betas } => {
                if radii.is_empty() || betas.is_empty() {
                    return Err(Error::EmptyProfile);
                }
                let last = radii.len() - 1;
                if radius <= radii[0] {
                    return Ok(betas[0]);
                }
                if radius >= radii[last] {
                    return Ok(betas[last]);
                }
                let i = radii.partition_point(|&r| r <= radius) - 1;
                let t = (radius - radii[i]) / (radii[i + 1] - radii[i]);
                Ok(betas[i] + t * (betas[i + 1] - betas[i]))
            }
        }
    }
}

/// Constants describing one class distribution: growth constant `A`, support
/// radius `r`, sample size `k`, tolerances `delta` and `epsilon`, volume
/// constants `C` and `C*`, and the effective-dimension profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    a: f64,
    r: f64,
    k: usize,
    delta: f64,
    epsilon: f64,
    c: f64,
    c_star: f64,
    profile: DimensionProfile,
}

#[derive(Debug, Clone)]
pub struct BoundParamsBuilder {
    p: BoundParams,
}

impl BoundParamsBuilder {
    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.p.epsilon = epsilon;
        self
    }

    /// Density growth constant `A`.
    pub fn growth(mut self, a: f64) -> Self {
        self.p.a = a;
        self
    }

    /// Volume-ratio constant `C`.
    pub fn volume_constant(mut self, c: f64) -> Self {
        self.p.c = c;
        self
    }

    /// Neighbourhood maximum `C*` of the volume-ratio constant.
    pub fn neighborhood_constant(mut self, c_star: f64) -> Self {
        self.p.c_star = c_star;
        self
    }

    pub fn build(self) -> Result<BoundParams> {
        let p = self.p;
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        let unit = |name: &'static str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must lie in (0, 1), got {v}")))
            }
        };
        positive("A", p.a)?;
        positive("r", p.r)?;
        positive("C", p.c)?;
        positive("C*", p.c_star)?;
        unit("delta", p.delta)?;
        unit("epsilon", p.epsilon)?;
        if p.k == 0 {
            return Err(invalid("k", "must be >= 1"));
        }
        if let ProfileKind::Tabulated { radii, .. } = &p.profile.kind {
            if radii.is_empty() {
                return Err(Error::EmptyProfile);
            }
        }
        Ok(p)
    }
}

impl BoundParams {
    /// Starts a builder with `A = C = C* = 1` and `epsilon = 0.1`.
    pub fn builder(r: f64, k: usize, delta: f64, profile: DimensionProfile) -> BoundParamsBuilder {
        BoundParamsBuilder {
            p: BoundParams {
                a: 1.0,
                r,
                k,
                delta,
                epsilon: 0.1,
                c: 1.0,
                c_star: 1.0,
                profile,
            },
        }
    }

    /// Uniform ball under the identity map: `A = C = C* = 1`, `beta = n`.
    pub fn identity_ball(n: usize, r: f64, k: usize, delta: f64, epsilon: f64) -> Result<Self> {
        Self::builder(r, k, delta, DimensionProfile::identity(n))
            .epsilon(epsilon)
            .build()
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn c_star(&self) -> f64 {
        self.c_star
    }
    pub fn profile(&self) -> &DimensionProfile {
        &self.profile
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        BoundParamsBuilder {
            p: Self {
                delta,
                ..self.clone()
            },
        }
        .build()
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        BoundParamsBuilder {
            p: Self { k, ..self.clone() },
        }
        .build()
    }

    fn beta(&self, radius: f64, n: usize) -> Result<f64> {
        self.profile.beta_at(radius, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub raw: f64,
    pub clamped: f64,
    pub vacuous: bool,
}

impl BoundValue {
    pub fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            clamped: raw.clamp(0.0, 1.0),
            vacuous: raw <= 0.0,
        }
    }
}

/// How the bases of the new-class acceptance bound are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PnMode {
    /// Bases divided by `r_Y`, so each lies in `[0, 1]`.
    #[default]
    Normalized,
    /// Bases `(r_Y^2 - (Delta - theta)^2)^(1/2)` and `r_Y (1 - delta^2)^(1/2)` verbatim.
    AsPrinted,
}

fn pair_failure(ca: f64, k: usize, delta: f64, beta: f64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    let pairs = (k * (k - 1)) as f64;
    ca * pairs * (1.0 - delta * delta).powf(0.5 * beta)
}

fn norm_failure(ca: f64, k: usize, epsilon: f64, beta: f64) -> f64 {
    ca * k as f64 * (1.0 - epsilon).powf(beta)
}

/// `P(A1)` lower bound: all pairwise centred inner products are at most `delta r`.
pub fn quasi_orth_bound(p: &BoundParams, n: usize) -> Result<BoundValue> {
    let beta = p.beta(p.r * p.delta, n)?;
    Ok(BoundValue::from_raw(
        1.0 - pair_failure(p.c * p.a, p.k, p.delta, beta),
    ))
}

/// `P(A1 and A2)` lower bound: quasi-orthogonality plus all norms at least `(1 - epsilon) r`.
pub fn quasi_orth_norm_bound(p: &BoundParams, n: usize) -> Result<BoundValue> {
    let beta_pair = p.beta(p.r * p.delta, n)?;
    let beta_norm = p.beta(0.0, n)?;
    let ca = p.c * p.a;
    Ok(BoundValue::from_raw(
        1.0 - norm_failure(ca, p.k, p.epsilon, beta_norm)
            - pair_failure(ca, p.k, p.delta, beta_pair),
    ))
}

/// Upper radius (squared) for the empirical mean: `(r^2 + (k-1) delta r) / k`.
pub fn lhd_u(p: &BoundParams) -> f64 {
    let k = p.k as f64;
    (p.r * p.r + (k - 1.0) * p.delta * p.r) / k
}

/// Lower radius (squared): `((1-epsilon)^2 r^2 - (k-1) delta r) / k`. May be negative.
pub fn lhd_l(p: &BoundParams) -> f64 {
    let k = p.k as f64;
    let s = 1.0 - p.epsilon;
    (s * s * p.r * p.r - (k - 1.0) * p.delta * p.r) / k
}

/// Lower bound on `P(|mean - c|^2 <= U)`.
pub fn lhd_upper_prob(p: &BoundParams, n: usize) -> Result<BoundValue> {
    quasi_orth_bound(p, n)
}

/// Lower bound on `P(L <= |mean - c|^2 <= U)`.
pub fn lhd_two_sided_prob(p: &BoundParams, n: usize) -> Result<BoundValue> {
    quasi_orth_norm_bound(p, n)
}

/// `Delta = D - sqrt(r_Y^2 / k + (k-1)/k r_Y delta)`.
pub fn delta_feasible(d: f64, r_y: f64, k: usize, delta: f64) -> f64 {
    d - required_d(r_y, k, delta)
}

/// The smallest `D` for which `Delta > 0` at this `delta`.
pub fn required_d(r_y: f64, k: usize, delta: f64) -> f64 {
    let k = k as f64;
    (r_y * r_y / k + (k - 1.0) / k * r_y * delta).sqrt()
}

/// Admissible threshold interval `[max(Delta - r_Y, 0), Delta]`.
pub fn theta_interval(delta_cap: f64, r_y: f64) -> (f64, f64) {
    ((delta_cap - r_y).max(0.0), delta_cap)
}

// relative slack for `Delta - theta <= r` and friends when endpoints come from arithmetic
const RANGE_SLACK: f64 = 1e-12;

/// Lower bound on the probability that a new-class draw is accepted.
///
/// `y` supplies `A_Y`, `r_Y`, `k`, `delta`, `C*` and the profile.
pub fn p_n_bound(
    y: &BoundParams,
    delta_cap: f64,
    theta: f64,
    n: usize,
    mode: PnMode,
) -> Result<BoundValue> {
    let r = y.r;
    if !(theta >= 0.0) || theta > delta_cap * (1.0 + RANGE_SLACK) + RANGE_SLACK {
        return Err(Error::Domain(format!(
            "theta = {theta} must lie in [0, Delta = {delta_cap}]"
        )));
    }
    let gap = (delta_cap - theta).max(0.0);
    if gap > r * (1.0 + RANGE_SLACK) {
        return Err(Error::Domain(format!(
            "Delta - theta = {gap} exceeds r_Y = {r}"
        )));
    }
    let gap = gap.min(r);
    let (base_gap, base_pair) = match mode {
        PnMode::Normalized => {
            let g = gap / r;
            ((1.0 - g * g).sqrt(), (1.0 - y.delta * y.delta).sqrt())
        }
        PnMode::AsPrinted => (
            (r * r - gap * gap).sqrt(),
            r * (1.0 - y.delta * y.delta).sqrt(),
        ),
    };
    let beta_gap = y.beta(gap, n)?;
    let beta_pair = y.beta(r * y.delta, n)?;
    let cs_a = y.c_star * y.a;
    let first = 1.0 - cs_a * base_gap.powf(beta_gap);
    let second = if y.k < 2 {
        1.0
    } else {
        1.0 - cs_a * (y.k * (y.k - 1)) as f64 * base_pair.powf(beta_pair)
    };
    // two negative factors must not multiply into a positive guarantee
    let raw = if first <= 0.0 || second <= 0.0 {
        first.min(second)
    } else {
        first * second
    };
    Ok(BoundValue::from_raw(raw))
}

/// Lower bound on the probability that a base-class draw keeps its label.
///
/// `x` supplies `A_X`, `r_X`, `C*` and the profile. Requires `theta <= r_X`.
pub fn p_e_bound(x: &BoundParams, theta: f64, n: usize) -> Result<BoundValue> {
    let r = x.r;
    if !(theta >= 0.0) || theta > r * (1.0 + RANGE_SLACK) {
        return Err(Error::Domain(format!(
            "theta = {theta} must lie in [0, r_X = {r}]"
        )));
    }
    let t = (theta / r).min(1.0);
    let base = (1.0 - t * t).sqrt();
    let beta = x.beta(theta, n)?;
    Ok(BoundValue::from_raw(1.0 - x.c_star * x.a * base.powf(beta)))
}

/// [`p_e_bound`] extended past `theta = r_X`: the acceptance half-space then
/// misses the whole base-class support, so the bound is exactly 1.
pub fn p_e_bound_saturating(x: &BoundParams, theta: f64, n: usize) -> Result<BoundValue> {
    if theta > x.r {
        if !theta.is_finite() {
            return Err(Error::Domain(format!("theta = {theta}")));
        }
        return Ok(BoundValue::from_raw(1.0));
    }
    p_e_bound(x, theta, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub delta_points: usize,
    pub theta_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            delta_points: 256,
            theta_points: 256,
        }
    }
}

impl GridSpec {
    pub fn square(points: usize) -> Self {
        Self {
            delta_points: points,
            theta_points: points,
        }
    }

    /// Interior grid `i / (m + 1)`, `i = 1..=m`, on `(0, 1)`.
    pub fn delta_values(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.delta_points;
        (1..=m).map(move |i| i as f64 / (m + 1) as f64)
    }

    /// Closed grid on `[lo, hi]`; a single point sits at `hi`.
    pub fn theta_values(&self, lo: f64, hi: f64) -> impl Iterator<Item = f64> + '_ {
        let m = self.theta_points;
        (0..m).map(move |i| {
            if i + 1 == m {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (m - 1) as f64
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub delta: f64,
    pub theta: f64,
    pub delta_cap: f64,
    pub p_n: BoundValue,
    pub p_e: BoundValue,
}

impl Optimum {
    pub fn objective(&self) -> f64 {
        self.p_n.raw.min(self.p_e.raw)
    }

    // larger objective, then larger theta, then larger delta
    fn beats(&self, other: &Optimum) -> bool {
        let (a, b) = (self.objective(), other.objective());
        if a != b {
            return a > b;
        }
        if self.theta != other.theta {
            return self.theta > other.theta;
        }
        self.delta > other.delta
    }
}

/// Best threshold on the admissible interval for a fixed `delta`.
pub fn optimize_theta(
    d: f64,
    delta: f64,
    y: &BoundParams,
    x: &BoundParams,
    n: usize,
    grid: &GridSpec,
    mode: PnMode,
) -> Result<Optimum> {
    let y = y.with_delta(delta)?;
    let delta_cap = delta_feasible(d, y.r, y.k, delta);
    if !(delta_cap > 0.0) {
        return Err(Error::Infeasible {
            d,
            required: required_d(y.r, y.k, delta),
            delta,
            delta_cap,
        });
    }
    let (lo, hi) = theta_interval(delta_cap, y.r);
    let mut best: Option<Optimum> = None;
    for theta in grid.theta_values(lo, hi) {
        let cand = Optimum {
            delta,
            theta,
            delta_cap,
            p_n: p_n_bound(&y, delta_cap, theta, n, mode)?,
            p_e: p_e_bound_saturating(x, theta, n)?,
        };
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best.ok_or_else(|| invalid("grid", "theta grid is empty"))
}

/// Grid search over `delta` in `(0, 1)` and the admissible `theta` range,
/// maximising `min(p_n, p_e)`.
pub fn optimize_delta_theta(
    d: f64,
    y: &BoundParams,
    x: &BoundParams,
    n: usize,
    grid: &GridSpec,
    mode: PnMode,
) -> Result<Optimum> {
    if grid.delta_points == 0 || grid.theta_points == 0 {
        return Err(invalid("grid", "grid resolution must be >= 1"));
    }
    let mut best: Option<Optimum> = None;
    let mut max_cap = f64::NEG_INFINITY;
    for delta in grid.delta_values() {
        let cap = delta_feasible(d, y.r, y.k, delta);
        max_cap = max_cap.max(cap);
        if !(cap > 0.0) {
            continue;
        }
        let cand = optimize_theta(d, delta, y, x, n, grid, mode)?;
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best.ok_or(Error::NoFeasibleDelta {
        max_delta_cap: max_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ident(r: f64, k: usize, delta: f64, eps: f64, beta: f64) -> BoundParams {
        BoundParams::builder(r, k, delta, DimensionProfile::constant(beta).unwrap())
            .epsilon(eps)
            .build()
            .unwrap()
    }

    #[test]
    fn beta_at_examples() {
        let c = DimensionProfile::constant(100.0).unwrap();
        assert_eq!(c.beta_at(0.37, 7).unwrap(), 100.0);
        assert_eq!(
            DimensionProfile::identity(50).beta_at(0.2, 50).unwrap(),
            50.0
        );
        let t = DimensionProfile::tabulated(vec![0.0, 1.0], vec![10.0, 20.0], "t").unwrap();
        assert_eq!(t.beta_at(0.5, 3).unwrap(), 15.0);
        assert_eq!(t.beta_at(3.0, 3).unwrap(), 20.0);
        assert_eq!(t.beta_at(0.0, 3).unwrap(), 10.0);
        assert!(t.beta_at(-0.1, 3).is_err());
    }

    #[test]
    fn profile_validation() {
        assert_eq!(
            DimensionProfile::tabulated(vec![], vec![], "e").unwrap_err(),
            Error::EmptyProfile
        );
        let bad = ProfileKind::Tabulated {
            radii: vec![],
            betas: vec![],
        };
        let p = DimensionProfile {
            kind: bad,
            description: String::new(),
        };
        assert_eq!(p.beta_at(0.1, 2).unwrap_err(), Error::EmptyProfile);
        assert!(DimensionProfile::tabulated(vec![1.0, 0.5], vec![1.0, 1.0], "").is_err());
        assert!(DimensionProfile::tabulated(vec![0.5, 1.0], vec![1.0, 0.0], "").is_err());
        assert!(DimensionProfile::constant(0.0).is_err());
    }

    #[test]
    fn params_validation() {
        let prof = DimensionProfile::identity(10);
        assert!(BoundParams::builder(1.0, 5, 1.0, prof.clone())
            .build()
            .is_err());
        assert!(BoundParams::builder(1.0, 5, 0.0, prof.clone())
            .build()
            .is_err());
        assert!(BoundParams::builder(1.0, 0, 0.5, prof.clone())
            .build()
            .is_err());
        assert!(BoundParams::builder(-1.0, 5, 0.5, prof.clone())
            .build()
            .is_err());
        assert!(BoundParams::builder(1.0, 5, 0.5, prof.clone())
            .epsilon(1.0)
            .build()
            .is_err());
        assert!(BoundParams::builder(1.0, 5, 0.5, prof.clone())
            .growth(0.0)
            .build()
            .is_err());
        // C* smaller than C is allowed
        assert!(BoundParams::builder(1.0, 5, 0.5, prof)
            .volume_constant(2.0)
            .neighborhood_constant(1.0)
            .build()
            .is_ok());
    }

    #[test]
    fn bound_value_flags() {
        let v = BoundValue::from_raw(-0.3);
        assert!(v.vacuous);
        assert_eq!(v.clamped, 0.0);
        let v = BoundValue::from_raw(0.0);
        assert!(v.vacuous);
        let v = BoundValue::from_raw(0.7);
        assert!(!v.vacuous);
        assert_eq!(v.clamped, 0.7);
    }

    #[test]
    fn quasi_orth_examples() {
        assert_eq!(
            quasi_orth_bound(&ident(1.0, 1, 0.5, 0.1, 100.0), 100)
                .unwrap()
                .raw,
            1.0
        );
        let near_one = quasi_orth_bound(&ident(1.0, 5, 1.0 - 1e-12, 0.1, 100.0), 100).unwrap();
        assert_relative_eq!(near_one.raw, 1.0, epsilon = 1e-12);
        let v = quasi_orth_bound(&ident(1.0, 5, 0.5, 0.1, 100.0), 100).unwrap();
        assert_relative_eq!(v.raw, 1.0 - 20.0 * 0.75f64.powi(50), epsilon = 1e-15);
        assert_relative_eq!(1.0 - v.raw, 1.1327e-5, max_relative = 1e-3);
    }

    #[test]
    fn quasi_orth_norm_examples() {
        let v = quasi_orth_norm_bound(&ident(1.0, 5, 1.0 - 1e-9, 1.0 - 1e-9, 100.0), 100).unwrap();
        assert_relative_eq!(v.raw, 1.0, epsilon = 1e-12);
        let v = quasi_orth_norm_bound(&ident(1.0, 1, 0.5, 0.1, 100.0), 100).unwrap();
        assert_eq!(v.raw, 1.0 - 0.9f64.powf(100.0));
        let v = quasi_orth_norm_bound(&ident(1.0, 5, 0.5, 0.1, 100.0), 100).unwrap();
        assert_relative_eq!(
            v.raw,
            1.0 - 5.0 * 0.9f64.powi(100) - 20.0 * 0.75f64.powi(50),
            epsilon = 1e-15
        );
    }

    #[test]
    fn lhd_examples() {
        let p = ident(2.0, 1, 0.3, 0.1, 10.0);
        assert_eq!(lhd_u(&p), 4.0);
        assert_relative_eq!(lhd_l(&p), 0.81 * 4.0, epsilon = 1e-15);
        let p = ident(1.0, 5, 0.2, 0.1, 10.0);
        assert_relative_eq!(lhd_u(&p), 0.36, epsilon = 1e-15);
        assert_relative_eq!(lhd_l(&p), 0.002, epsilon = 1e-15);
    }

    #[test]
    fn lhd_prob_examples() {
        assert_eq!(
            lhd_upper_prob(&ident(1.0, 1, 0.3, 0.1, 200.0), 1)
                .unwrap()
                .raw,
            1.0
        );
        let p = ident(1.0, 5, 0.5, 0.1, 100.0);
        assert_eq!(
            lhd_upper_prob(&p, 100).unwrap(),
            quasi_orth_bound(&p, 100).unwrap()
        );
        let v = lhd_upper_prob(&ident(1.0, 10, 0.3, 0.1, 200.0), 200).unwrap();
        assert_relative_eq!(v.raw, 1.0 - 90.0 * 0.91f64.powi(100), epsilon = 1e-14);

        let v = lhd_two_sided_prob(&ident(1.0, 1, 0.5, 0.1, 100.0), 100).unwrap();
        assert_eq!(v.raw, 1.0 - 0.9f64.powf(100.0));
        let v = lhd_two_sided_prob(&ident(1.0, 4, 1.0 - 1e-9, 1.0 - 1e-9, 50.0), 50).unwrap();
        assert_relative_eq!(v.raw, 1.0, epsilon = 1e-12);
        let v = lhd_two_sided_prob(&ident(1.0, 3, 0.4, 0.2, 30.0), 30).unwrap();
        assert_relative_eq!(
            v.raw,
            1.0 - 3.0 * 0.8f64.powi(30) - 6.0 * 0.84f64.powi(15),
            epsilon = 1e-14
        );
    }

    #[test]
    fn delta_feasible_examples() {
        assert_eq!(delta_feasible(3.0, 1.5, 1, 0.7), 1.5);
        assert_eq!(delta_feasible(1.5, 1.5, 1, 0.2), 0.0);
        assert_relative_eq!(delta_feasible(1.0, 1.0, 5, 0.2), 0.4, epsilon = 1e-15);
    }

    #[test]
    fn p_n_examples() {
        // theta = Delta, delta -> 1, C* A = 1: first factor 0, vacuous
        let p = ident(1.0, 5, 1.0 - 1e-12, 0.1, 100.0);
        let v = p_n_bound(&p, 0.8, 0.8, 100, PnMode::Normalized).unwrap();
        assert!(v.raw.abs() < 1e-12);
        assert!(v.vacuous || v.clamped < 1e-12);

        let p = ident(1.0, 1, 0.5, 0.1, 100.0);
        let v = p_n_bound(&p, 1.5, 0.5, 100, PnMode::Normalized).unwrap();
        assert_eq!(v.raw, 1.0);

        let p = ident(1.0, 5, 0.5, 0.1, 100.0);
        let v = p_n_bound(&p, 1.0, 0.4, 100, PnMode::Normalized).unwrap();
        let expect = (1.0 - 0.8f64.powi(100)) * (1.0 - 20.0 * 0.75f64.sqrt().powi(100));
        assert_relative_eq!(v.raw, expect, epsilon = 1e-14);

        assert!(p_n_bound(&p, 2.0, 0.5, 100, PnMode::Normalized).is_err());
        assert!(p_n_bound(&p, 1.0, 1.2, 100, PnMode::Normalized).is_err());
        assert!(p_n_bound(&p, 1.0, -0.1, 100, PnMode::Normalized).is_err());
    }

    #[test]
    fn p_n_as_printed_differs_only_by_scale() {
        let p = ident(1.0, 5, 0.5, 0.1, 100.0);
        let a = p_n_bound(&p, 1.0, 0.4, 100, PnMode::Normalized).unwrap();
        let b = p_n_bound(&p, 1.0, 0.4, 100, PnMode::AsPrinted).unwrap();
        assert_eq!(a.raw, b.raw);

        let p = ident(2.0, 5, 0.5, 0.1, 10.0);
        let v = p_n_bound(&p, 1.0, 0.0, 10, PnMode::AsPrinted).unwrap();
        let first = 1.0 - 3.0f64.sqrt().powi(10);
        let second = 1.0 - 20.0 * (2.0 * 0.75f64.sqrt()).powi(10);
        assert_eq!(v.raw, first.min(second));
        assert!(v.vacuous);
    }

    #[test]
    fn p_n_negative_factors_do_not_multiply() {
        let p = BoundParams::builder(1.0, 5, 0.5, DimensionProfile::constant(1.0).unwrap())
            .growth(3.0)
            .build()
            .unwrap();
        let v = p_n_bound(&p, 0.5, 0.5, 1, PnMode::Normalized).unwrap();
        assert!(v.vacuous);
        assert!(v.raw < 0.0);
    }

    #[test]
    fn p_e_examples() {
        let p = ident(1.0, 3, 0.5, 0.1, 50.0);
        assert_eq!(p_e_bound(&p, 1.0, 50).unwrap().raw, 1.0);
        assert_eq!(p_e_bound(&p, 0.0, 50).unwrap().raw, 0.0);
        let p2 = BoundParams::builder(1.0, 3, 0.5, DimensionProfile::constant(50.0).unwrap())
            .growth(0.5)
            .neighborhood_constant(0.5)
            .build()
            .unwrap();
        assert_eq!(p_e_bound(&p2, 0.0, 50).unwrap().raw, 0.75);
        let v = p_e_bound(&p, 0.6, 50).unwrap();
        assert_relative_eq!(v.raw, 1.0 - 0.8f64.powi(50), epsilon = 1e-15);
        assert!(p_e_bound(&p, 1.01, 50).is_err());
        assert_eq!(p_e_bound_saturating(&p, 1.5, 50).unwrap().raw, 1.0);
        assert_eq!(
            p_e_bound_saturating(&p, 0.6, 50).unwrap(),
            p_e_bound(&p, 0.6, 50).unwrap()
        );
    }

    #[test]
    fn optimizer_infeasible() {
        let y = ident(1.0, 5, 0.5, 0.1, 100.0);
        let x = ident(1.0, 5, 0.5, 0.1, 100.0);
        // D <= r_Y / sqrt(k)
        let d = 1.0 / 5f64.sqrt();
        let err = optimize_delta_theta(d, &y, &x, 100, &GridSpec::default(), PnMode::Normalized)
            .unwrap_err();
        match err {
            Error::NoFeasibleDelta { max_delta_cap } => assert!(max_delta_cap <= 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn optimizer_k1_delta_drops_out() {
        let y = ident(1.0, 1, 0.5, 0.1, 100.0);
        let x = ident(1.0, 1, 0.5, 0.1, 100.0);
        let grid = GridSpec::square(64);
        let o = optimize_delta_theta(2.0, &y, &x, 100, &grid, PnMode::Normalized).unwrap();
        assert_eq!(o.delta_cap, 1.0);
        // the theta optimum is the same for every delta, so the largest delta wins the tie
        assert_eq!(o.delta, 64.0 / 65.0);
        let best = grid
            .theta_values(0.0, 1.0)
            .map(|t| {
                let pn = p_n_bound(&y, 1.0, t, 100, PnMode::Normalized).unwrap().raw;
                let pe = p_e_bound_saturating(&x, t, 100).unwrap().raw;
                pn.min(pe)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(o.objective(), best);
    }

    #[test]
    fn theta_grid_endpoints() {
        let g = GridSpec::square(5);
        let v: Vec<f64> = g.theta_values(1.0, 2.0).collect();
        assert_eq!(v, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        let v: Vec<f64> = GridSpec::square(1).theta_values(1.0, 2.0).collect();
        assert_eq!(v, vec![2.0]);
        let d: Vec<f64> = GridSpec::square(3).delta_values().collect();
        assert_eq!(d, vec![0.25, 0.5, 0.75]);
    }
}
