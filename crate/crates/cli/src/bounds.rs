use anyhow::{anyhow, Result};
use kfs_core::bounds::{
    lhd_l, lhd_two_sided_prob, lhd_u, lhd_upper_prob, optimize_theta, quasi_orth_bound,
    quasi_orth_norm_bound, BoundParams, DimensionProfile, GridSpec, PnMode,
};
use kfs_core::{Error, Kernel};

use crate::output::{self, num, opt_num, Table};
use crate::{Outcome, Settings};

pub const BOUNDS_HEADER: &[&str] = &[
    "kernel",
    "n",
    "k",
    "delta",
    "epsilon",
    "beta",
    "quasi_orth",
    "quasi_orth_norm",
    "lhd_u",
    "lhd_l",
    "lhd_upper",
    "lhd_two_sided",
    "delta_cap",
    "theta",
    "p_n",
    "p_e",
];

/// Constant `beta` when given, otherwise the identity-map value `n`.
pub(crate) fn profile(s: &Settings, n: usize) -> Result<DimensionProfile> {
    Ok(match s.get::<f64>("beta")? {
        Some(b) => DimensionProfile::constant(b)?,
        None => DimensionProfile::identity(n),
    })
}

pub(crate) fn pn_mode(s: &Settings) -> Result<PnMode> {
    Ok(if s.flag("as_printed")? {
        PnMode::AsPrinted
    } else {
        PnMode::Normalized
    })
}

pub(crate) fn grid(s: &Settings) -> Result<GridSpec> {
    let m: usize = s.get_or("grid", GridSpec::default().theta_points)?;
    if m == 0 {
        return Err(anyhow!("`grid` must be >= 1"));
    }
    Ok(GridSpec::square(m))
}

struct Point {
    kernel: Kernel,
    n: usize,
    y: BoundParams,
    x: BoundParams,
}

pub(crate) fn run(s: &Settings) -> Result<Outcome> {
    let kernels = s.kernels()?;
    let ns: Vec<usize> = s
        .list("n")?
        .ok_or_else(|| anyhow!("missing required setting `n`"))?;
    let ks: Vec<usize> = s.list_or("k", vec![5])?;
    let deltas: Vec<f64> = s.list_or("delta", vec![0.5])?;
    let epsilon: f64 = s.get_or("epsilon", 0.1)?;
    let r: f64 = s.get_or("r", 1.0)?;
    let r_x: f64 = s.get_or("r_x", 1.0)?;
    let a: f64 = s.get_or("a", 1.0)?;
    let c: f64 = s.get_or("c", 1.0)?;
    let c_star: f64 = s.get_or("c_star", 1.0)?;
    let d: Option<f64> = s.get("d")?;
    let mode = pn_mode(s)?;
    let grid = grid(s)?;
    let out = s.get::<std::path::PathBuf>("out")?;

    let mut points = Vec::new();
    for &kernel in &kernels {
        for &n in &ns {
            if n == 0 {
                return Err(anyhow!("`n` must be >= 1"));
            }
            let profile = profile(s, n)?;
            for &k in &ks {
                for &delta in &deltas {
                    let build = |radius: f64| {
                        BoundParams::builder(radius, k, delta, profile.clone())
                            .epsilon(epsilon)
                            .growth(a)
                            .volume_constant(c)
                            .neighborhood_constant(c_star)
                            .build()
                    };
                    points.push(Point {
                        kernel,
                        n,
                        y: build(r)?,
                        x: build(r_x)?,
                    });
                }
            }
        }
    }
    if let Some(d) = d {
        if !(d.is_finite() && d >= 0.0) {
            return Err(anyhow!("`d` must be a non-negative number, got {d}"));
        }
    }

    let mut table = Table::new(BOUNDS_HEADER)?;
    for p in &points {
        let (n, y) = (p.n, &p.y);
        let threshold = match d {
            None => None,
            Some(d) => match optimize_theta(d, y.delta(), y, &p.x, n, &grid, mode) {
                Ok(o) => Some(o),
                Err(Error::Infeasible { required, .. }) => {
                    eprintln!(
                        "kfs: bounds n={n} k={} delta={}: D = {d} is below the required {required}; threshold columns left empty",
                        y.k(),
                        y.delta()
                    );
                    None
                }
                Err(e) => return Err(e.into()),
            },
        };
        table.push(vec![
            p.kernel.to_string(),
            n.to_string(),
            y.k().to_string(),
            num(y.delta()),
            num(y.epsilon()),
            num(y.profile().beta_at(y.r(), n)?),
            num(quasi_orth_bound(y, n)?.raw),
            num(quasi_orth_norm_bound(y, n)?.raw),
            num(lhd_u(y)),
            num(lhd_l(y)),
            num(lhd_upper_prob(y, n)?.raw),
            num(lhd_two_sided_prob(y, n)?.raw),
            opt_num(threshold.map(|o| o.delta_cap)),
            opt_num(threshold.map(|o| o.theta)),
            opt_num(threshold.map(|o| o.p_n.raw)),
            opt_num(threshold.map(|o| o.p_e.raw)),
        ])?;
    }
    output::emit(out.as_deref(), &table.into_bytes()?)?;
    Ok(Outcome::Success)
}
