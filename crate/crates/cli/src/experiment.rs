use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::ValueEnum;
use kfs_core::bounds::BoundParams;
use kfs_core::experiments::{
    estimate_beta, estimate_pairwise_quasi_orth, estimate_separability, verify_fewshot, verify_lhd,
    verify_quasi_orth, Aggregate, BetaConfig, ClassRegion, EventCheck, FeatureCenter, RngStream,
    SyntheticScenario, TrialPlan,
};
use kfs_core::fewshot::ThetaPolicy;
use kfs_core::Kernel;
use serde_json::json;

use crate::output::{self, num, Table};
use crate::{ExperimentArgs, GlobalArgs, Outcome, Settings};

pub const QUASI_ORTH_HEADER: &[&str] = &[
    "kernel",
    "n",
    "delta",
    "trials",
    "frequency",
    "ci_lo",
    "ci_hi",
];
pub const SEPARABILITY_HEADER: &[&str] = &[
    "kernel",
    "n",
    "set_size",
    "trials",
    "frequency",
    "ci_lo",
    "ci_hi",
];
pub const VERIFY_HEADER: &[&str] = &[
    "kernel",
    "n",
    "k",
    "delta",
    "epsilon",
    "event",
    "trials",
    "frequency",
    "ci_lo",
    "ci_hi",
    "bound_raw",
    "bound_clamped",
    "vacuous",
    "pass",
];
pub const BETA_HEADER: &[&str] = &[
    "kernel",
    "n",
    "radius",
    "volume_est",
    "beta_hat",
    "beta_ci_lo",
    "beta_ci_hi",
];

const DEFAULT_RADII: [f64; 5] = [0.8, 0.85, 0.9, 0.95, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    QuasiOrth,
    Separability,
    VerifyQuasiOrth,
    VerifyLhd,
    VerifyFewshot,
    EstimateBeta,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::QuasiOrth => "quasi-orth",
            Self::Separability => "separability",
            Self::VerifyQuasiOrth => "verify-quasi-orth",
            Self::VerifyLhd => "verify-lhd",
            Self::VerifyFewshot => "verify-fewshot",
            Self::EstimateBeta => "estimate-beta",
        }
    }

    /// Top-level random stream; grid points get children of it.
    fn stream_id(self) -> u64 {
        match self {
            Self::QuasiOrth => 1,
            Self::Separability => 2,
            Self::VerifyQuasiOrth => 3,
            Self::VerifyLhd => 4,
            Self::VerifyFewshot => 5,
            Self::EstimateBeta => 6,
        }
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::QuasiOrth => &["kernel", "n", "delta", "trials"],
            Self::Separability => &["kernel", "n", "set_size", "trials"],
            Self::VerifyQuasiOrth | Self::VerifyLhd => &[
                "kernel", "n", "k", "delta", "epsilon", "trials", "r_y", "r_x", "c_y",
            ],
            Self::VerifyFewshot => &[
                "kernel",
                "n",
                "k",
                "delta",
                "trials",
                "r_y",
                "r_x",
                "c_y",
                "eval_draws",
                "theta",
            ],
            Self::EstimateBeta => &["kernel", "n", "radii", "samples", "bootstrap", "r_x"],
        }
    }

    fn header(self) -> &'static [&'static str] {
        match self {
            Self::QuasiOrth => QUASI_ORTH_HEADER,
            Self::Separability => SEPARABILITY_HEADER,
            Self::EstimateBeta => BETA_HEADER,
            _ => VERIFY_HEADER,
        }
    }
}

#[allow(clippy::large_enum_variant)]
enum Job {
    QuasiOrth {
        kernel: Kernel,
        n: usize,
        delta: f64,
    },
    Separability {
        kernel: Kernel,
        n: usize,
        set_size: usize,
    },
    Verify {
        scenario: SyntheticScenario,
        k: usize,
        delta: f64,
        epsilon: f64,
    },
    FewShot {
        scenario: SyntheticScenario,
        k: usize,
        delta: f64,
        theta: ThetaPolicy,
        eval_draws: u64,
    },
    Beta {
        kernel: Kernel,
        n: usize,
        region: ClassRegion,
        center: FeatureCenter,
    },
}

struct Plan {
    kind: ExperimentKind,
    seed: u64,
    workers: usize,
    trials: TrialPlan,
    beta: Option<BetaConfig>,
    jobs: Vec<Job>,
}

fn dims(s: &Settings) -> Result<Vec<usize>> {
    let ns: Vec<usize> = s
        .list("n")?
        .ok_or_else(|| anyhow!("missing required setting `n`"))?;
    if ns.contains(&0) {
        bail!("`n` must be >= 1");
    }
    Ok(ns)
}

fn identity_kernel(s: &Settings, kind: ExperimentKind) -> Result<()> {
    if s.kernels()? != [Kernel::Linear] {
        bail!(
            "{} uses the identity feature map; `kernel` must be `linear`",
            kind.name()
        );
    }
    Ok(())
}

fn parse_theta(raw: &str) -> Result<ThetaPolicy> {
    Ok(match raw.trim() {
        "mid" => ThetaPolicy::MidRange,
        "opt" => ThetaPolicy::Optimize(None),
        v => ThetaPolicy::Fixed(
            v.parse()
                .map_err(|_| anyhow!("`theta` must be `mid`, `opt` or a number, got `{v}`"))?,
        ),
    })
}

/// Parses and validates the whole configuration without running anything.
fn plan(kind: ExperimentKind, s: &Settings) -> Result<Plan> {
    let allowed: Vec<&str> = GlobalArgs::KEYS
        .iter()
        .chain(kind.keys())
        .copied()
        .collect();
    s.restrict_to(kind.name(), &allowed)?;
    debug_assert!(kind.keys().iter().all(|k| ExperimentArgs::KEYS.contains(k)));
    let seed = s.seed()?;
    let workers = s.workers()?;
    let default_trials = match kind {
        ExperimentKind::VerifyQuasiOrth | ExperimentKind::VerifyLhd => 10_000,
        ExperimentKind::VerifyFewshot => 100,
        _ => 1_000,
    };
    let trials = TrialPlan::new(s.get_or("trials", default_trials)?, workers)?;
    let ns = dims(s)?;
    let mut jobs = Vec::new();
    let mut beta = None;
    match kind {
        ExperimentKind::QuasiOrth => {
            let deltas: Vec<f64> = s.list_or("delta", vec![0.2])?;
            if let Some(d) = deltas.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
                bail!("`delta` must be >= 0, got {d}");
            }
            for kernel in s.kernels()? {
                for &n in &ns {
                    for &delta in &deltas {
                        jobs.push(Job::QuasiOrth { kernel, n, delta });
                    }
                }
            }
        }
        ExperimentKind::Separability => {
            let sizes: Vec<usize> = s.list_or("set_size", vec![1000])?;
            if sizes.contains(&0) {
                bail!("`set_size` must be >= 1");
            }
            for kernel in s.kernels()? {
                for &n in &ns {
                    for &set_size in &sizes {
                        jobs.push(Job::Separability {
                            kernel,
                            n,
                            set_size,
                        });
                    }
                }
            }
        }
        ExperimentKind::VerifyQuasiOrth | ExperimentKind::VerifyLhd => {
            identity_kernel(s, kind)?;
            let ks: Vec<usize> = s.list_or("k", vec![5])?;
            let deltas: Vec<f64> = s.list_or("delta", vec![0.5])?;
            let epsilon: f64 = s.get_or("epsilon", 0.1)?;
            let (r_y, r_x, c_y) = radii(s, 0.0)?;
            for &n in &ns {
                for &k in &ks {
                    for &delta in &deltas {
                        BoundParams::identity_ball(n, r_y, k, delta, epsilon)?;
                        jobs.push(Job::Verify {
                            scenario: SyntheticScenario::identity_balls(n, r_x, c_y, r_y)?,
                            k,
                            delta,
                            epsilon,
                        });
                    }
                }
            }
        }
        ExperimentKind::VerifyFewshot => {
            identity_kernel(s, kind)?;
            let ks: Vec<usize> = s.list_or("k", vec![5])?;
            let deltas: Vec<f64> = s.list_or("delta", vec![0.2])?;
            let (r_y, r_x, c_y) = radii(s, 3.0)?;
            let eval_draws: u64 = s.get_or("eval_draws", 1000)?;
            if eval_draws == 0 {
                bail!("`eval_draws` must be >= 1");
            }
            let theta = parse_theta(s.raw("theta").unwrap_or("mid"))?;
            for &n in &ns {
                for &k in &ks {
                    for &delta in &deltas {
                        if !(delta > 0.0 && delta < 1.0) {
                            bail!("`delta` must lie in (0, 1), got {delta}");
                        }
                        BoundParams::identity_ball(n, r_y, k, delta, 0.1)?;
                        jobs.push(Job::FewShot {
                            scenario: SyntheticScenario::identity_balls(n, r_x, c_y, r_y)?,
                            k,
                            delta,
                            theta: theta.clone(),
                            eval_draws,
                        });
                    }
                }
            }
        }
        ExperimentKind::EstimateBeta => {
            let r_x: f64 = s.get_or("r_x", 1.0)?;
            let radii: Vec<f64> = s.list_or("radii", DEFAULT_RADII.to_vec())?;
            if radii.len() < 2 || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                bail!("`radii` needs at least two positive values");
            }
            let bootstrap: usize = s.get_or("bootstrap", 200)?;
            if bootstrap == 0 {
                bail!("`bootstrap` must be >= 1");
            }
            let samples: u64 = s.get_or("samples", 1_000_000)?;
            TrialPlan::new(samples, workers)?;
            beta = Some(BetaConfig {
                radii,
                samples,
                bootstrap,
                workers,
            });
            for kernel in s.kernels()? {
                for &n in &ns {
                    let origin = vec![0.0; n];
                    let center = match kernel {
                        Kernel::Linear => FeatureCenter::Explicit(origin.clone()),
                        _ => FeatureCenter::AnchorMean(vec![origin.clone()]),
                    };
                    jobs.push(Job::Beta {
                        kernel,
                        n,
                        region: ClassRegion::ball(origin, r_x)?,
                        center,
                    });
                }
            }
        }
    }
    Ok(Plan {
        kind,
        seed,
        workers,
        trials,
        beta,
        jobs,
    })
}

/// `(r_Y, r_X, |c_Y|)` for the two-ball scenarios.
fn radii(s: &Settings, default_c_y: f64) -> Result<(f64, f64, f64)> {
    Ok((
        s.get_or("r_y", 1.0)?,
        s.get_or("r_x", 1.0)?,
        s.get_or("c_y", default_c_y)?,
    ))
}

fn aggregate_cells(a: &Aggregate) -> [String; 4] {
    [
        a.trials.to_string(),
        num(a.frequency),
        num(a.ci_lo),
        num(a.ci_hi),
    ]
}

fn verify_row(
    n: usize,
    k: usize,
    delta: f64,
    epsilon: Option<f64>,
    check: &EventCheck,
) -> Vec<String> {
    let b = check.bound();
    let mut row = vec![
        Kernel::Linear.to_string(),
        n.to_string(),
        k.to_string(),
        num(delta),
        epsilon.map(num).unwrap_or_default(),
        check.event.clone(),
    ];
    row.extend(aggregate_cells(&check.aggregate));
    row.extend([
        num(b.raw),
        num(b.clamped),
        b.vacuous.to_string(),
        check.pass.to_string(),
    ]);
    row
}

/// Runs every job; returns the table and whether all bound checks passed.
fn execute(plan: &Plan) -> Result<(Table, bool)> {
    let mut table = Table::new(plan.kind.header())?;
    let mut all_pass = true;
    let root = RngStream::new(plan.seed, plan.kind.stream_id());
    let name = plan.kind.name();
    for (index, job) in plan.jobs.iter().enumerate() {
        let stream = root.child(index as u64);
        let started = Instant::now();
        let summary = match job {
            Job::QuasiOrth { kernel, n, delta } => {
                let est = estimate_pairwise_quasi_orth(*kernel, *n, *delta, plan.trials, &stream)?;
                let a = est.aggregate;
                let mut row = vec![kernel.to_string(), n.to_string(), num(*delta)];
                row.extend(aggregate_cells(&a));
                table.push(row)?;
                format!(
                    "kernel={kernel} n={n} delta={delta} frequency={}",
                    a.frequency
                )
            }
            Job::Separability {
                kernel,
                n,
                set_size,
            } => {
                let a = estimate_separability(*kernel, *n, *set_size, plan.trials, &stream)?;
                let mut row = vec![kernel.to_string(), n.to_string(), set_size.to_string()];
                row.extend(aggregate_cells(&a));
                table.push(row)?;
                format!(
                    "kernel={kernel} n={n} set_size={set_size} frequency={}",
                    a.frequency
                )
            }
            Job::Verify {
                scenario,
                k,
                delta,
                epsilon,
            } => {
                let checks = if plan.kind == ExperimentKind::VerifyLhd {
                    verify_lhd(scenario, *k, *delta, *epsilon, plan.trials, &stream)?
                } else {
                    verify_quasi_orth(scenario, *k, *delta, *epsilon, plan.trials, &stream)?
                };
                let n = scenario.n();
                for c in &checks {
                    all_pass &= c.pass;
                    table.push(verify_row(n, *k, *delta, Some(*epsilon), c))?;
                }
                describe_checks(&format!("n={n} k={k} delta={delta}"), &checks)
            }
            Job::FewShot {
                scenario,
                k,
                delta,
                theta,
                eval_draws,
            } => {
                let n = scenario.n();
                let v = verify_fewshot(
                    scenario,
                    *k,
                    *delta,
                    theta,
                    *eval_draws,
                    plan.trials,
                    &stream,
                )
                .with_context(|| format!("{name} n={n} k={k} delta={delta}"))?;
                if v.flagged {
                    eprintln!(
                        "kfs: {name} n={n} k={k} delta={delta}: {} of {} support draws were infeasible",
                        v.infeasible_trials, plan.trials.trials
                    );
                }
                let checks = [v.p_n, v.p_e];
                for c in &checks {
                    all_pass &= c.pass;
                    table.push(verify_row(n, *k, *delta, None, c))?;
                }
                describe_checks(
                    &format!("n={n} k={k} delta={delta} theta~{}", v.mean_theta),
                    &checks,
                )
            }
            Job::Beta {
                kernel,
                n,
                region,
                center,
            } => {
                let config = plan.beta.as_ref().expect("beta config is planned");
                let est = estimate_beta(*kernel, *n, region, center, config, &stream)?;
                for (radius, volume) in est.radii.iter().zip(&est.volumes) {
                    table.push(vec![
                        kernel.to_string(),
                        n.to_string(),
                        num(*radius),
                        num(*volume),
                        num(est.alpha_hat),
                        num(est.ci_lo),
                        num(est.ci_hi),
                    ])?;
                }
                format!("kernel={kernel} n={n} beta_hat={}", est.alpha_hat)
            }
        };
        eprintln!(
            "kfs: {name} {summary} ({:.2}s)",
            started.elapsed().as_secs_f64()
        );
    }
    Ok((table, all_pass))
}

fn describe_checks(prefix: &str, checks: &[EventCheck]) -> String {
    let parts: Vec<String> = checks
        .iter()
        .map(|c| {
            format!(
                "{}={} bound={} {}",
                c.event,
                c.aggregate.frequency,
                c.bound().clamped,
                if c.pass { "ok" } else { "FAIL" }
            )
        })
        .collect();
    format!("{prefix} {}", parts.join(" "))
}

fn manifest(
    plan: &Plan,
    s: &Settings,
    csv_path: &Path,
    rows: usize,
    wall: f64,
    all_pass: bool,
) -> Result<Vec<u8>> {
    let config: serde_json::Map<String, serde_json::Value> = s
        .keys()
        .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
        .collect();
    let doc = json!({
        "command": "experiment",
        "experiment": plan.kind.name(),
        "config": config,
        "seed": plan.seed,
        "workers": plan.workers,
        "trials": plan.trials.trials,
        "versions": {
            "kfs-cli": env!("CARGO_PKG_VERSION"),
            "kfs-core": kfs_core::VERSION,
        },
        "wall_time_secs": wall,
        "csv": csv_path.file_name().map(|f| f.to_string_lossy().into_owned()),
        "rows": rows,
        "bounds_hold": all_pass,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub(crate) fn run(kind: ExperimentKind, s: &Settings) -> Result<Outcome> {
    let plan = plan(kind, s)?;
    let out: PathBuf = s
        .get("out")?
        .ok_or_else(|| anyhow!("experiments need --out <path> for the CSV and its manifest"))?;
    let manifest_path = output::manifest_path(&out);
    let started = Instant::now();
    let (table, all_pass) = execute(&plan)?;
    let rows = table.rows();
    let csv = table.into_bytes()?;
    let manifest = manifest(
        &plan,
        s,
        &out,
        rows,
        started.elapsed().as_secs_f64(),
        all_pass,
    )?;
    output::commit(&[(&out, &csv), (&manifest_path, &manifest)])?;
    if all_pass {
        Ok(Outcome::Success)
    } else {
        eprintln!("kfs: {}: at least one bound check failed", kind.name());
        Ok(Outcome::SoundnessFailure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_names_match_display_names() {
        for kind in ExperimentKind::value_variants() {
            let v = kind.to_possible_value().unwrap();
            assert_eq!(v.get_name(), kind.name());
        }
    }

    #[test]
    fn stream_ids_are_distinct() {
        let mut ids: Vec<u64> = ExperimentKind::value_variants()
            .iter()
            .map(|k| k.stream_id())
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), ExperimentKind::value_variants().len());
    }

    #[test]
    fn theta_policies_parse() {
        assert_eq!(parse_theta("mid").unwrap(), ThetaPolicy::MidRange);
        assert_eq!(parse_theta("opt").unwrap(), ThetaPolicy::Optimize(None));
        assert_eq!(parse_theta("0.25").unwrap(), ThetaPolicy::Fixed(0.25));
        assert!(parse_theta("high").is_err());
    }

    #[test]
    fn planning_rejects_bad_configs() {
        let cfg = |t: &str| Settings::from_toml_str(t).unwrap();
        let bad = [
            (ExperimentKind::QuasiOrth, "seed = 1\nn = 3\ntrials = 0\n"),
            (ExperimentKind::QuasiOrth, "n = 3\n"),
            (ExperimentKind::QuasiOrth, "seed = 1\n"),
            (ExperimentKind::QuasiOrth, "seed = 1\nn = 3\nset_size = 4\n"),
            (ExperimentKind::Separability, "seed = 1\nn = 0\n"),
            (
                ExperimentKind::VerifyLhd,
                "seed = 1\nn = 3\nkernel = \"gauss:1\"\n",
            ),
            (
                ExperimentKind::VerifyQuasiOrth,
                "seed = 1\nn = 3\ndelta = 1.5\n",
            ),
            (
                ExperimentKind::VerifyFewshot,
                "seed = 1\nn = 3\ntheta = \"x\"\n",
            ),
            (
                ExperimentKind::VerifyFewshot,
                "seed = 1\nn = 3\neval_draws = 0\n",
            ),
            (
                ExperimentKind::EstimateBeta,
                "seed = 1\nn = 3\nradii = [0.5]\n",
            ),
        ];
        for (kind, text) in bad {
            assert!(plan(kind, &cfg(text)).is_err(), "{text}");
        }
        let ok = plan(
            ExperimentKind::QuasiOrth,
            &cfg("seed = 1\nn = [2, 3]\nkernel = \"linear,gauss:1\"\ndelta = [0.1, 0.2]\n"),
        )
        .unwrap();
        assert_eq!(ok.jobs.len(), 8);
    }
}
