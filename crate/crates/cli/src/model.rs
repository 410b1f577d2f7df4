//! `fit` and `classify`. The base predictor is a constant-label stub: every
//! vector the few-shot model rejects gets `base_label`.

use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use kfs_core::bounds::BoundParams;
use kfs_core::fewshot::{BoundContext, ConstantPredictor, DeltaPolicy, FewShotModel, ThetaPolicy};
use kfs_core::{Kernel, SupportSample};

use crate::bounds::{grid, pn_mode, profile};
use crate::output::{self, Table};
use crate::{vectors, Outcome, Settings};

/// Placeholder `delta` for the context's parameter validation; the policies
/// substitute their own value.
const CONTEXT_DELTA: f64 = 0.5;

fn context(s: &Settings, r_y: f64, k: usize, n: usize) -> Result<BoundContext> {
    let a: f64 = s.get_or("a", 1.0)?;
    let c_star: f64 = s.get_or("c_star", 1.0)?;
    let r_x: f64 = s.get_or("r_x", 1.0)?;
    let profile = profile(s, n)?;
    let build = |r: f64| {
        BoundParams::builder(r, k, CONTEXT_DELTA, profile.clone())
            .growth(a)
            .neighborhood_constant(c_star)
            .build()
    };
    Ok(BoundContext {
        y: build(r_y)?,
        x: build(r_x)?,
        n,
        grid: grid(s)?,
        mode: pn_mode(s)?,
    })
}

pub(crate) fn fit(s: &Settings) -> Result<Outcome> {
    let support_path: PathBuf = s.require("support")?;
    let kernel: Kernel = s.get_or("kernel", Kernel::Linear)?;
    let r_y: f64 = s.require("r_y")?;
    let delta_raw: String = s.require("delta")?;
    let theta_raw: String = s.get_or("theta", "mid".to_string())?;
    let label: String = s.get_or("label", "new".to_string())?;
    let out: Option<PathBuf> = s.get("out")?;

    let points = vectors::read(&support_path)?;
    let (k, n) = (points.len(), points[0].len());
    let sample = SupportSample::new(kernel, points, label)?;
    let needs_context = delta_raw.trim() == "opt" || theta_raw.trim() == "opt";
    let ctx = if needs_context {
        Some(context(s, r_y, k, n)?)
    } else {
        None
    };
    let delta_policy = match delta_raw.trim() {
        "opt" => DeltaPolicy::Optimize(ctx.clone().expect("context built for opt")),
        v => DeltaPolicy::Fixed(
            v.parse()
                .map_err(|_| anyhow!("`delta` must be `opt` or a number, got `{v}`"))?,
        ),
    };
    let theta_policy = match theta_raw.trim() {
        "mid" => ThetaPolicy::MidRange,
        "opt" => ThetaPolicy::Optimize(ctx),
        v => ThetaPolicy::Fixed(
            v.parse()
                .map_err(|_| anyhow!("`theta` must be `mid`, `opt` or a number, got `{v}`"))?,
        ),
    };
    let model = FewShotModel::fit(sample, r_y, &delta_policy, &theta_policy)?;
    eprintln!(
        "kfs: fit k={k} n={n} D={} delta={} Delta={} theta={}",
        model.d(),
        model.delta(),
        model.delta_cap(),
        model.theta()
    );
    let mut json = model.to_json()?.into_bytes();
    json.push(b'\n');
    output::emit(out.as_deref(), &json)?;
    Ok(Outcome::Success)
}

pub(crate) fn classify(s: &Settings) -> Result<Outcome> {
    let model_path: PathBuf = s.require("model")?;
    let input_path: PathBuf = s.require("input")?;
    let base_label: String = s.get_or("base_label", "base".to_string())?;
    let out: Option<PathBuf> = s.get("out")?;

    let text = std::fs::read_to_string(&model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;
    let model = FewShotModel::from_json(&text)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let inputs = vectors::read(&input_path)?;
    let n = model.support().dim();
    if inputs[0].len() != n {
        return Err(anyhow!(
            "input vectors have {} components but the model expects {n}",
            inputs[0].len()
        ));
    }

    let base = ConstantPredictor(base_label);
    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header)?;
    for x in &inputs {
        let mut row: Vec<String> = x.iter().map(|v| output::num(*v)).collect();
        row.push(model.classify(x, &base)?);
        table.push(row)?;
    }
    output::emit(out.as_deref(), &table.into_bytes()?)?;
    Ok(Outcome::Success)
}
