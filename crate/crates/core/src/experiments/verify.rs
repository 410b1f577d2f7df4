//! Monte Carlo checks of the closed-form bounds in the identity-map regime,
//! where `A = C = C* = 1` and `beta = n` hold exactly for uniform balls.

use serde::{Deserialize, Serialize};

use super::{run_trials, Aggregate, RngStream, SyntheticScenario, TrialPlan};
use crate::bounds::{
    lhd_l, lhd_two_sided_prob, lhd_u, lhd_upper_prob, p_e_bound_saturating, p_n_bound,
    quasi_orth_bound, quasi_orth_norm_bound, BoundParams, BoundValue, GridSpec, PnMode,
};
use crate::error::{invalid, Error, Result};
use crate::fewshot::{BoundContext, DeltaPolicy, FewShotModel, ThetaPolicy};
use crate::kernel::{Kernel, SupportSample};
use crate::sum::{self, NeumaierSum};

/// Runs with at least this many trials are held to the soundness criterion.
pub const MIN_SOUNDNESS_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCheck {
    pub event: String,
    pub aggregate: Aggregate,
    /// Empirical frequency within three Wilson half-widths of the bound or above it.
    pub pass: bool,
}

impl EventCheck {
    fn new(event: &str, aggregate: Aggregate) -> Self {
        Self {
            event: event.to_string(),
            pass: aggregate.bound_holds(),
            aggregate,
        }
    }

    pub fn bound(&self) -> BoundValue {
        self.aggregate
            .bound
            .expect("verification aggregates carry a bound")
    }
}

fn draw_centered(
    scenario: &SyntheticScenario,
    center: &[f64],
    k: usize,
    rng: &mut impl rand::Rng,
) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            let mut x = scenario.y_class().draw(scenario.n(), rng);
            for (v, c) in x.iter_mut().zip(center) {
                *v -= c;
            }
            x
        })
        .collect()
}

/// Events `A1` (all centred pairwise inner products at most `delta r_Y` in
/// magnitude) and `A1 and A2` (additionally every centred norm at least
/// `(1 - epsilon) r_Y`) over `k`-point samples from the Y ball.
pub fn verify_quasi_orth(
    scenario: &SyntheticScenario,
    k: usize,
    delta: f64,
    epsilon: f64,
    plan: TrialPlan,
    stream: &RngStream,
) -> Result<[EventCheck; 2]> {
    let (center, r) = scenario.identity_y_ball()?;
    let n = scenario.n();
    let params = BoundParams::identity_ball(n, r, k, delta, epsilon)?;
    let outcomes = run_trials(plan.trials, plan.workers, |t| {
        let mut rng = stream.trial_rng(t);
        let v = draw_centered(scenario, center, k, &mut rng);
        let mut a1 = true;
        'pairs: for i in 0..k {
            for j in (i + 1)..k {
                if sum::dot(&v[i], &v[j]).abs() > delta * r {
                    a1 = false;
                    break 'pairs;
                }
            }
        }
        let a2 = v
            .iter()
            .all(|x| sum::dot(x, x).sqrt() >= (1.0 - epsilon) * r);
        (a1, a1 && a2)
    })?;
    let a1 = outcomes.iter().filter(|o| o.0).count() as u64;
    let both = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok([
        EventCheck::new(
            "A1",
            Aggregate::new(a1, plan.trials).with_bound(quasi_orth_bound(&params, n)?),
        ),
        EventCheck::new(
            "A1_and_A2",
            Aggregate::new(both, plan.trials).with_bound(quasi_orth_norm_bound(&params, n)?),
        ),
    ])
}

/// Events `|mean - c_Y|^2 <= U` and `L <= |mean - c_Y|^2 <= U` for the
/// empirical mean of `k` draws.
pub fn verify_lhd(
    scenario: &SyntheticScenario,
    k: usize,
    delta: f64,
    epsilon: f64,
    plan: TrialPlan,
    stream: &RngStream,
) -> Result<[EventCheck; 2]> {
    let (center, r) = scenario.identity_y_ball()?;
    let n = scenario.n();
    let params = BoundParams::identity_ball(n, r, k, delta, epsilon)?;
    let upper = lhd_u(&params);
    let lower = lhd_l(&params);
    let outcomes = run_trials(plan.trials, plan.workers, |t| {
        let mut rng = stream.trial_rng(t);
        let v = draw_centered(scenario, center, k, &mut rng);
        let mean: Vec<f64> = (0..n)
            .map(|i| sum::sum(v.iter().map(|x| x[i])) / k as f64)
            .collect();
        let s = sum::dot(&mean, &mean);
        (s <= upper, s <= upper && s >= lower)
    })?;
    let up = outcomes.iter().filter(|o| o.0).count() as u64;
    let two = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok([
        EventCheck::new(
            "upper",
            Aggregate::new(up, plan.trials).with_bound(lhd_upper_prob(&params, n)?),
        ),
        EventCheck::new(
            "two_sided",
            Aggregate::new(two, plan.trials).with_bound(lhd_two_sided_prob(&params, n)?),
        ),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotVerification {
    /// New-class draws labelled as the new class.
    pub p_n: EventCheck,
    /// Base-class draws left to the base predictor.
    pub p_e: EventCheck,
    pub feasible_trials: u64,
    pub infeasible_trials: u64,
    /// More than 1% of support draws admitted no positive `Delta`.
    pub flagged: bool,
    pub mean_delta_cap: f64,
    pub mean_theta: f64,
}

enum FitOutcome {
    Feasible {
        accepted_new: u64,
        kept_base: u64,
        p_n: f64,
        p_e: f64,
        delta_cap: f64,
        theta: f64,
    },
    Infeasible(Error),
}

/// End-to-end run of the few-shot rule: per trial a support sample of size
/// `k` is drawn from the Y ball and fitted at fixed `delta`, then
/// `eval_draws` fresh points from each class are classified. Bounds use the
/// normalised acceptance bound with identity-map constants and are averaged
/// over trials.
pub fn verify_fewshot(
    scenario: &SyntheticScenario,
    k: usize,
    delta: f64,
    theta_policy: &ThetaPolicy,
    eval_draws: u64,
    plan: TrialPlan,
    stream: &RngStream,
) -> Result<FewShotVerification> {
    let (_, r_y) = scenario.identity_y_ball()?;
    if scenario.x_center().iter().any(|&c| c != 0.0) {
        return Err(Error::UnsupportedRegime(
            "base class must be centred at 0".into(),
        ));
    }
    if eval_draws == 0 {
        return Err(invalid("eval_draws", "must be >= 1"));
    }
    let n = scenario.n();
    let r_x = scenario.x_radius();
    let y_params = BoundParams::identity_ball(n, r_y, k, delta, 0.1)?;
    let x_params = BoundParams::identity_ball(n, r_x, k, delta, 0.1)?;
    let theta_policy = match theta_policy {
        ThetaPolicy::Optimize(None) => ThetaPolicy::Optimize(Some(BoundContext {
            y: y_params.clone(),
            x: x_params.clone(),
            n,
            grid: GridSpec::default(),
            mode: PnMode::Normalized,
        })),
        other => other.clone(),
    };
    let x_region = scenario.x_region();
    let outcomes = run_trials(plan.trials, plan.workers, |t| -> Result<FitOutcome> {
        let mut rng = stream.trial_rng(t);
        let support: Vec<Vec<f64>> = (0..k)
            .map(|_| scenario.y_class().draw(n, &mut rng))
            .collect();
        let z = SupportSample::new(Kernel::Linear, support, "new")?;
        let model = match FewShotModel::fit(z, r_y, &DeltaPolicy::Fixed(delta), &theta_policy) {
            Ok(m) => m,
            Err(e @ Error::Infeasible { .. }) => return Ok(FitOutcome::Infeasible(e)),
            Err(e) => return Err(e),
        };
        let mut buf = vec![0.0; n];
        let mut accepted_new = 0;
        for _ in 0..eval_draws {
            scenario.y_class().fill(&mut buf, &mut rng);
            accepted_new += model.accepts(&buf)? as u64;
        }
        let mut kept_base = 0;
        for _ in 0..eval_draws {
            x_region.fill(&mut buf, &mut rng);
            kept_base += !model.accepts(&buf)? as u64;
        }
        let p_n = p_n_bound(
            &y_params,
            model.delta_cap(),
            model.theta(),
            n,
            PnMode::Normalized,
        )?;
        let p_e = p_e_bound_saturating(&x_params, model.theta(), n)?;
        Ok(FitOutcome::Feasible {
            accepted_new,
            kept_base,
            p_n: p_n.clamped,
            p_e: p_e.clamped,
            delta_cap: model.delta_cap(),
            theta: model.theta(),
        })
    })?;

    let mut feasible = 0u64;
    let mut infeasible = 0u64;
    let mut first_infeasible = None;
    let (mut acc_new, mut kept) = (0u64, 0u64);
    let mut sums = [NeumaierSum::new(); 4];
    for o in outcomes {
        match o? {
            FitOutcome::Feasible {
                accepted_new,
                kept_base,
                p_n,
                p_e,
                delta_cap,
                theta,
            } => {
                feasible += 1;
                acc_new += accepted_new;
                kept += kept_base;
                for (s, v) in sums.iter_mut().zip([p_n, p_e, delta_cap, theta]) {
                    s.add(v);
                }
            }
            FitOutcome::Infeasible(e) => {
                infeasible += 1;
                first_infeasible.get_or_insert(e);
            }
        }
    }
    if feasible == 0 {
        return Err(first_infeasible.expect("at least one trial ran"));
    }
    let f = feasible as f64;
    let draws = feasible * eval_draws;
    Ok(FewShotVerification {
        p_n: EventCheck::new(
            "p_n",
            Aggregate::new(acc_new, draws).with_bound(BoundValue::from_raw(sums[0].value() / f)),
        ),
        p_e: EventCheck::new(
            "p_e",
            Aggregate::new(kept, draws).with_bound(BoundValue::from_raw(sums[1].value() / f)),
        ),
        feasible_trials: feasible,
        infeasible_trials: infeasible,
        flagged: infeasible * 100 > plan.trials,
        mean_delta_cap: sums[2].value() / f,
        mean_theta: sums[3].value() / f,
    })
}
