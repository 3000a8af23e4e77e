//! Aggregates over trial records. Everything here is a pure function of the
//! records, so a summary can be rebuilt from `trials.jsonl` alone.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::trial::{TrialRecord, TrialResult};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub count: usize,
    pub total: usize,
    pub frequency: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

impl Frequency {
    pub fn new(count: usize, total: usize) -> Self {
        let (low, high) = wilson(count, total);
        Self {
            count,
            total,
            frequency: if total == 0 { 0.0 } else { count as f64 / total as f64 },
            wilson_low: low,
            wilson_high: high,
        }
    }

    fn of<I>(flags: I) -> Self
    where
        I: IntoIterator<Item = bool>,
    {
        let (mut c, mut t) = (0, 0);
        for f in flags {
            t += 1;
            c += f as usize;
        }
        Self::new(c, t)
    }
}

/// Wilson score interval at 95%; `(0, 1)` when there are no trials.
pub fn wilson(count: usize, total: usize) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = count as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub count: usize,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    pub mean: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantiles(values: impl IntoIterator<Item = f64>) -> Option<Quantiles> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(Quantiles {
        count: v.len(),
        min: v[0],
        q05: quantile(&v, 0.05),
        q25: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q75: quantile(&v, 0.75),
        q95: quantile(&v, 0.95),
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub trials: usize,
    pub bound_violation: Frequency,
    pub bound_violation_analytic: Frequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distributions {
    pub prediction_error: Option<Quantiles>,
    pub delta_empirical: Option<Quantiles>,
    pub delta_analytic: Option<Quantiles>,
    pub norm_a: Option<Quantiles>,
    pub norm_b: Option<Quantiles>,
    pub norm_a_star: Option<Quantiles>,
    pub norm_b_star: Option<Quantiles>,
    pub solver_iterations: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub master_seed: u64,
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    /// Failure frequency of events I–IV over completed trials.
    pub event_failure: [Frequency; 4],
    /// With `δ` measured per trial.
    pub bound_violation: Frequency,
    /// With the analytic `δ`, over trials where it is defined.
    pub bound_violation_analytic: Frequency,
    /// Satisfaction frequency of assumptions 1–10.
    pub assumption_held: Vec<Frequency>,
    pub all_assumptions_hold: Stratum,
    pub some_assumption_fails: Stratum,
    pub chain_violations: usize,
    pub max_step1_residual: f64,
    pub distributions: Distributions,
    pub config: ExperimentConfig,
}

pub fn summarize(config: &ExperimentConfig, records: &[TrialRecord]) -> ExperimentSummary {
    let done: Vec<&TrialResult> = records.iter().filter_map(|r| r.result.as_ref()).collect();
    let event_failure =
        std::array::from_fn(|i| Frequency::of(done.iter().map(|r| !r.conditions.event_flags[i])));
    let violation = |rs: &[&TrialResult]| Frequency::of(rs.iter().filter_map(|r| r.bound_holds.map(|h| !h)));
    let violation_analytic =
        |rs: &[&TrialResult]| Frequency::of(rs.iter().filter_map(|r| r.bound_holds_analytic.map(|h| !h)));
    let n_assumptions = done.first().map_or(0, |r| r.assumption_flags.len());
    let assumption_held = (0..n_assumptions)
        .map(|i| Frequency::of(done.iter().map(|r| r.assumption_flags[i])))
        .collect();
    let (all_hold, some_fail): (Vec<&TrialResult>, Vec<&TrialResult>) =
        done.iter().partition(|r| r.assumption_flags.iter().all(|&f| f));
    let stratum = |rs: &[&TrialResult]| Stratum {
        trials: rs.len(),
        bound_violation: violation(rs),
        bound_violation_analytic: violation_analytic(rs),
    };
    let q = |f: &dyn Fn(&TrialResult) -> Option<f64>| quantiles(done.iter().filter_map(|r| f(r)));

    ExperimentSummary {
        master_seed: config.experiment.master_seed,
        trials: records.len(),
        completed: done.len(),
        failed: records.len() - done.len(),
        event_failure,
        bound_violation: violation(&done),
        bound_violation_analytic: violation_analytic(&done),
        assumption_held,
        all_assumptions_hold: stratum(&all_hold),
        some_assumption_fails: stratum(&some_fail),
        chain_violations: done.iter().filter(|r| !r.chain_holds).count(),
        max_step1_residual: done.iter().map(|r| r.step1_residual).fold(0.0, f64::max),
        distributions: Distributions {
            prediction_error: q(&|r| Some(r.prediction_error)),
            delta_empirical: q(&|r| r.delta_empirical),
            delta_analytic: q(&|r| r.delta_analytic),
            norm_a: q(&|r| Some(r.conditions.decomposition.a)),
            norm_b: q(&|r| Some(r.conditions.decomposition.b)),
            norm_a_star: q(&|r| Some(r.conditions.decomposition.a_star)),
            norm_b_star: q(&|r| Some(r.conditions.decomposition.b_star)),
            solver_iterations: q(&|r| Some(r.solver.iterations as f64)),
        },
        config: config.clone(),
    }
}
