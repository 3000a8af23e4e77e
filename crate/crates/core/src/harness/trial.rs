//! One Monte Carlo trial: draw, solve, measure.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{CenterSource, ExperimentConfig};
use crate::encoding::EncodedMatrix;
use crate::error::{Error, Result};
use crate::lasso::{self, LassoSolution};
use crate::linalg::norm2;
use crate::mixture::{gaussian_centers, orthonormal_centers, sample_design, CenterMatrix, DesignInstance};
use crate::proxy::{self, GroundTruth, ProxyVector};
use crate::rng::{self, tag};
use crate::theory::{
    check_assumptions, check_events, compute_constants, AssumptionReport, ConditionReport, ProblemSize,
    TheoremConstants, TheoremParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub objective: f64,
    pub kkt_infinity: f64,
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub lambda: f64,
    pub s: usize,
    pub s_star: usize,
    /// `½‖X(β̂ − β)‖₂²`.
    pub prediction_error: f64,
    pub proxy_discrepancy: f64,
    /// `‖Σ_T β_j centers_{k_j}‖₂`.
    pub center_energy: f64,
    /// `‖Xβ‖₂`.
    pub signal_energy: f64,
    /// `proxy_discrepancy / center_energy`; absent when the centers cancel.
    pub delta_empirical: Option<f64>,
    pub bound_rhs: Option<f64>,
    pub bound_holds: Option<bool>,
    /// Analytic `δ` lower bound; absent when the constants are undefined.
    pub delta_analytic: Option<f64>,
    pub bound_rhs_analytic: Option<f64>,
    pub bound_holds_analytic: Option<bool>,
    /// `proxy_discrepancy ≤ ‖A‖ + ‖B‖ + ‖A*‖ + ‖B*‖`.
    pub chain_holds: bool,
    /// `|‖(A+B) − (A*+B*)‖ − proxy_discrepancy|`.
    pub step1_residual: f64,
    pub conditions: ConditionReport,
    pub assumption_flags: Vec<bool>,
    pub assumption_margins: Vec<Option<f64>>,
    pub solver: SolverDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub seed: u64,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<TrialResult>,
}

impl TrialRecord {
    pub fn ok(&self) -> bool {
        self.result.is_some()
    }
}

/// Everything a trial needs besides its index, resolved once per experiment.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub config: ExperimentConfig,
    pub params: TheoremParams,
    /// Shared centers unless they are redrawn per trial.
    pub centers: Option<Arc<CenterMatrix>>,
}

impl TrialContext {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let params = config.theorem_params()?;
        let centers = match (config.centers.source, config.centers.redraw_per_trial) {
            (CenterSource::File, _) => Some(Arc::new(load_centers(config)?)),
            (_, false) => Some(Arc::new(draw_centers(
                config,
                rng::derive_seed(config.experiment.master_seed, tag::CENTERS),
            )?)),
            (_, true) => None,
        };
        Ok(Self {
            config: config.clone(),
            params,
            centers,
        })
    }

    pub fn trial_seed(&self, index: u64) -> u64 {
        rng::derive_seed(self.config.experiment.master_seed, index)
    }

    pub fn centers_for(&self, trial_seed: u64) -> Result<Arc<CenterMatrix>> {
        match &self.centers {
            Some(c) => Ok(c.clone()),
            None => Ok(Arc::new(draw_centers(
                &self.config,
                rng::derive_seed(trial_seed, tag::CENTERS),
            )?)),
        }
    }
}

fn draw_centers(config: &ExperimentConfig, seed: u64) -> Result<CenterMatrix> {
    let mut r = rng::stream(seed);
    let (n, k) = (config.mixture.n, config.mixture.k);
    match config.centers.source {
        CenterSource::Gaussian => gaussian_centers(n, k, &mut r),
        CenterSource::Orthonormal => orthonormal_centers(n, k, &mut r),
        CenterSource::File => load_centers(config),
    }
}

fn load_centers(config: &ExperimentConfig) -> Result<CenterMatrix> {
    let path = config
        .centers
        .path
        .as_ref()
        .ok_or_else(|| Error::Config("centers.path is not set".into()))?;
    let io = |e: &dyn std::fmt::Display| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(&e))?;
    let enc: EncodedMatrix = serde_json::from_str(&text).map_err(|e| io(&e))?;
    let m = enc.decode()?;
    if m.rows() != config.mixture.n || m.cols() != config.mixture.k {
        return Err(Error::Dimension(format!(
            "center file is {}x{}, config wants {}x{}",
            m.rows(),
            m.cols(),
            config.mixture.n,
            config.mixture.k
        )));
    }
    CenterMatrix::new(m)
}

/// The random objects of one trial.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub centers: Arc<CenterMatrix>,
    pub design: DesignInstance,
    pub truth: GroundTruth,
    pub proxy: ProxyVector,
}

pub fn draw_trial(ctx: &TrialContext, seed: u64) -> Result<TrialDraw> {
    let cfg = &ctx.config;
    let centers = ctx.centers_for(seed)?;
    let design = sample_design(&cfg.mixture, &centers, rng::derive_seed(seed, tag::DESIGN))?;
    let mut r = rng::stream(rng::derive_seed(seed, tag::TRUTH));
    let truth = proxy::sample_ground_truth(
        &design,
        cfg.truth.s,
        cfg.truth.support,
        cfg.truth.magnitude,
        cfg.truth.sigma,
        &mut r,
    )?;
    let reps = proxy::best_representatives(&design, &centers)?;
    let proxy = proxy::build_beta_star(&truth, &design, &reps)?;
    Ok(TrialDraw {
        centers,
        design,
        truth,
        proxy,
    })
}

pub fn trial_lambda(ctx: &TrialContext, draw: &TrialDraw) -> Result<f64> {
    match ctx.config.solver.lambda {
        Some(l) => Ok(l),
        None => lasso::default_lambda(draw.truth.sigma, ctx.params.alpha, draw.design.p() as f64),
    }
}

pub fn problem_size(draw: &TrialDraw) -> ProblemSize {
    ProblemSize {
        n: draw.design.n(),
        p: draw.design.p(),
        s: draw.truth.s(),
        s_star: draw.proxy.s_star(),
        sigma_frak: draw.design.sigma_frak,
    }
}

/// Assumption report and event measurements for one drawn trial.
pub fn verify_draw(ctx: &TrialContext, draw: &TrialDraw, lambda: f64) -> (AssumptionReport, ConditionReport) {
    let a = check_assumptions(&ctx.params, &draw.centers, &draw.design, &draw.truth, &draw.proxy);
    let e = check_events(&draw.centers, &draw.design, &draw.truth, &draw.proxy, lambda, &ctx.params);
    (a, e)
}

pub fn evaluate(ctx: &TrialContext, draw: &TrialDraw) -> Result<TrialResult> {
    let lambda = trial_lambda(ctx, draw)?;
    let x = &draw.design.x;
    let truth = &draw.truth;
    let sol: LassoSolution = lasso::solve(x, &truth.y, lambda, &ctx.config.solver_options())?;

    let prediction_error = lasso::prediction_error(x, &truth.beta, &sol.beta_hat);
    let disc = proxy::proxy_discrepancy(x, &truth.beta, &draw.proxy.beta_star);
    let center_energy = norm2(&proxy::center_combination(&draw.centers, &draw.design, truth));
    let signal_energy = norm2(&x.matvec(&truth.beta));
    let s_star = draw.proxy.s_star();
    let r_star = crate::theory::constants::r_star_coeff(ctx.params.r);

    let delta_empirical = (center_energy > 0.0).then(|| disc / center_energy);
    let bound_rhs =
        delta_empirical.map(|d| crate::theory::theorem_rhs(s_star, r_star, lambda, d, center_energy, signal_energy));
    let constants: Option<TheoremConstants> = compute_constants(&problem_size(draw), &ctx.params).ok();
    let delta_analytic = constants.map(|k| k.delta_lower);
    let bound_rhs_analytic = constants.map(|k| k.bound_rhs(s_star, lambda, k.delta_lower, center_energy, signal_energy));

    let (assumptions, conditions) = verify_draw(ctx, draw, lambda);
    let d = conditions.decomposition;
    let chain_holds = disc <= d.a + d.b + d.a_star + d.b_star;

    Ok(TrialResult {
        lambda,
        s: truth.s(),
        s_star,
        prediction_error,
        proxy_discrepancy: disc,
        center_energy,
        signal_energy,
        delta_empirical,
        bound_rhs,
        bound_holds: bound_rhs.map(|r| prediction_error <= r),
        delta_analytic,
        bound_rhs_analytic,
        bound_holds_analytic: bound_rhs_analytic.map(|r| prediction_error <= r),
        chain_holds,
        step1_residual: (d.combined - disc).abs(),
        assumption_flags: assumptions.flags(),
        assumption_margins: assumptions.checks.iter().map(|c| c.margin).collect(),
        conditions,
        solver: SolverDiagnostics {
            iterations: sol.iterations,
            objective: sol.objective,
            kkt_infinity: sol.kkt_infinity,
            duality_gap: sol.duality_gap,
        },
    })
}

/// Runs trial `index`; any error becomes a failed record.
pub fn run_trial(ctx: &TrialContext, index: u64) -> TrialRecord {
    let seed = ctx.trial_seed(index);
    let outcome = draw_trial(ctx, seed).and_then(|draw| evaluate(ctx, &draw));
    let (result, error) = match outcome {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    TrialRecord {
        trial_index: index,
        seed,
        master_seed: ctx.config.experiment.master_seed,
        error,
        result,
    }
}
