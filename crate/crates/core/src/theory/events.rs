//! The four high-probability events of the proof, measured on one trial,
//! and the `A, B, A*, B*` decomposition of the design discrepancy.

use serde::{Deserialize, Serialize};

use super::constants::r_star_coeff;
use super::TheoremParams;
use crate::error::{Error, Result};
use crate::linalg::{self, norm2, norm_inf, Matrix, SPECTRAL_MAX_ITER, SPECTRAL_TOL};
use crate::mixture::{CenterMatrix, DesignInstance};
use crate::proxy::{GroundTruth, ProxyVector};

/// Off-support compatibility split into its noise and sign parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compatibility {
    pub noise_part: f64,
    pub sign_part: f64,
    /// `noise_part + λ·sign_part`.
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionNorms {
    pub a: f64,
    pub b: f64,
    pub a_star: f64,
    pub b_star: f64,
    /// `‖(A + B) − (A* + B*)‖`, equal to `‖Xβ − Xβ*‖` up to rounding.
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Event I: `‖C_Kᵗ C_K − I‖`.
    pub center_gram_dev: f64,
    /// Event II: `‖X_{T*}ᵗ X_{T*} − I‖`.
    pub design_gram_dev: f64,
    /// Event III: `‖Xᵗ z‖∞`.
    pub noise_corr_inf: f64,
    /// Event IV; `None` when `X_{T*}` is rank deficient.
    pub compatibility: Option<Compatibility>,
    pub thresholds: [f64; 4],
    pub event_flags: [bool; 4],
    /// `1/σ_min(C_K)²`, what `ρ_C` stands in for.
    pub rho_measured: f64,
    pub decomposition: DecompositionNorms,
}

impl ConditionReport {
    pub fn all_events(&self) -> bool {
        self.event_flags.iter().all(|&f| f)
    }
}

/// Operator norm that falls back to the last power-iteration estimate.
fn gram_dev(m: &Matrix) -> f64 {
    match linalg::gram_deviation(m) {
        Ok(v) => v,
        Err(Error::SpectralNonConvergence { estimate, .. }) => estimate,
        Err(_) => f64::NAN,
    }
}

fn rho(active_centers: &Matrix) -> f64 {
    match linalg::spectral_norm(active_centers, SPECTRAL_TOL, SPECTRAL_MAX_ITER) {
        Ok(rep) if rep.min_singular > 0.0 => rep.min_singular.powi(-2),
        Ok(_) => f64::INFINITY,
        Err(_) => f64::NAN,
    }
}

/// Largest off-support inner product of `X` with `X_{T*} (X_{T*}ᵗX_{T*})⁻¹ b`.
fn off_support_reach(x: &Matrix, xt: &Matrix, gram: &Matrix, support: &[usize], b: &[f64]) -> Result<f64> {
    let u = linalg::solve_gram_system(gram, b)?;
    let w = xt.matvec(&u);
    let corr = x.tr_matvec(&w);
    let mut on = vec![false; x.cols()];
    for &j in support {
        on[j] = true;
    }
    Ok(corr
        .iter()
        .zip(&on)
        .filter(|(_, &o)| !o)
        .fold(0.0, |m, (c, _)| m.max(c.abs())))
}

pub fn compatibility(
    inst: &DesignInstance,
    truth: &GroundTruth,
    proxy: &ProxyVector,
    lambda: f64,
) -> Option<Compatibility> {
    let support = &proxy.support_t_star;
    let xt = inst.x.select_columns(support);
    let gram = xt.gram();
    let noise_proj = xt.tr_matvec(&truth.z);
    let signs: Vec<f64> = proxy.beta_star_on_support().iter().map(|v| v.signum()).collect();
    let noise_part = off_support_reach(&inst.x, &xt, &gram, support, &noise_proj).ok()?;
    let sign_part = off_support_reach(&inst.x, &xt, &gram, support, &signs).ok()?;
    Some(Compatibility {
        noise_part,
        sign_part,
        total: noise_part + lambda * sign_part,
    })
}

/// Norms of `A = Σ_T (1/‖C_k+E_j‖ − 1) C_k β_j`, `B = Σ_T E_j β_j/‖C_k+E_j‖`
/// and their starred counterparts over `T*` with `β*`.
pub fn decomposition_norms(
    centers: &CenterMatrix,
    inst: &DesignInstance,
    truth: &GroundTruth,
    proxy: &ProxyVector,
) -> DecompositionNorms {
    let n = inst.n();
    let split = |idx: &[usize], coef: &dyn Fn(usize) -> f64| {
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for &j in idx {
            let bj = coef(j);
            let inv = 1.0 / inst.raw_norm(j);
            linalg::axpy((inv - 1.0) * bj, centers.center(inst.labels[j]), &mut a);
            linalg::axpy(inv * bj, inst.e.col(j), &mut b);
        }
        (a, b)
    };
    let (a, b) = split(&truth.support, &|j| truth.beta[j]);
    let (a_s, b_s) = split(&proxy.support_t_star, &|j| proxy.beta_star[j]);
    let diff: Vec<f64> = (0..n).map(|i| (a[i] + b[i]) - (a_s[i] + b_s[i])).collect();
    DecompositionNorms {
        a: norm2(&a),
        b: norm2(&b),
        a_star: norm2(&a_s),
        b_star: norm2(&b_s),
        combined: norm2(&diff),
    }
}

pub fn check_events(
    centers: &CenterMatrix,
    inst: &DesignInstance,
    truth: &GroundTruth,
    proxy: &ProxyVector,
    lambda: f64,
    params: &TheoremParams,
) -> ConditionReport {
    let active = centers.centers.select_columns(&inst.active_set);
    let center_gram_dev = gram_dev(&active);
    let design_gram_dev = gram_dev(&inst.x.select_columns(&proxy.support_t_star));
    let noise_corr_inf = norm_inf(&inst.x.tr_matvec(&truth.z));
    let comp = compatibility(inst, truth, proxy, lambda);

    let rs = r_star_coeff(params.r);
    let lp = (inst.p() as f64).ln();
    let sigma = truth.sigma;
    let thresholds = [
        0.5,
        rs,
        sigma * (2.0 * params.alpha * lp).sqrt(),
        sigma * (1.0 + rs).sqrt() + lambda / 2.0,
    ];
    let event_flags = [
        center_gram_dev < thresholds[0],
        design_gram_dev < thresholds[1],
        noise_corr_inf < thresholds[2],
        comp.is_some_and(|c| c.total <= thresholds[3]),
    ];

    ConditionReport {
        center_gram_dev,
        design_gram_dev,
        noise_corr_inf,
        compatibility: comp,
        thresholds,
        event_flags,
        rho_measured: rho(&active),
        decomposition: decomposition_norms(centers, inst, truth, proxy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{orthonormal_centers, sample_design, MixtureSpec};
    use crate::proxy::{best_representatives, build_beta_star, proxy_discrepancy, sample_ground_truth, MagnitudeRule, SupportRule};
    use crate::rng;

    fn trial(sigma_frak: f64) -> (CenterMatrix, DesignInstance, GroundTruth, ProxyVector) {
        let mut r = rng::stream(11);
        let centers = orthonormal_centers(40, 10, &mut r).unwrap();
        let spec = MixtureSpec { n: 40, p: 120, k: 10, s_star: 4, sigma_frak, weights: None };
        let inst = sample_design(&spec, &centers, 5).unwrap();
        let truth = sample_ground_truth(&inst, 6, SupportRule::Uniform, MagnitudeRule::default(), 0.1, &mut r).unwrap();
        let reps = best_representatives(&inst, &centers).unwrap();
        let proxy = build_beta_star(&truth, &inst, &reps).unwrap();
        (centers, inst, truth, proxy)
    }

    #[test]
    fn decomposition_matches_discrepancy() {
        for sf in [0.0, 0.01, 0.1] {
            let (c, inst, truth, proxy) = trial(sf);
            let d = decomposition_norms(&c, &inst, &truth, &proxy);
            let direct = proxy_discrepancy(&inst.x, &truth.beta, &proxy.beta_star);
            assert!((d.combined - direct).abs() <= 1e-10 * (1.0 + direct), "sf={sf}");
        }
    }

    #[test]
    fn zero_variance_has_exact_centers() {
        let (c, inst, truth, proxy) = trial(0.0);
        let d = decomposition_norms(&c, &inst, &truth, &proxy);
        assert!(d.b == 0.0 && d.b_star == 0.0);
        assert!(d.a < 1e-12);
        let rep = check_events(&c, &inst, &truth, &proxy, 0.1, &TheoremParams::reference());
        assert!(rep.event_flags[0] && rep.event_flags[1]);
        assert!((rep.rho_measured - 1.0).abs() < 1e-8);
    }

    #[test]
    fn thresholds_follow_inputs() {
        let (c, inst, truth, proxy) = trial(0.01);
        let prm = TheoremParams::reference();
        let rep = check_events(&c, &inst, &truth, &proxy, 0.3, &prm);
        assert_eq!(rep.thresholds[0], 0.5);
        assert!((rep.thresholds[1] - 0.24684).abs() < 1e-12);
        let t3 = 0.1 * (2.0 * (120f64).ln()).sqrt();
        assert!((rep.thresholds[2] - t3).abs() < 1e-12);
        assert!((rep.thresholds[3] - (0.1 * 1.24684f64.sqrt() + 0.15)).abs() < 1e-12);
    }
}
