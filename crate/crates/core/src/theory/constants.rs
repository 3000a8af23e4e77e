//! Closed-form constants of the prediction bound and the `δ` lower bound.

use serde::{Deserialize, Serialize};

use super::{quadrature, TheoremParams};
use crate::error::{Error, Result};

/// Problem sizes the constants depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSize {
    pub n: usize,
    pub p: usize,
    /// `|T|`, size of the true support.
    pub s: usize,
    /// `|T*|`, number of active clusters.
    pub s_star: usize,
    pub sigma_frak: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub c_mu: f64,
    pub c_spar: f64,
    pub c_col: f64,
    pub c_int: f64,
    /// Defined by the same integral as `c_int`.
    pub c_int_star: f64,
    /// Largest admissible `C_{s,n,p}`.
    pub c_s_n_p: f64,
    pub r_max: f64,
    pub mu_max: f64,
    pub sigma_max_sq: f64,
    pub r_star_max: f64,
    /// `K_{n,s*}` (the square root of its defining expression).
    pub k_n_sstar: f64,
    pub mu_star_max: f64,
    pub sigma_star_max_sq: f64,
    /// `r_* = 1.1 r (1.1 + 0.11 r)`, the design-Gram threshold.
    pub r_star_coeff: f64,
    /// Max of the two design-Gram deviation bounds on the representatives.
    pub r_star_design: f64,
    /// `(α(1 − e⁻¹)/(ϑ* C_χ))^{1/n} (1/log(p)^{ν−1})^{1/n}`.
    pub tail_scale: f64,
    pub delta_terms: [f64; 4],
    pub delta_lower: f64,
}

impl TheoremConstants {
    /// Right-hand side of the prediction bound at this `δ`.
    pub fn bound_rhs(&self, s_star: usize, lambda: f64, delta: f64, center_energy: f64, signal_energy: f64) -> f64 {
        theorem_rhs(s_star, self.r_star_coeff, lambda, delta, center_energy, signal_energy)
    }
}

pub fn r_star_coeff(r: f64) -> f64 {
    1.1 * r * (1.1 + 0.11 * r)
}

pub fn c_mu(p: &TheoremParams) -> f64 {
    p.r / (1.0 + p.alpha)
}

pub fn c_spar(p: &TheoremParams) -> f64 {
    p.r * p.r / ((1.0 + p.alpha) * std::f64::consts::E.powi(2))
}

pub fn c_col(p: &TheoremParams) -> f64 {
    0.5 * (2f64.sqrt() / ((1.0 - p.r) * (1.0 + p.alpha)).sqrt() - (1.0 + p.r))
}

/// `√n + √(α/c·log p + 1/c·log s)`, the radius appearing in `r_max`, the
/// first `δ` term and the variance-scale assumption.
pub fn deviation_radius(sz: &ProblemSize, prm: &TheoremParams) -> f64 {
    let lp = (sz.p as f64).ln();
    let c = prm.c_dev_small;
    (sz.n as f64).sqrt() + (prm.alpha / c * lp + (sz.s as f64).ln() / c).sqrt()
}

pub fn tail_scale(sz: &ProblemSize, prm: &TheoremParams) -> f64 {
    let n = sz.n as f64;
    let lp = (sz.p as f64).ln();
    let head = prm.alpha * (1.0 - (-1f64).exp()) / (prm.vartheta_star * prm.c_chi);
    let tail = 1.0 / lp.powi(prm.nu as i32 - 1);
    head.powf(1.0 / n) * tail.powf(1.0 / n)
}

pub fn compute_constants(sz: &ProblemSize, prm: &TheoremParams) -> Result<TheoremConstants> {
    prm.validate()?;
    if sz.p < 2 || sz.n == 0 || sz.s == 0 || sz.s_star == 0 {
        return Err(Error::InvalidParameter(format!(
            "constants need p >= 2 and positive n, s, s* (got {sz:?})"
        )));
    }
    if !(sz.sigma_frak >= 0.0) {
        return Err(Error::InvalidParameter("sigma_frak must be >= 0".into()));
    }
    let n = sz.n as f64;
    let lp = (sz.p as f64).ln();
    let sf = sz.sigma_frak;
    let alpha = prm.alpha;
    let q = tail_scale(sz, prm);
    let a = sf * (n * q).sqrt();
    if a >= 1.0 {
        return Err(Error::AssumptionViolated(format!(
            "sigma_frak·sqrt(n·tail_scale) = {a} >= 1; star constants undefined"
        )));
    }
    let c_int = quadrature::c_int();
    let radius = deviation_radius(sz, prm);

    let r_max = 1.0 + sf * radius;
    let mu_max = 0.5 * sf * (n.sqrt() + (sz.s as f64).sqrt() + (2.0 * alpha * lp).sqrt());
    let sigma_max_sq = 0.5 * (sz.s as f64).sqrt() * sf * sf;
    let r_star_max = 1.0 / (1.0 - a);
    let k_n_sstar = (alpha * n * lp * q).sqrt();
    let mu_star_max = sf * k_n_sstar;
    let sigma_star_max_sq = q / (1.0 - a) * (sz.s_star as f64).sqrt() * sf * sf;
    let c_s_n_p = (0.1 * prm.r / (alpha * q).sqrt()).min(0.5 * lp.sqrt());

    let r = prm.r;
    let b = sf * k_n_sstar;
    let upper = ((1.0 + r) + (1.0 + r) * b + b * b) / (1.0 - a).powi(2) - 1.0;
    let lower = 1.0 - ((1.0 - r) / (1.0 + a).powi(2) - ((1.0 + r) * b + b * b) / (1.0 - a).powi(2));
    let r_star_design = upper.max(lower);

    let mut out = TheoremConstants {
        c_mu: c_mu(prm),
        c_spar: c_spar(prm),
        c_col: c_col(prm),
        c_int,
        c_int_star: c_int,
        c_s_n_p,
        r_max,
        mu_max,
        sigma_max_sq,
        r_star_max,
        k_n_sstar,
        mu_star_max,
        sigma_star_max_sq,
        r_star_coeff: r_star_coeff(r),
        r_star_design,
        tail_scale: q,
        delta_terms: [0.0; 4],
        delta_lower: 0.0,
    };
    out.delta_terms = delta_terms(&out, sz, prm);
    out.delta_lower = out.delta_terms.iter().sum();
    Ok(out)
}

/// The four summands of the `δ` lower bound: controls for `‖A‖`, `‖B‖`,
/// `‖A*‖` and `‖B*‖` respectively, each per unit of `‖centers β_T‖`.
pub fn delta_terms(k: &TheoremConstants, sz: &ProblemSize, prm: &TheoremParams) -> [f64; 4] {
    let n = sz.n as f64;
    let lp = (sz.p as f64).ln();
    let sf = sz.sigma_frak;
    let alpha = prm.alpha;
    let rho = prm.rho_c;
    let s_star = sz.s_star as f64;
    let union = (alpha * lp + (2.0 * n + 2.0).ln()).sqrt();
    let spread = (s_star * rho).sqrt();

    let t_a = 4.0 * sf * deviation_radius(sz, prm) * (1.0 + 8.0 * 2f64.sqrt() * union * spread);
    let t_b = (12.0 * k.c_int * sf * n.sqrt() * k.r_max + alpha * lp * k.mu_max) * spread;
    let t_a_star =
        4.0 * sf * (n * k.tail_scale).sqrt() * (1.0 + 2.0 * 2f64.sqrt() * rho.sqrt() * union);
    let t_b_star = (24.0 * k.r_star_max * sf * k.tail_scale.sqrt() * k.c_int_star
        + k.mu_star_max * alpha * lp)
        * rho.sqrt();
    [t_a, t_b, t_a_star, t_b_star]
}

/// `δ` lower bound for a given problem; equals `compute_constants(..).delta_lower`.
pub fn delta_lower_bound(sz: &ProblemSize, prm: &TheoremParams) -> Result<f64> {
    Ok(compute_constants(sz, prm)?.delta_lower)
}

/// `s*·(3/2)·r_*·λ·((3/2)λ + √(1+r_*)·δ·center_energy) + ½δ²·signal_energy²`.
pub fn theorem_rhs(
    s_star: usize,
    r_star_coeff: f64,
    lambda: f64,
    delta: f64,
    center_energy: f64,
    signal_energy: f64,
) -> f64 {
    let s = s_star as f64;
    s * 1.5 * r_star_coeff * lambda * (1.5 * lambda + (1.0 + r_star_coeff).sqrt() * delta * center_energy)
        + 0.5 * delta * delta * signal_energy * signal_energy
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> (ProblemSize, TheoremParams) {
        (
            ProblemSize {
                n: 200,
                p: 2000,
                s: 8,
                s_star: 8,
                sigma_frak: 1e-3,
            },
            TheoremParams::reference(),
        )
    }

    #[test]
    fn simple_constants() {
        let prm = TheoremParams {
            r: 0.2,
            alpha: 1.0,
            ..TheoremParams::reference()
        };
        assert_relative_eq!(c_mu(&prm), 0.1, max_relative = 1e-15);
        let (mut sz, _) = reference();
        sz.sigma_frak = 0.0;
        let k = compute_constants(&sz, &prm).unwrap();
        assert_eq!(k.mu_max, 0.0);
        assert_eq!(k.delta_lower, 0.0);
        assert_eq!(k.r_max, 1.0);
        assert_relative_eq!(k.c_int, 3.0 * std::f64::consts::PI.sqrt() / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn rhs_examples() {
        assert_relative_eq!(theorem_rhs(3, 0.5, 2.0, 0.0, 7.0, 9.0), 2.25 * 3.0 * 0.5 * 4.0);
        assert_relative_eq!(theorem_rhs(0, 0.5, 2.0, 0.3, 7.0, 2.0), 0.5 * 0.09 * 4.0);
        assert_relative_eq!(
            theorem_rhs(1, 1.0, 2.0, 1.0, 1.0, 1.0),
            3.0 * (3.0 + 2f64.sqrt()) + 0.5,
            max_relative = 1e-15
        );
    }

    #[test]
    fn violated_star_denominator_is_error() {
        let (mut sz, prm) = reference();
        sz.sigma_frak = 1.0;
        assert!(matches!(compute_constants(&sz, &prm), Err(Error::AssumptionViolated(_))));
    }

    #[test]
    fn delta_grows_with_sigma() {
        let (mut sz, prm) = reference();
        let mut last = 0.0;
        for s in [1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2] {
            sz.sigma_frak = s;
            let d = delta_lower_bound(&sz, &prm).unwrap();
            assert!(d >= last);
            last = d;
        }
    }
}
