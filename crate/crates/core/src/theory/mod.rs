//! Theorem-level quantities: constants, assumption checks, the four
//! probabilistic events behind the proof, the `A, B, A*, B*` decompositions,
//! and empirical checks of the concentration inequalities the proof uses.

pub mod assumptions;
pub mod concentration;
pub mod constants;
pub mod events;
pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assumptions::{check_assumptions, AssumptionCheck, AssumptionReport};
pub use concentration::{concentration_suite, ConcentrationConfig, ConcentrationReport};
pub use constants::{
    compute_constants, delta_lower_bound, theorem_rhs, ProblemSize, TheoremConstants,
};
pub use events::{check_events, decomposition_norms, ConditionReport, DecompositionNorms};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    /// Probability exponent: bounds hold with probability `1 − O(p^{−α})`.
    pub alpha: f64,
    /// Center-Gram tolerance, in `(0, 1/4)`.
    pub r: f64,
    /// Cluster-size constant `ϑ*`.
    pub vartheta_star: f64,
    /// Cluster-size exponent `ν`.
    pub nu: u32,
    /// Chi-square lower-tail constant `C_χ`.
    pub c_chi: f64,
    /// `C` in `P(|‖G‖/s − √n| ≥ u) ≤ C exp(−c u²)`.
    pub c_dev_big: f64,
    /// `c` in the same bound.
    pub c_dev_small: f64,
    /// `ρ_C`, standing in for `‖(C_Kᵗ C_K)⁻¹‖`.
    pub rho_c: f64,
}

impl TheoremParams {
    /// `α = 1, r = 0.2, ϑ* = 1, ν = 2, (C, c) = (2, ½), ρ = 2`, with `C_χ`
    /// fitted at `n = 200`.
    pub fn reference() -> Self {
        Self {
            alpha: 1.0,
            r: 0.2,
            vartheta_star: 1.0,
            nu: 2,
            c_chi: fitted_c_chi(200).expect("C_chi representable at n = 200"),
            c_dev_big: 2.0,
            c_dev_small: 0.5,
            rho_c: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.r > 0.0 && self.r < 0.25) {
            return bad(&format!("r must lie in (0, 1/4), got {}", self.r));
        }
        if !(self.alpha > 0.0) {
            return bad("alpha must be > 0");
        }
        if self.nu < 1 {
            return bad("nu must be >= 1");
        }
        if !(self.vartheta_star > 0.0) {
            return bad("vartheta_star must be > 0");
        }
        if !(self.c_chi > 0.0 && self.c_chi.is_finite()) {
            return bad("c_chi must be finite and > 0");
        }
        if !(self.c_dev_big > 0.0 && self.c_dev_small > 0.0) {
            return bad("deviation constants must be > 0");
        }
        if !(self.rho_c >= 1.0) {
            return bad("rho_c must be >= 1");
        }
        Ok(())
    }
}

/// Smallest `C_χ` with `P(χ²_n ≤ u²) ≤ C_χ (u²/n)ⁿ` over `u²/n ∈ [0.01, 1]`.
pub fn fitted_c_chi(n: usize) -> Result<f64> {
    let ln_c = quadrature::ln_fitted_chi_constant(n, n as f64);
    let c = ln_c.exp();
    if !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "fitted C_chi = exp({ln_c}) overflows at n = {n}; set c_chi explicitly"
        )));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r_interval_is_open_quarter() {
        let mut p = TheoremParams::reference();
        p.r = 0.25;
        assert!(p.validate().is_err());
        p.r = 0.0;
        assert!(p.validate().is_err());
        p.r = 0.1;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn fitted_c_chi_dominates_grid() {
        for n in [5usize, 10, 50] {
            let c = fitted_c_chi(n).unwrap();
            for t in quadrature::tail_grid() {
                let cdf = quadrature::chi_square_cdf(n, n as f64 * t);
                assert!(cdf <= c * t.powi(n as i32) * (1.0 + 1e-9), "n={n} t={t}");
            }
        }
    }
}
