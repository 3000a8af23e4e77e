//! Monte Carlo sanity checks of the concentration inequalities behind the
//! high-probability events.
//!
//! Every sub-suite draws trial `i` from its own stream seeded with
//! `derive_seed(seed, i)` and merges by counting, so results do not depend
//! on the worker count.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{quadrature, TheoremParams};
use crate::error::{Error, Result};
use crate::linalg::{self, norm2, Matrix};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub trials: usize,
    /// Gaussian matrix shape and deviation `u`.
    pub gauss_rows: usize,
    pub gauss_cols: usize,
    pub gauss_u: f64,
    /// Chi-square degrees of freedom and squared level `u²`.
    pub chi_dof: usize,
    pub chi_level: f64,
    pub chi_samples: usize,
    /// Vector length and deviation grid for the `(C, c)` check.
    pub dev_dim: usize,
    pub dev_grid: Vec<f64>,
    /// Matrix dimension and number of summands for Hoeffding/Chernoff.
    pub matrix_dim: usize,
    pub matrix_terms: usize,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            gauss_rows: 20,
            gauss_cols: 20,
            gauss_u: 3.0,
            chi_dof: 10,
            chi_level: 1.0,
            chi_samples: 1_000_000,
            dev_dim: 50,
            dev_grid: vec![0.25, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            matrix_dim: 5,
            matrix_terms: 60,
        }
    }
}

/// One empirical frequency set against its theoretical bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub name: String,
    pub level: f64,
    pub trials: usize,
    pub exceedances: usize,
    pub frequency: f64,
    pub bound: f64,
    /// Frequency within three binomial standard errors of the bound.
    pub holds: bool,
}

impl TailCheck {
    fn new(name: impl Into<String>, level: f64, trials: usize, exceedances: usize, bound: f64) -> Self {
        let frequency = exceedances as f64 / trials as f64;
        let b = bound.clamp(0.0, 1.0);
        let slack = 3.0 * (b * (1.0 - b) / trials as f64).sqrt();
        Self {
            name: name.into(),
            level,
            trials,
            exceedances,
            frequency,
            bound,
            holds: frequency <= bound + slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiTail {
    pub dof: usize,
    pub level: f64,
    pub samples: usize,
    pub empirical: f64,
    /// Regularized lower incomplete gamma at `level/2` with shape `dof/2`.
    pub exact: f64,
    /// `|empirical − exact|` in binomial standard errors of `exact`.
    pub z_score: f64,
    /// Smallest constant dominating the exact tail over the grid, for the
    /// exponent `dof` and for `dof/2`.
    pub fitted_c_full: f64,
    pub fitted_c_half: f64,
    pub configured_c_chi: f64,
    /// `configured_c_chi · (level/dof)^dof`.
    pub configured_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub gaussian_norm: Vec<TailCheck>,
    pub chi_square: ChiTail,
    pub chi_deviation: Vec<TailCheck>,
    pub matrix_hoeffding: TailCheck,
    pub matrix_chernoff: TailCheck,
}

impl ConcentrationReport {
    pub fn all_hold(&self) -> bool {
        self.gaussian_norm.iter().all(|c| c.holds)
            && self.chi_deviation.iter().all(|c| c.holds)
            && self.matrix_hoeffding.holds
            && self.matrix_chernoff.holds
    }
}

fn normals(rng: &mut Stream, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn top_singular(m: &Matrix) -> f64 {
    match linalg::spectral_norm(m, 1e-9, 20_000) {
        Ok(r) => r.operator_norm,
        Err(Error::SpectralNonConvergence { estimate, .. }) => estimate,
        Err(_) => f64::NAN,
    }
}

/// Largest eigenvalue of a symmetric matrix, via the norm of `A + ‖A‖_F I`.
fn max_eigenvalue(a: &Matrix) -> f64 {
    let shift = a.frobenius();
    let d = a.rows();
    let mut data = a.col_major().to_vec();
    for i in 0..d {
        data[i * d + i] += shift;
    }
    let shifted = Matrix::from_col_major(d, d, data).expect("square");
    top_singular(&shifted) - shift
}

/// Counts trials in `0..trials` for which `hit` returns true.
fn count<F>(seed: u64, trials: usize, hit: F) -> usize
where
    F: Fn(&mut Stream) -> bool + Sync,
{
    (0..trials)
        .into_par_iter()
        .filter(|&i| hit(&mut rng::stream(rng::derive_seed(seed, i as u64))))
        .count()
}

fn gaussian_norm_suite(cfg: &ConcentrationConfig, seed: u64) -> Vec<TailCheck> {
    let (n, m) = (cfg.gauss_rows, cfg.gauss_cols);
    let norms: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(rng::derive_seed(seed, i as u64));
            let g = Matrix::from_col_major(n, m, normals(&mut r, n * m)).expect("shape");
            top_singular(&g)
        })
        .collect();
    let base = (n as f64).sqrt() + (m as f64).sqrt();
    let mut levels = vec![cfg.gauss_u];
    if cfg.gauss_u != 0.0 {
        levels.insert(0, 0.0);
    }
    levels
        .into_iter()
        .map(|u| {
            let hits = norms.iter().filter(|&&s| s > base + u).count();
            TailCheck::new(
                format!("gaussian matrix norm {n}x{m}"),
                u,
                cfg.trials,
                hits,
                2.0 * (-u * u / 2.0).exp(),
            )
        })
        .collect()
}

fn chi_suite(cfg: &ConcentrationConfig, params: &TheoremParams, seed: u64) -> Result<ChiTail> {
    let (k, level) = (cfg.chi_dof, cfg.chi_level);
    let chunk = 10_000usize;
    let chunks = cfg.chi_samples.div_ceil(chunk);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(rng::derive_seed(seed, c as u64));
            let len = chunk.min(cfg.chi_samples - c * chunk);
            (0..len)
                .filter(|_| normals(&mut r, k).iter().map(|v| v * v).sum::<f64>() <= level)
                .count()
        })
        .sum();
    let samples = cfg.chi_samples;
    let empirical = hits as f64 / samples as f64;
    let exact = quadrature::chi_square_cdf(k, level);
    let se = (exact * (1.0 - exact) / samples as f64).sqrt();
    let fit = |exponent: f64| -> Result<f64> {
        let c = quadrature::ln_fitted_chi_constant(k, exponent).exp();
        if c.is_finite() {
            Ok(c)
        } else {
            Err(Error::InvalidParameter(format!("fitted chi constant overflows at dof {k}")))
        }
    };
    Ok(ChiTail {
        dof: k,
        level,
        samples,
        empirical,
        exact,
        z_score: if se > 0.0 { (empirical - exact).abs() / se } else { 0.0 },
        fitted_c_full: fit(k as f64)?,
        fitted_c_half: fit(k as f64 / 2.0)?,
        configured_c_chi: params.c_chi,
        configured_bound: params.c_chi * (level / k as f64).powi(k as i32),
    })
}

fn deviation_suite(cfg: &ConcentrationConfig, params: &TheoremParams, seed: u64) -> Vec<TailCheck> {
    let n = cfg.dev_dim;
    let root = (n as f64).sqrt();
    let devs: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(rng::derive_seed(seed, i as u64));
            (norm2(&normals(&mut r, n)) - root).abs()
        })
        .collect();
    cfg.dev_grid
        .iter()
        .map(|&u| {
            let hits = devs.iter().filter(|&&d| d >= u).count();
            TailCheck::new(
                format!("gaussian norm deviation n={n}"),
                u,
                cfg.trials,
                hits,
                params.c_dev_big * (-params.c_dev_small * u * u).exp(),
            )
        })
        .collect()
}

/// Rademacher series `Σ ε_k A_k` with fixed symmetric `A_k`; bound
/// `d·exp(−t²/(8σ²))`, `σ² = ‖Σ A_k²‖`, at the `t` making the bound ½.
fn hoeffding_suite(cfg: &ConcentrationConfig, seed: u64) -> TailCheck {
    let d = cfg.matrix_dim;
    let mut r = rng::stream(seed);
    let coeffs: Vec<Matrix> = (0..cfg.matrix_terms)
        .map(|_| {
            let g = Matrix::from_col_major(d, d, normals(&mut r, d * d)).expect("shape");
            let gt = g.transpose();
            let sym: Vec<f64> = g.col_major().iter().zip(gt.col_major()).map(|(a, b)| 0.5 * (a + b)).collect();
            Matrix::from_col_major(d, d, sym).expect("shape")
        })
        .collect();
    let mut sq = vec![0.0; d * d];
    for a in &coeffs {
        for j in 0..d {
            let aj = a.col(j);
            for i in 0..d {
                sq[j * d + i] += linalg::dot(a.col(i), aj);
            }
        }
    }
    let sigma_sq = max_eigenvalue(&Matrix::from_col_major(d, d, sq).expect("shape"));
    let t = (8.0 * sigma_sq * (2.0 * d as f64).ln()).sqrt();
    let hits = count(rng::derive_seed(seed, 1), cfg.trials, |r| {
        let mut acc = vec![0.0; d * d];
        for a in &coeffs {
            let s = if r.random_bool(0.5) { 1.0 } else { -1.0 };
            linalg::axpy(s, a.col_major(), &mut acc);
        }
        max_eigenvalue(&Matrix::from_col_major(d, d, acc).expect("shape")) >= t
    });
    TailCheck::new(
        format!("matrix hoeffding d={d}"),
        t,
        cfg.trials,
        hits,
        d as f64 * (-t * t / (8.0 * sigma_sq)).exp(),
    )
}

/// Sum of rank-one projections onto uniform unit vectors (`R = 1`,
/// `μ_min = terms/d`); lower tail at `(1 − δ)μ_min` with `δ = ½`.
fn chernoff_suite(cfg: &ConcentrationConfig, seed: u64) -> TailCheck {
    let d = cfg.matrix_dim;
    let mu_min = cfg.matrix_terms as f64 / d as f64;
    let delta = 0.5f64;
    let level = (1.0 - delta) * mu_min;
    let hits = count(seed, cfg.trials, |r| {
        let mut s = vec![0.0; d * d];
        for _ in 0..cfg.matrix_terms {
            let mut v = normals(r, d);
            let nv = norm2(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            for j in 0..d {
                for i in 0..d {
                    s[j * d + i] += v[i] * v[j];
                }
            }
        }
        // λ_min(S) = tr(S) − λ_max(tr(S)·I − S) for PSD S.
        let tr: f64 = (0..d).map(|i| s[i * d + i]).sum();
        let flipped: Vec<f64> = (0..d * d)
            .map(|idx| if idx % (d + 1) == 0 { tr - s[idx] } else { -s[idx] })
            .collect();
        let lmin = tr - top_singular(&Matrix::from_col_major(d, d, flipped).expect("shape"));
        lmin <= level
    });
    let base = (-delta).exp() / (1.0 - delta).powf(1.0 - delta);
    TailCheck::new(
        format!("matrix chernoff d={d}"),
        level,
        cfg.trials,
        hits,
        d as f64 * base.powf(mu_min),
    )
}

pub fn concentration_suite(cfg: &ConcentrationConfig, params: &TheoremParams, seed: u64) -> Result<ConcentrationReport> {
    if cfg.trials < 100 {
        return Err(Error::InvalidParameter(format!("trials must be >= 100, got {}", cfg.trials)));
    }
    if cfg.chi_dof == 0 || cfg.chi_samples == 0 || cfg.matrix_dim == 0 || cfg.dev_dim == 0 {
        return Err(Error::InvalidParameter("concentration sizes must be positive".into()));
    }
    Ok(ConcentrationReport {
        gaussian_norm: gaussian_norm_suite(cfg, rng::derive_seed(seed, 0)),
        chi_square: chi_suite(cfg, params, rng::derive_seed(seed, 1))?,
        chi_deviation: deviation_suite(cfg, params, rng::derive_seed(seed, 2)),
        matrix_hoeffding: hoeffding_suite(cfg, rng::derive_seed(seed, 3)),
        matrix_chernoff: chernoff_suite(cfg, rng::derive_seed(seed, 4)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ConcentrationConfig {
        ConcentrationConfig {
            trials: 400,
            chi_samples: 20_000,
            ..Default::default()
        }
    }

    #[test]
    fn rejects_few_trials() {
        let cfg = ConcentrationConfig { trials: 99, ..small() };
        assert!(concentration_suite(&cfg, &TheoremParams::reference(), 0).is_err());
    }

    #[test]
    fn zero_level_is_trivial() {
        let rep = concentration_suite(&small(), &TheoremParams::reference(), 3).unwrap();
        let zero = &rep.gaussian_norm[0];
        assert_eq!(zero.level, 0.0);
        assert_eq!(zero.bound, 2.0);
        assert!(zero.frequency <= 1.0 && zero.holds);
        assert!(rep.all_hold());
    }

    #[test]
    fn max_eigenvalue_of_diagonal() {
        let m = Matrix::diag(&[-3.0, 1.0, 2.0]);
        assert!((max_eigenvalue(&m) - 2.0).abs() < 1e-7);
    }

    #[test]
    fn seeded_suite_is_reproducible() {
        let p = TheoremParams::reference();
        let a = concentration_suite(&small(), &p, 9).unwrap();
        let b = concentration_suite(&small(), &p, 9).unwrap();
        assert_eq!(a, b);
    }
}
