//! Numerical integration and chi-square tail helpers.

use statrs::function::gamma::{gamma_lr, ln_gamma};

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

/// `∫₀³ √(log(3/ε)) dε`.
///
/// With `ε = 3e^{−t²}` the integrand becomes `6t²e^{−t²}` on `[0, ∞)`,
/// which is smooth; the tail beyond `t = 12` is below `1e-60`.
pub fn c_int() -> f64 {
    c_int_with_tol(1e-10)
}

pub fn c_int_with_tol(tol: f64) -> f64 {
    adaptive_simpson(&|t: f64| 6.0 * t * t * (-t * t).exp(), 0.0, 12.0, tol)
}

/// `ln P(a, x)`, the log of the regularized lower incomplete gamma function,
/// accurate far into the lower tail where `P` underflows.
pub fn ln_gamma_lower_regularized(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x >= a + 1.0 {
        return gamma_lr(a, x).ln();
    }
    // P(a, x) = x^a e^{-x} / Γ(a+1) · Σ_k x^k / ((a+1)…(a+k))
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= x / (a + k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    a * x.ln() - x - ln_gamma(a + 1.0) + sum.ln()
}

/// `P(χ²_n ≤ v)`.
pub fn chi_square_cdf(n: usize, v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        gamma_lr(n as f64 / 2.0, v / 2.0)
    }
}

/// Grid of `u²/n` values over which the chi-square lower tail is fitted.
pub fn tail_grid() -> Vec<f64> {
    // Log-spaced on [0.01, 1].
    (0..=200).map(|i| 10f64.powf(-2.0 + 2.0 * i as f64 / 200.0)).collect()
}

/// `ln` of the smallest `C` with `P(χ²_n ≤ n t) ≤ C t^{exponent}` for every
/// `t` on [`tail_grid`].
pub fn ln_fitted_chi_constant(n: usize, exponent: f64) -> f64 {
    let a = n as f64 / 2.0;
    tail_grid()
        .into_iter()
        .map(|t| ln_gamma_lower_regularized(a, n as f64 * t / 2.0) - exponent * t.ln())
        .fold(f64::NEG_INFINITY, f64::max)
}
