//! l1-penalized least squares, `min ½‖y − Xb‖₂² + λ‖b‖₁`.
//!
//! Monotone FISTA with backtracking and function-value restarts. The step
//! starts from the power-iteration estimate of `‖X‖²` and only grows. The
//! stopping rule is the duality gap of the scaled-residual dual point
//! together with the stationarity bound `‖Xᵗ(y − Xb)‖_∞ ≤ λ(1 + kkt_tol)`.
//!
//! [`Method::Homotopy`] follows the piecewise-linear solution path from
//! `λ_max` down to `λ` instead, and hands its end point to FISTA when it
//! does not pass the same certificate. On designs with many nearly
//! collinear columns it is orders of magnitude faster.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm1, norm2, norm_inf, Matrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Fista,
    Homotopy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative duality-gap tolerance, `gap <= tol · max(1, objective)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative slack allowed on the stationarity bound.
    pub kkt_tol: f64,
    /// Iterations between two gap evaluations (each costs one `Xᵗr`).
    pub check_every: usize,
    #[serde(default)]
    pub method: Method,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50_000,
            kkt_tol: 1e-6,
            check_every: 5,
            method: Method::Fista,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution {
    pub beta_hat: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub objective: f64,
    /// `‖Xᵗ(y − Xβ̂)‖_∞`.
    pub kkt_infinity: f64,
    pub duality_gap: f64,
}

/// `λ = 2σ √(2α log p)`. `p` is real so the formula can be checked at
/// non-integer points.
pub fn default_lambda(sigma: f64, alpha: f64, p: f64) -> Result<f64> {
    if !(sigma > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma and alpha must be > 0 (sigma={sigma}, alpha={alpha})"
        )));
    }
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(format!("p must be >= 2, got {p}")));
    }
    Ok(2.0 * sigma * (2.0 * alpha * p.ln()).sqrt())
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `½‖X(β̂ − β)‖₂²`.
pub fn prediction_error(x: &Matrix, beta: &[f64], beta_hat: &[f64]) -> f64 {
    let h = linalg::sub(beta_hat, beta);
    0.5 * norm2(&x.matvec(&h)).powi(2)
}

pub fn objective(x: &Matrix, y: &[f64], lambda: f64, b: &[f64]) -> f64 {
    let r = linalg::sub(y, &x.matvec(b));
    0.5 * dot(&r, &r) + lambda * norm1(b)
}

struct Certificate {
    primal: f64,
    gap: f64,
    kkt_inf: f64,
}

/// Duality gap at `b` given `xb = X b`.
fn certify(x: &Matrix, y: &[f64], lambda: f64, b: &[f64], xb: &[f64]) -> Certificate {
    let r = linalg::sub(y, xb);
    let g = x.tr_matvec(&r);
    let kkt_inf = norm_inf(&g);
    let rr = dot(&r, &r);
    let primal = 0.5 * rr + lambda * norm1(b);
    let scale = if kkt_inf > lambda { lambda / kkt_inf } else { 1.0 };
    // D(θ) = ½‖y‖² − ½‖y − θ‖² with θ = scale·r, expanded to avoid forming y − θ.
    let dual = scale * dot(y, &r) - 0.5 * scale * scale * rr;
    Certificate {
        primal,
        gap: (primal - dual).max(0.0),
        kkt_inf,
    }
}

fn lipschitz_estimate(x: &Matrix) -> f64 {
    match linalg::spectral_norm(x, 1e-4, 1000) {
        Ok(r) => r.operator_norm.powi(2),
        Err(Error::SpectralNonConvergence { estimate, .. }) => estimate.powi(2),
        Err(_) => 1.0,
    }
    .max(f64::MIN_POSITIVE)
}

fn check_inputs(x: &Matrix, y: &[f64], lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
    }
    if y.len() != x.rows() {
        return Err(Error::Dimension(format!(
            "y has length {} but X has {} rows",
            y.len(),
            x.rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("response"));
    }
    Ok(())
}

pub fn solve(x: &Matrix, y: &[f64], lambda: f64, opts: &SolverOptions) -> Result<LassoSolution> {
    match opts.method {
        Method::Fista => solve_from(x, y, lambda, opts, None, |_| {}),
        Method::Homotopy => solve_homotopy(x, y, lambda, opts),
    }
}

enum PathEvent {
    Join(usize, f64),
    Drop(usize),
}

/// Solution path from `‖Xᵗy‖_∞` down to `lambda`, polished by an exact
/// solve on the final active set. Falls back to FISTA, warm-started at the
/// path end point, when the result does not certify.
pub fn solve_homotopy(x: &Matrix, y: &[f64], lambda: f64, opts: &SolverOptions) -> Result<LassoSolution> {
    check_inputs(x, y, lambda)?;
    let p = x.cols();
    let mut b = vec![0.0; p];
    let mut c = x.tr_matvec(y);
    let (first, lam0) = c
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bj, bv), (j, v)| if v.abs() > bv { (j, v.abs()) } else { (bj, bv) });
    let mut steps = 0;
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    if lambda < lam0 {
        let mut is_active = vec![false; p];
        active.push(first);
        signs.push(c[first].signum());
        is_active[first] = true;
        let mut lam = lam0;
        let mut just_dropped = None;
        let max_steps = opts.max_iter.min(10 * x.rows().min(p) + 10);
        while steps < max_steps {
            steps += 1;
            let xa = x.select_columns(&active);
            let Ok(w) = linalg::solve_gram_system(&xa.gram(), &signs) else {
                break;
            };
            let a = x.tr_matvec(&xa.matvec(&w));
            let mut gamma = lam - lambda;
            let mut event = None;
            for j in (0..p).filter(|&j| !is_active[j] && Some(j) != just_dropped) {
                for (num, den, s) in [(lam - c[j], 1.0 - a[j], 1.0), (lam + c[j], 1.0 + a[j], -1.0)] {
                    if den > 0.0 && num > 0.0 && num / den < gamma {
                        gamma = num / den;
                        event = Some(PathEvent::Join(j, s));
                    }
                }
            }
            for (i, &j) in active.iter().enumerate() {
                let g = -b[j] / w[i];
                if g > 0.0 && g < gamma {
                    gamma = g;
                    event = Some(PathEvent::Drop(i));
                }
            }
            for (i, &j) in active.iter().enumerate() {
                b[j] += gamma * w[i];
            }
            lam -= gamma;
            just_dropped = None;
            match event {
                None => break,
                Some(PathEvent::Join(j, s)) => {
                    active.push(j);
                    signs.push(s);
                    is_active[j] = true;
                }
                Some(PathEvent::Drop(i)) => {
                    let j = active.remove(i);
                    signs.remove(i);
                    b[j] = 0.0;
                    is_active[j] = false;
                    just_dropped = Some(j);
                }
            }
            c = x.tr_matvec(&linalg::sub(y, &x.matvec(&b)));
        }
        // Exact stationarity on the final active set, kept if signs agree.
        let xa = x.select_columns(&active);
        let rhs: Vec<f64> = xa.tr_matvec(y).iter().zip(&signs).map(|(v, s)| v - lambda * s).collect();
        if let Ok(ba) = linalg::solve_gram_system(&xa.gram(), &rhs) {
            if ba.iter().zip(&signs).all(|(v, s)| v * s >= 0.0) {
                for (&j, v) in active.iter().zip(ba) {
                    b[j] = v;
                }
            }
        }
    }
    let cert = certify(x, y, lambda, &b, &x.matvec(&b));
    if cert.gap <= opts.tol * cert.primal.max(1.0) && cert.kkt_inf <= lambda * (1.0 + opts.kkt_tol) {
        return Ok(LassoSolution {
            beta_hat: b,
            lambda,
            iterations: steps,
            objective: cert.primal,
            kkt_infinity: cert.kkt_inf,
            duality_gap: cert.gap,
        });
    }
    let mut sol = solve_from(x, y, lambda, opts, Some(&b), |_| {})?;
    sol.iterations += steps;
    Ok(sol)
}

/// Solves starting from `start` (zeros when `None`). `on_iter` receives the
/// objective of the monotone sequence after every iteration.
pub fn solve_from(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    opts: &SolverOptions,
    start: Option<&[f64]>,
    mut on_iter: impl FnMut(f64),
) -> Result<LassoSolution> {
    check_inputs(x, y, lambda)?;
    let p = x.cols();
    let mut xk: Vec<f64> = match start {
        Some(s) if s.len() == p => s.to_vec(),
        Some(s) => {
            return Err(Error::Dimension(format!(
                "warm start has length {} but X has {p} columns",
                s.len()
            )))
        }
        None => vec![0.0; p],
    };
    let converged = |c: &Certificate| {
        c.gap <= opts.tol * c.primal.max(1.0) && c.kkt_inf <= lambda * (1.0 + opts.kkt_tol)
    };
    let finish = |b: Vec<f64>, it: usize, c: Certificate| LassoSolution {
        beta_hat: b,
        lambda,
        iterations: it,
        objective: c.primal,
        kkt_infinity: c.kkt_inf,
        duality_gap: c.gap,
    };

    let mut xxk = x.matvec(&xk);
    let cert = certify(x, y, lambda, &xk, &xxk);
    if converged(&cert) {
        return Ok(finish(xk, 0, cert));
    }
    let mut f_xk = cert.primal;
    let mut lip = lipschitz_estimate(x);

    // Momentum point and its image.
    let mut v = xk.clone();
    let mut xv = xxk.clone();
    let mut t = 1.0f64;
    let mut anchored = true;
    let mut last_gap = cert.gap;
    let check_every = opts.check_every.max(1);

    for it in 1..=opts.max_iter {
        let rv = linalg::sub(&xv, y);
        let grad = x.tr_matvec(&rv);
        let fv = 0.5 * dot(&rv, &rv);

        let (z, xz) = loop {
            let step = 1.0 / lip;
            let z: Vec<f64> = v
                .iter()
                .zip(&grad)
                .map(|(vi, gi)| soft_threshold(vi - step * gi, lambda * step))
                .collect();
            let xz = x.matvec(&z);
            let d = linalg::sub(&z, &v);
            let rz = linalg::sub(&xz, y);
            let fz = 0.5 * dot(&rz, &rz);
            let model = fv + dot(&grad, &d) + 0.5 * lip * dot(&d, &d);
            // Relative slack absorbs rounding once the quadratic model is exact.
            if fz <= model + 1e-12 * fv.abs().max(1e-300) {
                break (z, xz);
            }
            lip *= 2.0;
        };

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // Objective change evaluated termwise. A plain proximal step from the
        // monotone iterate is a descent step, so it is taken even when the
        // decrease is below rounding.
        let change = 0.5
            * xz.iter()
                .zip(&xxk)
                .zip(y)
                .map(|((a, b), yi)| (a - b) * ((a - yi) + (b - yi)))
                .sum::<f64>()
            + lambda * z.iter().zip(&xk).map(|(a, b)| a.abs() - b.abs()).sum::<f64>();
        if change <= 0.0 || anchored {
            // v ← z + ((t−1)/t_next)(z − x_prev)
            let w = (t - 1.0) / t_next;
            v = z.iter().zip(&xk).map(|(a, b)| a + w * (a - b)).collect();
            xv = xz.iter().zip(&xxk).map(|(a, b)| a + w * (a - b)).collect();
            xk = z;
            xxk = xz;
            f_xk = f_xk.min(f_xk + change);
            t = t_next;
            anchored = false;
        } else {
            // Objective went up: restart the momentum from the monotone iterate.
            v = xk.clone();
            xv = xxk.clone();
            t = 1.0;
            anchored = true;
        }
        on_iter(f_xk);

        if it % check_every == 0 || it == opts.max_iter {
            let cert = certify(x, y, lambda, &xk, &xxk);
            last_gap = cert.gap;
            if converged(&cert) {
                return Ok(finish(xk, it, cert));
            }
        }
    }
    Err(Error::SolverMaxIter {
        iterations: opts.max_iter,
        gap: last_gap,
        beta: xk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn random_problem(n: usize, p: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut r = rng::stream(seed);
        let data: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut r)).collect();
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
        (Matrix::from_col_major(n, p, data).unwrap(), y)
    }

    #[test]
    fn lambda_formula() {
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(default_lambda(1.0, 1.0, e).unwrap(), 2.828_427_1, epsilon = 1e-7);
        assert_abs_diff_eq!(default_lambda(0.5, 2.0, e).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(default_lambda(1.0, 1.0, 1000.0).unwrap(), 7.433_844, epsilon = 1e-6);
        assert!(default_lambda(1.0, 1.0, 1.5).is_err());
        assert!(default_lambda(0.0, 1.0, 10.0).is_err());
    }

    #[test]
    fn large_lambda_gives_zero() {
        let (x, y) = random_problem(8, 12, 1);
        let lmax = norm_inf(&x.tr_matvec(&y));
        let sol = solve(&x, &y, lmax * 1.01, &SolverOptions::default()).unwrap();
        assert!(sol.beta_hat.iter().all(|v| *v == 0.0));
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn homotopy_agrees_with_fista() {
        let opts = SolverOptions::default();
        let path = SolverOptions { method: Method::Homotopy, ..opts };
        for seed in 0..20 {
            let (x, y) = random_problem(15, 30, 100 + seed);
            for frac in [0.9, 0.5, 0.1, 0.01] {
                let lambda = frac * norm_inf(&x.tr_matvec(&y));
                let a = solve(&x, &y, lambda, &opts).unwrap();
                let b = solve(&x, &y, lambda, &path).unwrap();
                assert_abs_diff_eq!(a.objective, b.objective, epsilon = 1e-8 * a.objective.max(1.0));
                assert!(b.kkt_infinity <= lambda * (1.0 + opts.kkt_tol));
            }
        }
    }

    #[test]
    fn homotopy_on_identity() {
        let x = Matrix::identity(4);
        let y = vec![2.0, -0.3, 0.9, -1.5];
        let opts = SolverOptions { method: Method::Homotopy, ..SolverOptions::default() };
        let sol = solve(&x, &y, 0.5, &opts).unwrap();
        assert_eq!(sol.beta_hat, vec![1.5, 0.0, 0.4, -1.0]);
        assert_eq!(sol.iterations, 3);
    }

    #[test]
    fn orthonormal_design_is_soft_threshold() {
        let x = Matrix::identity(5);
        let y = vec![3.0, -0.5, 1.2, -2.0, 0.0];
        let sol = solve(&x, &y, 1.0, &SolverOptions::default()).unwrap();
        for (b, yi) in sol.beta_hat.iter().zip(&y) {
            let expected = yi.signum() * (yi.abs() - 1.0).max(0.0);
            assert_abs_diff_eq!(*b, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn certificate_and_stationarity() {
        let (x, y) = random_problem(10, 25, 2);
        let lambda = 0.3 * norm_inf(&x.tr_matvec(&y));
        let opts = SolverOptions::default();
        let sol = solve(&x, &y, lambda, &opts).unwrap();
        assert!(sol.duality_gap <= opts.tol * sol.objective.max(1.0));
        assert!(sol.duality_gap >= -1e-12);
        assert!(sol.kkt_infinity <= lambda * (1.0 + opts.kkt_tol));
        assert_abs_diff_eq!(sol.objective, objective(&x, &y, lambda, &sol.beta_hat), epsilon = 1e-10);
        let g = x.tr_matvec(&linalg::sub(&y, &x.matvec(&sol.beta_hat)));
        for (b, gj) in sol.beta_hat.iter().zip(&g) {
            if b.abs() > 1e-6 {
                assert!((gj - lambda * b.signum()).abs() <= 1e-3 * lambda, "{gj} vs {b}");
            }
        }
    }

    #[test]
    fn objective_trace_is_monotone() {
        let (x, y) = random_problem(15, 30, 3);
        let lambda = 0.1 * norm_inf(&x.tr_matvec(&y));
        let mut trace = Vec::new();
        solve_from(&x, &y, lambda, &SolverOptions::default(), None, |f| trace.push(f)).unwrap();
        assert!(trace.len() > 2);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn warm_start_at_solution_stops() {
        let (x, y) = random_problem(12, 20, 4);
        let lambda = 0.2 * norm_inf(&x.tr_matvec(&y));
        let opts = SolverOptions::default();
        let sol = solve(&x, &y, lambda, &opts).unwrap();
        let again = solve_from(&x, &y, lambda, &opts, Some(&sol.beta_hat), |_| {}).unwrap();
        assert!(again.iterations <= 2);
        assert_abs_diff_eq!(again.objective, sol.objective, epsilon = 1e-10);
    }

    #[test]
    fn scaling_covariance() {
        let (x, y) = random_problem(12, 20, 5);
        let lambda = 0.2 * norm_inf(&x.tr_matvec(&y));
        let opts = SolverOptions { tol: 1e-14, ..SolverOptions::default() };
        let base = solve(&x, &y, lambda, &opts).unwrap();
        for c in [2.0, 10.0] {
            let yc: Vec<f64> = y.iter().map(|v| c * v).collect();
            let sc = solve(&x, &yc, c * lambda, &opts).unwrap();
            for (a, b) in sc.beta_hat.iter().zip(&base.beta_hat) {
                assert_abs_diff_eq!(*a, c * b, epsilon = 1e-8 * c.max(1.0));
            }
        }
    }

    #[test]
    fn max_iter_failure_carries_iterate() {
        let (x, y) = random_problem(10, 30, 6);
        let lambda = 0.01 * norm_inf(&x.tr_matvec(&y));
        let opts = SolverOptions { max_iter: 3, tol: 1e-15, ..SolverOptions::default() };
        match solve(&x, &y, lambda, &opts) {
            Err(Error::SolverMaxIter { beta, iterations: 3, .. }) => assert_eq!(beta.len(), 30),
            other => panic!("expected max-iter failure, got {other:?}"),
        }
    }

    #[test]
    fn bad_inputs() {
        let (x, mut y) = random_problem(4, 6, 7);
        assert!(solve(&x, &y, 0.0, &SolverOptions::default()).is_err());
        y[0] = f64::NAN;
        assert_eq!(
            solve(&x, &y, 1.0, &SolverOptions::default()),
            Err(Error::NonFinite("response"))
        );
    }

    #[test]
    fn prediction_error_examples() {
        let x = Matrix::identity(2);
        assert_eq!(prediction_error(&x, &[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(prediction_error(&x, &[0.0, 0.0], &[3.0, 4.0]), 12.5);
        let (x, _) = random_problem(5, 7, 8);
        let b: Vec<f64> = (0..7).map(|i| i as f64 * 0.3).collect();
        let bh: Vec<f64> = (0..7).map(|i| 1.0 - i as f64 * 0.1).collect();
        let d = linalg::sub(&x.matvec(&bh), &x.matvec(&b));
        assert_abs_diff_eq!(prediction_error(&x, &b, &bh), 0.5 * dot(&d, &d), epsilon = 1e-12);
    }
}
