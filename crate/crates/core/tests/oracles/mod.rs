//! Reference implementations written without the library's numerics, used
//! to cross-check it.
#![allow(dead_code, clippy::needless_range_loop)]

use mixlasso::linalg::Matrix;

fn columns(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.cols()).map(|j| (0..x.rows()).map(|i| x.get(i, j)).collect()).collect()
}

fn ip(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k].abs() < 1e-300 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub struct LassoOracle {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
}

fn objective_and_gap(cols: &[Vec<f64>], y: &[f64], lambda: f64, b: &[f64]) -> (f64, f64) {
    let mut r = y.to_vec();
    for (c, bj) in cols.iter().zip(b) {
        for (ri, ci) in r.iter_mut().zip(c) {
            *ri -= bj * ci;
        }
    }
    let corr = cols.iter().map(|c| ip(c, &r).abs()).fold(0.0, f64::max);
    let scale = if corr > lambda { lambda / corr } else { 1.0 };
    let primal = 0.5 * ip(&r, &r) + lambda * b.iter().map(|v| v.abs()).sum::<f64>();
    // Dual value at θ = scale·r: ½‖y‖² − ½‖y − θ‖².
    let diff: Vec<f64> = y.iter().zip(&r).map(|(yi, ri)| yi - scale * ri).collect();
    let dual = 0.5 * ip(y, y) - 0.5 * ip(&diff, &diff);
    (primal, primal - dual)
}

/// Projected gradient on the split problem `b = u − v`, `u, v ≥ 0`, with
/// step `1/(2‖X‖_F²)`, finished by an exact solve on the detected support.
pub fn lasso(x: &Matrix, y: &[f64], lambda: f64, target_gap: f64) -> LassoOracle {
    let cols = columns(x);
    let p = cols.len();
    let fro: f64 = cols.iter().map(|c| ip(c, c)).sum();
    let step = 1.0 / (2.0 * fro);
    let mut u = vec![0.0; p];
    let mut v = vec![0.0; p];
    let mut b = vec![0.0; p];
    for it in 0..2_000_000 {
        let mut r = y.to_vec();
        for (c, bj) in cols.iter().zip(&b) {
            for (ri, ci) in r.iter_mut().zip(c) {
                *ri -= bj * ci;
            }
        }
        for j in 0..p {
            let g = -ip(&cols[j], &r);
            u[j] = (u[j] - step * (g + lambda)).max(0.0);
            v[j] = (v[j] - step * (-g + lambda)).max(0.0);
            b[j] = u[j] - v[j];
        }
        if it % 200 == 0 {
            if let Some(done) = polish(&cols, y, lambda, &b, target_gap) {
                return done;
            }
        }
    }
    let (objective, gap) = objective_and_gap(&cols, y, lambda, &b);
    LassoOracle { beta: b, objective, gap }
}

fn polish(cols: &[Vec<f64>], y: &[f64], lambda: f64, b: &[f64], target_gap: f64) -> Option<LassoOracle> {
    let support: Vec<usize> = (0..b.len()).filter(|&j| b[j].abs() > 1e-12).collect();
    let signs: Vec<f64> = support.iter().map(|&j| b[j].signum()).collect();
    let a: Vec<Vec<f64>> = support
        .iter()
        .map(|&i| support.iter().map(|&j| ip(&cols[i], &cols[j])).collect())
        .collect();
    let rhs: Vec<f64> = support
        .iter()
        .zip(&signs)
        .map(|(&j, s)| ip(&cols[j], y) - lambda * s)
        .collect();
    let sol = gauss_solve(a, rhs)?;
    if sol.iter().zip(&signs).any(|(v, s)| v * s < 0.0) {
        return None;
    }
    let mut out = vec![0.0; b.len()];
    for (&j, v) in support.iter().zip(sol) {
        out[j] = v;
    }
    let (objective, gap) = objective_and_gap(cols, y, lambda, &out);
    (gap <= target_gap).then_some(LassoOracle { beta: out, objective, gap })
}

/// Classical Gram–Schmidt on the columns of a row-major `n x k` array.
pub fn orthonormalize(n: usize, k: usize, row_major: &[f64]) -> Matrix {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for j in 0..k {
        let mut v: Vec<f64> = (0..n).map(|i| row_major[i * k + j]).collect();
        for _ in 0..2 {
            for e in &q {
                let d = ip(e, &v);
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= d * ei;
                }
            }
        }
        let nv = ip(&v, &v).sqrt();
        q.push(v.into_iter().map(|t| t / nv).collect());
    }
    let rm: Vec<f64> = (0..n).flat_map(|i| q.iter().map(move |c| c[i]).collect::<Vec<_>>()).collect();
    Matrix::new(n, k, rm).unwrap()
}

/// Inputs of the constant formulas.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub n: f64,
    pub p: f64,
    pub s: f64,
    pub s_star: f64,
    pub sf: f64,
    pub alpha: f64,
    pub r: f64,
    pub c: f64,
    pub c_chi: f64,
    pub theta: f64,
    pub nu: f64,
    pub rho: f64,
    pub c_int: f64,
}

pub struct Constants {
    pub c_mu: f64,
    pub c_spar: f64,
    pub c_col: f64,
    pub r_max: f64,
    pub mu_max: f64,
    pub sigma_max_sq: f64,
    pub q: f64,
    pub k: f64,
    pub mu_star_max: f64,
    pub sigma_star_max_sq: f64,
    pub r_star_max: f64,
    pub r_lower_star: f64,
    pub delta: f64,
}

pub fn constants(t: &Point) -> Constants {
    let lp = t.p.ln();
    let e = 1f64.exp();
    let q = ((t.alpha * (1.0 - 1.0 / e) / (t.theta * t.c_chi)).ln() - (t.nu - 1.0) * lp.ln()) / t.n;
    let q = q.exp();
    let shrink = 1.0 - t.sf * (t.n * q).sqrt();
    let k = (t.alpha * t.n * lp * q).sqrt();
    let r_max = 1.0 + t.sf * (t.n.sqrt() + (t.alpha * lp / t.c + t.s.ln() / t.c).sqrt());
    let mu_max = t.sf * (t.n.sqrt() + t.s.sqrt() + (2.0 * t.alpha * lp).sqrt()) / 2.0;
    let r_star_max = 1.0 / shrink;
    let mu_star_max = t.sf * k;
    let union = (t.alpha * lp + (2.0 * t.n + 2.0).ln()).sqrt();
    let d1 = 4.0 * t.sf * (t.n.sqrt() + (t.alpha / t.c * lp + t.s.ln() / t.c).sqrt())
        * (1.0 + 8.0 * 2f64.sqrt() * union * (t.s_star * t.rho).sqrt());
    let d2 = (12.0 * t.c_int * t.sf * t.n.sqrt() * r_max + t.alpha * lp * mu_max) * (t.s_star * t.rho).sqrt();
    let d3 = 4.0 * t.sf * (t.n * q).sqrt() * (1.0 + 2.0 * 2f64.sqrt() * t.rho.sqrt() * union);
    let d4 = (24.0 * r_star_max * t.sf * q.sqrt() * t.c_int + mu_star_max * t.alpha * lp) * t.rho.sqrt();
    Constants {
        c_mu: t.r / (1.0 + t.alpha),
        c_spar: t.r.powi(2) / ((1.0 + t.alpha) * e * e),
        c_col: (2f64.sqrt() / ((1.0 - t.r) * (1.0 + t.alpha)).sqrt() - (1.0 + t.r)) / 2.0,
        r_max,
        mu_max,
        sigma_max_sq: t.s.sqrt() * t.sf.powi(2) / 2.0,
        q,
        k,
        mu_star_max,
        sigma_star_max_sq: q / shrink * t.s_star.sqrt() * t.sf.powi(2),
        r_star_max,
        r_lower_star: 1.21 * t.r + 0.121 * t.r * t.r,
        delta: d1 + d2 + d3 + d4,
    }
}

pub fn rhs(s_star: f64, r_lower_star: f64, lambda: f64, delta: f64, center: f64, signal: f64) -> f64 {
    let first = s_star * 1.5 * r_lower_star * lambda * (1.5 * lambda + (1.0 + r_lower_star).sqrt() * delta * center);
    first + delta * delta * signal * signal / 2.0
}
