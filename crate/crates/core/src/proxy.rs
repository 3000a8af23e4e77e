//! Ground truth and the cluster-representative proxy `β*`.
//!
//! Every active cluster `k` gets a representative `j*_k`, the member column
//! closest to its center. `β*` puts, on each representative, the sum of the
//! true coefficients that live in the same cluster, so that
//! `centers[K_T*] β*_T* = centers[K_T] β_T`.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, norm2, Matrix};
use crate::mixture::{CenterMatrix, DesignInstance};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SupportRule {
    /// At most one true coefficient per active cluster, placed uniformly
    /// inside the cluster.
    #[default]
    OnePerCluster,
    /// Uniform `s`-subset of all columns; several coefficients may share a
    /// cluster.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MagnitudeRule {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl Default for MagnitudeRule {
    fn default() -> Self {
        MagnitudeRule::Constant { value: 1.0 }
    }
}

impl MagnitudeRule {
    fn sample(&self, rng: &mut Stream) -> f64 {
        match *self {
            MagnitudeRule::Constant { value } => value,
            MagnitudeRule::Uniform { low, high } => rng.random_range(low..=high),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            MagnitudeRule::Constant { value } => value.is_finite() && value > 0.0,
            MagnitudeRule::Uniform { low, high } => low.is_finite() && high.is_finite() && 0.0 < low && low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad magnitude rule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub beta: Vec<f64>,
    /// Support `T`, increasing.
    pub support: Vec<usize>,
    pub sigma: f64,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
}

impl GroundTruth {
    /// Assembles `y = Xβ + z`.
    pub fn new(x: &Matrix, beta: Vec<f64>, sigma: f64, z: Vec<f64>) -> Result<Self> {
        if beta.len() != x.cols() || z.len() != x.rows() {
            return Err(Error::Dimension("beta/z do not match the design".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
        }
        let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
        if support.is_empty() {
            return Err(Error::InvalidParameter("beta has empty support".into()));
        }
        let y = x.matvec(&beta).iter().zip(&z).map(|(a, b)| a + b).collect();
        Ok(Self {
            beta,
            support,
            sigma,
            z,
            y,
        })
    }

    pub fn s(&self) -> usize {
        self.support.len()
    }
}

/// Draws `β`, the noise and the response for one instance.
pub fn sample_ground_truth(
    inst: &DesignInstance,
    s: usize,
    support_rule: SupportRule,
    magnitude: MagnitudeRule,
    sigma: f64,
    rng: &mut Stream,
) -> Result<GroundTruth> {
    magnitude.validate()?;
    if s == 0 {
        return Err(Error::InvalidParameter("support size must be >= 1".into()));
    }
    let p = inst.p();
    let mut support = match support_rule {
        SupportRule::OnePerCluster => {
            let filled: Vec<usize> = inst
                .active_set
                .iter()
                .copied()
                .filter(|&k| !inst.clusters[k].is_empty())
                .collect();
            if s > filled.len() {
                return Err(Error::SupportTooLarge {
                    requested: s,
                    available: filled.len(),
                });
            }
            let mut picked = index::sample(rng, filled.len(), s).into_vec();
            picked.sort_unstable();
            picked
                .into_iter()
                .map(|i| {
                    let members = &inst.clusters[filled[i]];
                    members[rng.random_range(0..members.len())]
                })
                .collect::<Vec<_>>()
        }
        SupportRule::Uniform => {
            if s > p {
                return Err(Error::SupportTooLarge {
                    requested: s,
                    available: p,
                });
            }
            index::sample(rng, p, s).into_vec()
        }
    };
    support.sort_unstable();

    let mut beta = vec![0.0; p];
    for &j in &support {
        let m = magnitude.sample(rng);
        beta[j] = if rng.random_bool(0.5) { m } else { -m };
    }
    let z: Vec<f64> = (0..inst.n())
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    GroundTruth::new(&inst.x, beta, sigma, z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyVector {
    /// `T*`, one representative per active cluster, increasing.
    pub support_t_star: Vec<usize>,
    /// Full-length `β*`, zero off `T*`.
    pub beta_star: Vec<f64>,
    pub representative_of: BTreeMap<usize, usize>,
    /// Number of distinct clusters hit by the true support.
    pub clusters_hit: usize,
}

impl ProxyVector {
    pub fn s_star(&self) -> usize {
        self.support_t_star.len()
    }

    pub fn beta_star_on_support(&self) -> Vec<f64> {
        self.support_t_star.iter().map(|&j| self.beta_star[j]).collect()
    }
}

/// `j*_k = argmin_{j ∈ J_k} ‖X_j − centers_k‖₂` for every active cluster,
/// ties to the smallest column index.
pub fn best_representatives(
    inst: &DesignInstance,
    centers: &CenterMatrix,
) -> Result<BTreeMap<usize, usize>> {
    let mut reps = BTreeMap::new();
    for &k in &inst.active_set {
        let c = centers.center(k);
        let mut best: Option<(usize, f64)> = None;
        for &j in &inst.clusters[k] {
            let d = norm2(&linalg::sub(inst.x.col(j), c));
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.ok_or(Error::EmptyCluster(k))?;
        reps.insert(k, j);
    }
    Ok(reps)
}

/// `β*_{j*} = Σ_{j ∈ J_{k_{j*}} ∩ T} β_j` on every representative.
pub fn build_beta_star(
    truth: &GroundTruth,
    inst: &DesignInstance,
    reps: &BTreeMap<usize, usize>,
) -> Result<ProxyVector> {
    let mut beta_star = vec![0.0; inst.p()];
    let mut hit = std::collections::BTreeSet::new();
    for &j in &truth.support {
        let k = inst.labels[j];
        let rep = *reps.get(&k).ok_or_else(|| {
            Error::InvalidParameter(format!("no representative for cluster {k}"))
        })?;
        beta_star[rep] += truth.beta[j];
        hit.insert(k);
    }
    let mut support_t_star: Vec<usize> = reps.values().copied().collect();
    support_t_star.sort_unstable();
    Ok(ProxyVector {
        support_t_star,
        beta_star,
        representative_of: reps.clone(),
        clusters_hit: hit.len(),
    })
}

/// `‖Xβ − Xβ*‖₂`.
pub fn proxy_discrepancy(x: &Matrix, beta: &[f64], beta_star: &[f64]) -> f64 {
    norm2(&x.matvec(&linalg::sub(beta, beta_star)))
}

/// `Σ_{j ∈ T} β_j centers_{k_j}`.
pub fn center_combination(centers: &CenterMatrix, inst: &DesignInstance, truth: &GroundTruth) -> Vec<f64> {
    let mut v = vec![0.0; centers.n()];
    for &j in &truth.support {
        linalg::axpy(truth.beta[j], centers.center(inst.labels[j]), &mut v);
    }
    v
}

/// `Σ_{j* ∈ T*} β*_{j*} centers_{k_{j*}}`.
pub fn proxy_center_combination(centers: &CenterMatrix, inst: &DesignInstance, proxy: &ProxyVector) -> Vec<f64> {
    let mut v = vec![0.0; centers.n()];
    for &j in &proxy.support_t_star {
        linalg::axpy(proxy.beta_star[j], centers.center(inst.labels[j]), &mut v);
    }
    v
}
