//! Gaussian-mixture design generator.
//!
//! A draw proceeds as: pick the active cluster set uniformly among
//! `s_star`-subsets of `0..k`, give every column an i.i.d. label from the
//! mixture weights on that set, perturb the labelled center by
//! `N(0, sigma_frak² I_n)`, and normalize the column.

use rand::seq::index;
use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::encoding::EncodedMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, norm2, Matrix, COLUMN_NORM_FLOOR};
use crate::rng::{self, Stream};

const UNIT_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    /// Ambient dimension.
    pub n: usize,
    /// Number of columns.
    pub p: usize,
    /// Number of clusters.
    pub k: usize,
    /// Number of active clusters.
    pub s_star: usize,
    /// Standard deviation of every mixture component.
    pub sigma_frak: f64,
    /// Mixture weights over the active set, in increasing cluster order.
    /// `None` means uniform.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl MixtureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if self.s_star == 0 || self.k == 0 || self.k > self.p {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= s_star, 1 <= k <= p (s_star={}, k={}, p={})",
                self.s_star, self.k, self.p
            )));
        }
        if self.s_star > self.k {
            return Err(Error::ActiveSetTooLarge {
                s_star: self.s_star,
                k: self.k,
            });
        }
        if !(self.sigma_frak >= 0.0) || !self.sigma_frak.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma_frak must be finite and >= 0, got {}",
                self.sigma_frak
            )));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.s_star {
                return Err(Error::InvalidParameter(format!(
                    "{} weights given for {} active clusters",
                    w.len(),
                    self.s_star
                )));
            }
            if w.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidParameter("negative mixture weight".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "mixture weights sum to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Cluster centers with unit-norm columns, plus cached coherence and
/// operator norm.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterMatrix {
    pub centers: Matrix,
    pub coherence_mu: f64,
    pub op_norm: f64,
}

impl CenterMatrix {
    pub fn new(centers: Matrix) -> Result<Self> {
        for (j, c) in centers.columns().enumerate() {
            let nrm = norm2(c);
            if (nrm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidParameter(format!(
                    "center {j} has norm {nrm}, expected 1"
                )));
            }
        }
        let coherence_mu = if centers.cols() >= 2 {
            linalg::coherence(&centers)?
        } else {
            0.0
        };
        let op_norm = linalg::operator_norm(&centers)?;
        Ok(Self {
            centers,
            coherence_mu,
            op_norm,
        })
    }

    pub fn k(&self) -> usize {
        self.centers.cols()
    }

    pub fn n(&self) -> usize {
        self.centers.rows()
    }

    pub fn center(&self, k: usize) -> &[f64] {
        self.centers.col(k)
    }
}

fn gaussian_matrix(n: usize, k: usize, scale: f64, rng: &mut Stream) -> Vec<f64> {
    (0..n * k)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect::<Vec<f64>>()
}

/// Centers with i.i.d. `N(0, 1/n)` entries, normalized column-wise.
pub fn gaussian_centers(n: usize, k: usize, rng: &mut Stream) -> Result<CenterMatrix> {
    if n < 2 || k < 2 {
        return Err(Error::InvalidParameter(format!(
            "gaussian centers need n >= 2 and k >= 2 (n={n}, k={k})"
        )));
    }
    loop {
        let raw = Matrix::from_col_major(n, k, gaussian_matrix(n, k, 1.0 / (n as f64).sqrt(), rng))?;
        match linalg::normalize_columns(&raw) {
            Ok(m) => return CenterMatrix::new(m),
            // Zero-measure event; draw again from the continuing stream.
            Err(Error::DegenerateColumn { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Random orthonormal centers (`k <= n`): Gram-Schmidt, applied twice, on a
/// Gaussian matrix. Coherence is zero up to rounding.
pub fn orthonormal_centers(n: usize, k: usize, rng: &mut Stream) -> Result<CenterMatrix> {
    if k > n || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "orthonormal centers need 1 <= k <= n (n={n}, k={k})"
        )));
    }
    let raw = gaussian_matrix(n, k, 1.0, rng);
    let mut cols: Vec<Vec<f64>> = raw.chunks_exact(n).map(|c| c.to_vec()).collect();
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let (head, tail) = cols.split_at_mut(j);
                let proj = linalg::dot(&head[i], &tail[0]);
                linalg::axpy(-proj, &head[i], &mut tail[0]);
            }
        }
        let nrm = norm2(&cols[j]);
        if !(nrm > COLUMN_NORM_FLOOR) {
            return Err(Error::DegenerateColumn {
                index: j,
                norm: nrm,
                floor: COLUMN_NORM_FLOOR,
            });
        }
        cols[j].iter_mut().for_each(|v| *v /= nrm);
    }
    CenterMatrix::new(Matrix::from_columns(n, &cols)?)
}

/// Uniform `s_star`-subset of `0..k`, sorted increasingly.
pub fn draw_active_set(k: usize, s_star: usize, rng: &mut Stream) -> Result<Vec<usize>> {
    if s_star == 0 || s_star > k {
        return Err(Error::ActiveSetTooLarge { s_star, k });
    }
    let mut set = index::sample(rng, k, s_star).into_vec();
    set.sort_unstable();
    Ok(set)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignInstance {
    pub seed: u64,
    pub sigma_frak: f64,
    /// Raw draws `centers[labels] + e`.
    pub x_o: Matrix,
    /// Column-normalized `x_o`.
    pub x: Matrix,
    /// Deviations from the labelled centers.
    pub e: Matrix,
    pub labels: Vec<usize>,
    /// `clusters[k]` lists the columns labelled `k`, increasing; empty for
    /// inactive clusters.
    pub clusters: Vec<Vec<usize>>,
    pub active_set: Vec<usize>,
    /// Column count per active cluster, aligned with `active_set`.
    pub counts: Vec<usize>,
}

impl DesignInstance {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    /// `‖centers_{k_j} + E_j‖₂`, the normalizing factor of column `j`.
    pub fn raw_norm(&self, j: usize) -> f64 {
        norm2(self.x_o.col(j))
    }

    fn assemble(
        seed: u64,
        sigma_frak: f64,
        centers: &CenterMatrix,
        e: Matrix,
        labels: Vec<usize>,
        active_set: Vec<usize>,
    ) -> Result<Self> {
        let (n, p) = (e.rows(), e.cols());
        let mut x_o = Vec::with_capacity(n * p);
        for (j, &k) in labels.iter().enumerate() {
            x_o.extend(centers.center(k).iter().zip(e.col(j)).map(|(c, d)| c + d));
        }
        let x_o = Matrix::from_col_major(n, p, x_o)?;
        let x = linalg::normalize_columns(&x_o)?;
        let mut clusters = vec![Vec::new(); centers.k()];
        for (j, &k) in labels.iter().enumerate() {
            clusters[k].push(j);
        }
        let counts = active_set.iter().map(|&k| clusters[k].len()).collect();
        Ok(Self {
            seed,
            sigma_frak,
            x_o,
            x,
            e,
            labels,
            clusters,
            active_set,
            counts,
        })
    }
}

/// Draws one design instance from the stream seeded by `seed`.
pub fn sample_design(spec: &MixtureSpec, centers: &CenterMatrix, seed: u64) -> Result<DesignInstance> {
    spec.validate()?;
    if centers.k() != spec.k || centers.n() != spec.n {
        return Err(Error::Dimension(format!(
            "centers are {}x{}, spec wants {}x{}",
            centers.n(),
            centers.k(),
            spec.n,
            spec.k
        )));
    }
    let mut rng = rng::stream(seed);
    let active_set = draw_active_set(spec.k, spec.s_star, &mut rng)?;
    let picker = match &spec.weights {
        Some(w) => Some(
            WeightedIndex::new(w)
                .map_err(|e| Error::InvalidParameter(format!("mixture weights: {e}")))?,
        ),
        None => None,
    };

    let (n, p, s) = (spec.n, spec.p, spec.sigma_frak);
    let mut labels = Vec::with_capacity(p);
    let mut e = Vec::with_capacity(n * p);
    for j in 0..p {
        let slot = match &picker {
            Some(w) => rng.sample(w),
            None => rng.random_range(0..spec.s_star),
        };
        let k = active_set[slot];
        let c = centers.center(k);
        let mut accepted = false;
        for _attempt in 0..2 {
            let dev: Vec<f64> = (0..n)
                .map(|_| s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let raw: Vec<f64> = c.iter().zip(&dev).map(|(a, b)| a + b).collect();
            if norm2(&raw) > COLUMN_NORM_FLOOR {
                e.extend(dev);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::ResampleFailed { column: j, seed });
        }
        labels.push(k);
    }
    let e = Matrix::from_col_major(n, p, e)?;
    DesignInstance::assemble(seed, s, centers, e, labels, active_set)
}

/// On-disk form of a design instance. Matrices are optional: without them
/// the instance is regenerated from the seeds and the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub schema: String,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub s_star: usize,
    pub sigma_frak: f64,
    pub seed: u64,
    pub labels: Vec<usize>,
    pub active_set: Vec<usize>,
    pub counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<EncodedMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deviations: Option<EncodedMatrix>,
}

pub const DESIGN_SCHEMA: &str = "mixlasso.design/1";

impl DesignRecord {
    pub fn from_instance(inst: &DesignInstance, centers: &CenterMatrix, embed: bool) -> Self {
        Self {
            schema: DESIGN_SCHEMA.to_string(),
            n: inst.n(),
            p: inst.p(),
            k: centers.k(),
            s_star: inst.active_set.len(),
            sigma_frak: inst.sigma_frak,
            seed: inst.seed,
            labels: inst.labels.clone(),
            active_set: inst.active_set.clone(),
            counts: inst.counts.clone(),
            centers: embed.then(|| EncodedMatrix::encode(&centers.centers)),
            deviations: embed.then(|| EncodedMatrix::encode(&inst.e)),
        }
    }

    /// Rebuilds the instance from embedded matrices. `X_o` is recomputed as
    /// `centers[labels] + E`, which reproduces the original bits.
    pub fn to_instance(&self) -> Result<(DesignInstance, CenterMatrix)> {
        if self.schema != DESIGN_SCHEMA {
            return Err(Error::Config(format!("unknown design schema {}", self.schema)));
        }
        let (Some(c), Some(e)) = (&self.centers, &self.deviations) else {
            return Err(Error::Config(
                "design record has no embedded matrices; regenerate it from the config".into(),
            ));
        };
        let centers = CenterMatrix::new(c.decode()?)?;
        let e = e.decode()?;
        if e.rows() != self.n || e.cols() != self.p || self.labels.len() != self.p {
            return Err(Error::Dimension("design record dimensions disagree".into()));
        }
        if self.labels.iter().any(|&k| k >= centers.k()) {
            return Err(Error::Dimension("label outside the center range".into()));
        }
        let inst = DesignInstance::assemble(
            self.seed,
            self.sigma_frak,
            &centers,
            e,
            self.labels.clone(),
            self.active_set.clone(),
        )?;
        Ok((inst, centers))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn spec(n: usize, p: usize, k: usize, s_star: usize, sigma: f64) -> MixtureSpec {
        MixtureSpec {
            n,
            p,
            k,
            s_star,
            sigma_frak: sigma,
            weights: None,
        }
    }

    #[test]
    fn active_set_full_draw() {
        let mut r = rng::stream(1);
        assert_eq!(draw_active_set(5, 5, &mut r).unwrap(), vec![0, 1, 2, 3, 4]);
        assert!(matches!(
            draw_active_set(3, 4, &mut r),
            Err(Error::ActiveSetTooLarge { s_star: 4, k: 3 })
        ));
    }

    #[test]
    fn active_set_singletons_uniform() {
        let mut r = rng::stream(11);
        let mut counts = [0usize; 5];
        let draws = 100_000;
        for _ in 0..draws {
            counts[draw_active_set(5, 1, &mut r).unwrap()[0]] += 1;
        }
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - 0.2).abs() <= 0.01, "frequency {f}");
        }
    }

    #[test]
    fn active_set_pairs_uniform() {
        let mut r = rng::stream(12);
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        let draws = 100_000;
        for _ in 0..draws {
            *counts.entry(draw_active_set(4, 2, &mut r).unwrap()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            let f = *c as f64 / draws as f64;
            assert!((f - 1.0 / 6.0).abs() <= 0.01, "frequency {f}");
        }
    }

    #[test]
    fn zero_variance_columns_are_centers() {
        let mut r = rng::stream(3);
        let centers = gaussian_centers(10, 4, &mut r).unwrap();
        let inst = sample_design(&spec(10, 30, 4, 3, 0.0), &centers, 5).unwrap();
        for j in 0..30 {
            let c = centers.center(inst.labels[j]);
            for (a, b) in inst.x.col(j).iter().zip(c) {
                assert!((a - b).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn deviation_norm_matches_chi_mean() {
        let mut r = rng::stream(4);
        let centers = gaussian_centers(50, 3, &mut r).unwrap();
        let inst = sample_design(&spec(50, 10_000, 3, 2, 0.01), &centers, 9).unwrap();
        let mean: f64 = inst.e.columns().map(norm2).sum::<f64>() / 10_000.0;
        let expected = 0.01 * 50f64.sqrt();
        assert!((mean / expected - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn cluster_counts_follow_weights() {
        let mut r = rng::stream(5);
        let centers = gaussian_centers(5, 4, &mut r).unwrap();
        let mut s = spec(5, 10_000, 4, 3, 0.1);
        let w = vec![0.5, 0.3, 0.2];
        s.weights = Some(w.clone());
        let inst = sample_design(&s, &centers, 17).unwrap();
        assert_eq!(inst.counts.iter().sum::<usize>(), 10_000);
        for (c, pk) in inst.counts.iter().zip(&w) {
            let mean = 10_000.0 * pk;
            let sd = (10_000.0 * pk * (1.0 - pk)).sqrt();
            assert!((*c as f64 - mean).abs() <= 3.0 * sd, "count {c} vs {mean}");
        }
    }

    #[test]
    fn instance_invariants_hold() {
        let mut r = rng::stream(6);
        let centers = gaussian_centers(20, 6, &mut r).unwrap();
        let inst = sample_design(&spec(20, 80, 6, 4, 0.05), &centers, 21).unwrap();
        for j in 0..80 {
            let k = inst.labels[j];
            assert!(inst.active_set.contains(&k));
            for i in 0..20 {
                assert_eq!(inst.x_o.get(i, j), centers.centers.get(i, k) + inst.e.get(i, j));
            }
            assert!((norm2(inst.x.col(j)) - 1.0).abs() <= 1e-10);
        }
        let mut seen: Vec<usize> = inst.clusters.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..80).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_deterministic() {
        let mut r = rng::stream(7);
        let centers = gaussian_centers(8, 5, &mut r).unwrap();
        let s = spec(8, 40, 5, 2, 0.2);
        assert_eq!(
            sample_design(&s, &centers, 99).unwrap(),
            sample_design(&s, &centers, 99).unwrap()
        );
    }

    #[test]
    fn gaussian_centers_unit_and_small_case() {
        let mut r = rng::stream(8);
        let c = gaussian_centers(2, 2, &mut r).unwrap();
        assert!((0.0..=1.0).contains(&c.coherence_mu));
        let c = gaussian_centers(30, 7, &mut r).unwrap();
        for col in c.centers.columns() {
            assert!((norm2(col) - 1.0).abs() <= 1e-10);
        }
        assert!(gaussian_centers(1, 3, &mut r).is_err());
    }

    #[test]
    fn orthonormal_centers_are_incoherent() {
        let mut r = rng::stream(9);
        let c = orthonormal_centers(30, 10, &mut r).unwrap();
        assert!(c.coherence_mu < 1e-12);
        assert!((c.op_norm - 1.0).abs() < 1e-9);
        assert!(orthonormal_centers(3, 4, &mut r).is_err());
    }

    #[test]
    fn record_round_trip_reproduces_bits() {
        let mut r = rng::stream(10);
        let centers = gaussian_centers(6, 3, &mut r).unwrap();
        let inst = sample_design(&spec(6, 15, 3, 2, 0.3), &centers, 4).unwrap();
        let rec = DesignRecord::from_instance(&inst, &centers, true);
        let json = serde_json::to_string(&rec).unwrap();
        let back: DesignRecord = serde_json::from_str(&json).unwrap();
        let (inst2, centers2) = back.to_instance().unwrap();
        assert_eq!(inst, inst2);
        assert_eq!(centers.centers, centers2.centers);
        let bare = DesignRecord::from_instance(&inst, &centers, false);
        assert!(bare.to_instance().is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(spec(5, 10, 4, 5, 0.1).validate().is_err());
        assert!(spec(5, 3, 4, 2, 0.1).validate().is_err());
        assert!(spec(5, 10, 4, 2, -0.1).validate().is_err());
        let mut s = spec(5, 10, 4, 2, 0.1);
        s.weights = Some(vec![0.7, 0.2]);
        assert!(s.validate().is_err());
    }
}
