//! Experiment configuration: a versioned TOML file with `key=value`
//! overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::{Method, SolverOptions};
use crate::mixture::MixtureSpec;
use crate::proxy::{MagnitudeRule, SupportRule};
use crate::theory::{fitted_c_chi, TheoremParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Default output directory when neither `--out` nor the config set one.
pub const OUT_ENV: &str = "MIXLASSO_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub mixture: MixtureSpec,
    pub theory: TheorySection,
    pub centers: CenterSection,
    pub truth: TruthSection,
    pub solver: SolverSection,
    pub experiment: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySection {
    pub alpha: f64,
    pub r: f64,
    pub vartheta_star: f64,
    pub nu: u32,
    /// Fitted at the configured `n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_chi: Option<f64>,
    pub c_dev_big: f64,
    pub c_dev_small: f64,
    pub rho_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterSource {
    Gaussian,
    Orthonormal,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CenterSection {
    pub source: CenterSource,
    /// JSON file holding an encoded `n x K` matrix, for `source = "file"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub redraw_per_trial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    /// `|T|`.
    pub s: usize,
    pub support: SupportRule,
    pub magnitude: MagnitudeRule,
    /// Noise standard deviation.
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub method: Method,
    /// Overrides `2σ√(2α log p)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default = "default_kkt_tol")]
    pub kkt_tol: f64,
}

fn default_kkt_tol() -> f64 {
    SolverOptions::default().kkt_tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub trials: usize,
    pub master_seed: u64,
    /// Concurrent trials; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// `n = 200, p = 2000, K = 40, s* = 8, 𝔰 = 1e-3, α = 1, r = 0.2` with
    /// orthonormal centers and one unit coefficient per active cluster under
    /// noise level 0.05.
    pub fn reference() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            mixture: MixtureSpec {
                n: 200,
                p: 2000,
                k: 40,
                s_star: 8,
                sigma_frak: 1e-3,
                weights: None,
            },
            theory: TheorySection {
                alpha: 1.0,
                r: 0.2,
                vartheta_star: 1.0,
                nu: 2,
                c_chi: None,
                c_dev_big: 2.0,
                c_dev_small: 0.5,
                rho_c: 2.0,
            },
            centers: CenterSection {
                source: CenterSource::Orthonormal,
                path: None,
                redraw_per_trial: false,
            },
            truth: TruthSection {
                s: 8,
                support: SupportRule::OnePerCluster,
                magnitude: MagnitudeRule::Constant { value: 1.0 },
                sigma: 0.05,
            },
            solver: SolverSection {
                method: Method::Homotopy,
                lambda: None,
                tol: 1e-9,
                max_iter: 50_000,
                kkt_tol: default_kkt_tol(),
            },
            experiment: RunSection {
                trials: 1000,
                master_seed: 42,
                workers: 0,
            },
            output: OutputSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_value(toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?)
    }

    fn from_value(v: toml::Value) -> Result<Self> {
        let cfg: Self = v.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is representable in TOML")
    }

    /// Applies `section.key=value` overrides. Values are parsed as TOML
    /// literals, falling back to a bare string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let value = parse_literal(raw.trim());
            let path: Vec<&str> = key.trim().split('.').collect();
            set_path(&mut root, &path, value).map_err(|m| Error::Config(format!("override `{item}`: {m}")))?;
        }
        Self::from_value(root)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.experiment.trials == 0 {
            return Err(Error::Config("experiment.trials must be >= 1".into()));
        }
        if !(self.truth.sigma > 0.0) {
            return Err(Error::Config("truth.sigma must be > 0".into()));
        }
        if self.truth.s == 0 {
            return Err(Error::Config("truth.s must be >= 1".into()));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(Error::Config("solver.tol and solver.max_iter must be positive".into()));
        }
        if let Some(l) = self.solver.lambda {
            if !(l > 0.0) {
                return Err(Error::Config("solver.lambda must be > 0".into()));
            }
        }
        if self.centers.source == CenterSource::File && self.centers.path.is_none() {
            return Err(Error::Config("centers.source = \"file\" needs centers.path".into()));
        }
        // Mixture and theory problems surface per trial as failed records.
        Ok(())
    }

    pub fn theorem_params(&self) -> Result<TheoremParams> {
        let t = &self.theory;
        let c_chi = match t.c_chi {
            Some(c) => c,
            None => fitted_c_chi(self.mixture.n)?,
        };
        let p = TheoremParams {
            alpha: t.alpha,
            r: t.r,
            vartheta_star: t.vartheta_star,
            nu: t.nu,
            c_chi,
            c_dev_big: t.c_dev_big,
            c_dev_small: t.c_dev_small,
            rho_c: t.rho_c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            kkt_tol: self.solver.kkt_tol,
            method: self.solver.method,
            ..SolverOptions::default()
        }
    }

    /// `--out`, then the config, then the environment, then `mixlasso-out`.
    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("mixlasso-out"))
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(root: &mut toml::Value, path: &[&str], value: toml::Value) -> std::result::Result<(), String> {
    let (last, parents) = path.split_last().ok_or("empty key")?;
    let mut cur = root;
    for seg in parents {
        cur = cur
            .as_table_mut()
            .ok_or_else(|| format!("`{seg}` is not inside a table"))?
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = cur.as_table_mut().ok_or("parent is not a table")?;
    // Integers given for float fields are widened by the typed decode.
    let value = match (table.get(*last), value) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    table.insert(last.to_string(), value);
    Ok(())
}
