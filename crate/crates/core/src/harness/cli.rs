//! Command-line front end. Exit status: 0 success, 1 usage error, 2 runtime
//! failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::runner;
use super::summary::ExperimentSummary;
use super::trial::{self, TrialContext};
use crate::encoding::{decode_vec, encode_vec};
use crate::error::{Error, Result};
use crate::lasso;
use crate::mixture::DesignRecord;
use crate::proxy::GroundTruth;
use crate::theory::{compute_constants, ProblemSize, TheoremConstants};

#[derive(Debug, Parser)]
#[command(name = "mixlasso", version, about = "LASSO under Gaussian-mixture designs")]
struct Cli {
    /// TOML experiment config; the built-in reference config when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `section.key=value`, applied after the config file.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file (gen, solve, verify) or directory (experiment).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Emit one design instance with its ground truth.
    Gen {
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Reference the matrices by seed instead of embedding them.
        #[arg(long)]
        no_embed: bool,
    },
    /// Solve the LASSO for an instance written by `gen`.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Print the theorem constants for the configured problem size.
    Constants,
    /// Evaluate assumptions and events on one trial.
    Verify {
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Run the full Monte Carlo experiment.
    Experiment {
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Rebuild summary.json and trials.csv from an experiment directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

pub const INSTANCE_SCHEMA: &str = "mixlasso.instance/1";

/// Output of `gen`: the design plus `β`, the noise and the trial coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema: String,
    pub master_seed: u64,
    pub trial_index: u64,
    pub design: DesignRecord,
    pub sigma: f64,
    /// Base64 little-endian doubles.
    pub beta: String,
    pub noise: String,
    pub lambda: f64,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::reference(),
    };
    let mut extra = cli.overrides.clone();
    if let Some(s) = cli.seed {
        extra.push(format!("experiment.master_seed={s}"));
    }
    if let Some(t) = cli.trials {
        extra.push(format!("experiment.trials={t}"));
    }
    base.with_overrides(&extra)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            let mut so = std::io::stdout().lock();
            writeln!(so, "{text}").map_err(|e| Error::Io {
                path: "<stdout>".into(),
                message: e.to_string(),
            })
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn dispatch(cli: Cli) -> Result<()> {
    let out = cli.out.clone();
    match &cli.command {
        Command::Report { dir } => {
            let s = runner::report(dir)?;
            print_summary(&s);
            Ok(())
        }
        Command::Solve { instance, lambda } => {
            let cfg = resolve_config(&cli)?;
            solve_instance(&cfg, instance, *lambda, out.as_deref())
        }
        Command::Gen { trial, no_embed } => {
            let cfg = resolve_config(&cli)?;
            let ctx = TrialContext::new(&cfg)?;
            let draw = trial::draw_trial(&ctx, ctx.trial_seed(*trial))?;
            let file = InstanceFile {
                schema: INSTANCE_SCHEMA.into(),
                master_seed: cfg.experiment.master_seed,
                trial_index: *trial,
                design: DesignRecord::from_instance(&draw.design, &draw.centers, !no_embed),
                sigma: draw.truth.sigma,
                beta: encode_vec(&draw.truth.beta),
                noise: encode_vec(&draw.truth.z),
                lambda: trial::trial_lambda(&ctx, &draw)?,
            };
            emit(out.as_deref(), &json(&file))
        }
        Command::Constants => {
            let cfg = resolve_config(&cli)?;
            let prm = cfg.theorem_params()?;
            let sz = ProblemSize {
                n: cfg.mixture.n,
                p: cfg.mixture.p,
                s: cfg.truth.s,
                s_star: cfg.mixture.s_star,
                sigma_frak: cfg.mixture.sigma_frak,
            };
            let k = compute_constants(&sz, &prm)?;
            emit(out.as_deref(), &constants_table(&sz, prm.c_chi, &k))
        }
        Command::Verify { trial } => {
            let cfg = resolve_config(&cli)?;
            let ctx = TrialContext::new(&cfg)?;
            let draw = trial::draw_trial(&ctx, ctx.trial_seed(*trial))?;
            let lambda = trial::trial_lambda(&ctx, &draw)?;
            let (assumptions, events) = trial::verify_draw(&ctx, &draw, lambda);
            let constants = compute_constants(&trial::problem_size(&draw), &ctx.params).ok();
            let v = serde_json::json!({
                "trial_index": trial,
                "seed": ctx.trial_seed(*trial),
                "lambda": lambda,
                "assumptions": assumptions,
                "events": events,
                "constants": constants,
            });
            emit(out.as_deref(), &json(&v))
        }
        Command::Experiment { workers } => {
            let mut cfg = resolve_config(&cli)?;
            if let Some(w) = workers {
                cfg.experiment.workers = *w;
            }
            let dir = cfg.output_dir(out.as_deref());
            let s = runner::run_experiment(&cfg, &dir)?;
            println!("wrote {}", dir.display());
            print_summary(&s);
            Ok(())
        }
    }
}

fn solve_instance(cfg: &ExperimentConfig, path: &Path, lambda: Option<f64>, out: Option<&Path>) -> Result<()> {
    let io = |e: &dyn std::fmt::Display| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let text = std::fs::read_to_string(path).map_err(|e| io(&e))?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(|e| io(&e))?;
    if file.schema != INSTANCE_SCHEMA {
        return Err(Error::Config(format!("unknown instance schema {}", file.schema)));
    }
    let design = if file.design.centers.is_some() {
        file.design.to_instance()?.0
    } else {
        let mut cfg = cfg.clone();
        cfg.experiment.master_seed = file.master_seed;
        let ctx = TrialContext::new(&cfg)?;
        trial::draw_trial(&ctx, ctx.trial_seed(file.trial_index))?.design
    };
    let truth = GroundTruth::new(&design.x, decode_vec(&file.beta)?, file.sigma, decode_vec(&file.noise)?)?;
    let lambda = lambda.unwrap_or(file.lambda);
    let sol = lasso::solve(&design.x, &truth.y, lambda, &cfg.solver_options())?;
    let v = serde_json::json!({
        "lambda": lambda,
        "iterations": sol.iterations,
        "objective": sol.objective,
        "duality_gap": sol.duality_gap,
        "kkt_infinity": sol.kkt_infinity,
        "prediction_error": lasso::prediction_error(&design.x, &truth.beta, &sol.beta_hat),
        "support": sol.beta_hat.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j).collect::<Vec<_>>(),
        "beta_hat": encode_vec(&sol.beta_hat),
    });
    emit(out, &json(&v))
}

pub fn constants_table(sz: &ProblemSize, c_chi: f64, k: &TheoremConstants) -> String {
    let rows: Vec<(&str, &str, f64)> = vec![
        ("C_mu", "r/(1+alpha)", k.c_mu),
        ("C_spar", "r^2/((1+alpha) e^2)", k.c_spar),
        ("C_col", "(sqrt2/sqrt((1-r)(1+alpha)) - (1+r))/2", k.c_col),
        ("C_int", "int_0^3 sqrt(log(3/eps)) deps", k.c_int),
        ("C*_int", "same integral as C_int", k.c_int_star),
        ("C_chi", "fitted chi-square lower-tail constant", c_chi),
        ("C_snp", "min(0.1 r/sqrt(alpha Q), sqrt(log p)/2)", k.c_s_n_p),
        ("Q", "(alpha(1-1/e)/(theta* C_chi))^(1/n) (log p)^(-(nu-1)/n)", k.tail_scale),
        ("r_max", "1 + s(sqrt n + sqrt(alpha/c log p + log(s)/c))", k.r_max),
        ("mu_max", "s(sqrt n + sqrt s + sqrt(2 alpha log p))/2", k.mu_max),
        ("sigma2_max", "sqrt(s) s^2/2", k.sigma_max_sq),
        ("r*_max", "1/(1 - s sqrt(n Q))", k.r_star_max),
        ("K_n,s*", "sqrt(alpha n log(p) Q)", k.k_n_sstar),
        ("mu*_max", "s K_n,s*", k.mu_star_max),
        ("sigma*2_max", "Q/(1 - s sqrt(nQ)) sqrt(s*) s^2", k.sigma_star_max_sq),
        ("r_*", "1.1 r (1.1 + 0.11 r)", k.r_star_coeff),
        ("r*", "design Gram deviation bound on representatives", k.r_star_design),
        ("delta_A", "first delta term", k.delta_terms[0]),
        ("delta_B", "second delta term", k.delta_terms[1]),
        ("delta_A*", "third delta term", k.delta_terms[2]),
        ("delta_B*", "fourth delta term", k.delta_terms[3]),
        ("delta", "sum of the four terms", k.delta_lower),
    ];
    let mut s = format!(
        "# n={} p={} s={} s*={} sigma_frak={}\n{:<12} {:<58} {}\n",
        sz.n, sz.p, sz.s, sz.s_star, sz.sigma_frak, "name", "formula", "value"
    );
    for (name, formula, value) in rows {
        s.push_str(&format!("{name:<12} {formula:<58} {}\n", show(value)));
    }
    s.pop();
    s
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e6)`.
fn show(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e6).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn print_summary(s: &ExperimentSummary) {
    println!("trials {} completed {} failed {}", s.trials, s.completed, s.failed);
    for (i, f) in s.event_failure.iter().enumerate() {
        println!(
            "event {} failure {:.4} [{:.4}, {:.4}]",
            ["I", "II", "III", "IV"][i],
            f.frequency,
            f.wilson_low,
            f.wilson_high
        );
    }
    println!(
        "bound violation (empirical delta) {:.4}; (analytic delta) {:.4} over {} trials",
        s.bound_violation.frequency, s.bound_violation_analytic.frequency, s.bound_violation_analytic.total
    );
    println!("decomposition chain violations {}", s.chain_violations);
}
