//! `hnc-icl` command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 invariant
//! violation (a retrieval error above its bound, or a failed self-test).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::instances::{random_instance, random_shape};
use super::runners::{run_bound_sweep, run_k_study, run_strategy_comparison};
use crate::associative::{
    attention_view, hnc_retrieve, matrix_from_rows, ClassicHopfield, ContextSet, HncModel,
    QueryState, Schedule,
};
use crate::bounds::{
    beta, bound_monotonicity_check, is_non_decreasing, is_non_increasing, theorem1_bound,
    verify_bound, BoundReport, SeparationReport, Sweep,
};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "hnc-icl",
    version,
    about = "Hopfield-network-with-context retrieval, error bounds and exemplar selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file (TOML with dotted keys, e.g. `task.kind = "prototype-completion"`)
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set oracle.gamma=4`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output path; stdout when omitted
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Verify the retrieval-error bound over a grid of random instances
    BoundSweep(Common),
    /// Mean score versus number of exemplars for each strategy
    KStudy(Common),
    /// Compare selection strategies at fixed K
    Compare(Common),
    /// Run one HN-C retrieval from a JSON instance file
    Retrieve {
        /// JSON file with `sigma`, `context` (list of context vectors) and
        /// optional `xi_q`, `xi_k`, `w_v`, `gamma`, `u_star`, `target_index`
        input: PathBuf,
    },
    /// Run the built-in invariant checks and print the default config
    Selftest,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(t) = self.trials {
            overrides.push(format!("trials={t}"));
        }
        if let Some(o) = &self.output {
            overrides.push(format!(
                "output={}",
                toml::Value::String(o.display().to_string())
            ));
        }
        ExperimentConfig::from_text_with_overrides(&text, &overrides)
    }
}

/// Write to the configured output, or to `out` when none is set.
fn emit(config: &ExperimentConfig, body: &str, out: &mut dyn Write) -> Result<()> {
    match &config.output {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Error::Config(format!("cannot write output {path}: {e}"))),
        None => out.write_all(body.as_bytes()).map_err(Error::from),
    }
}

#[derive(Debug, Deserialize)]
struct RetrieveInput {
    sigma: Vec<f64>,
    context: Vec<Vec<f64>>,
    #[serde(default)]
    xi_q: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    xi_k: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    w_v: Option<Vec<Vec<f64>>>,
    #[serde(default = "one")]
    gamma: f64,
    #[serde(default)]
    u_star: Option<Vec<f64>>,
    #[serde(default)]
    target_index: Option<usize>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Serialize)]
struct RetrieveOutput {
    scores: Vec<f64>,
    weights: Vec<f64>,
    u_new: Vec<f64>,
    attention_output: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<BoundReport>,
}

fn retrieve(path: &Path, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let input: RetrieveInput =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad input: {e}")))?;
    let d = input.sigma.len();
    let mat = |m: &Option<Vec<Vec<f64>>>| -> Result<DMatrix<f64>> {
        match m {
            Some(rows) => matrix_from_rows(rows),
            None => Ok(DMatrix::identity(d, d)),
        }
    };
    let w_v = input
        .w_v
        .as_ref()
        .map(|r| matrix_from_rows(r))
        .transpose()?;
    let model = HncModel::new(mat(&input.xi_q)?, mat(&input.xi_k)?, w_v, input.gamma)?;
    let ctx = ContextSet::from_columns(&input.context)?;
    let query = QueryState::from_slice(&model, &input.sigma)?;
    let r = hnc_retrieve(&model, &ctx, &query)?;
    let a = attention_view(&model, &ctx, &query)?;
    let bound = match input.u_star {
        Some(u_star) => Some(verify_bound(
            &model,
            &ctx,
            &query,
            &u_star,
            input.target_index.unwrap_or(0),
        )?),
        None => None,
    };
    let output = RetrieveOutput {
        scores: r.scores.as_slice().to_vec(),
        weights: r.weights.as_slice().to_vec(),
        u_new: r.u_new.as_slice().to_vec(),
        attention_output: a.output.iter().copied().collect(),
        bound,
    };
    serde_json::to_writer_pretty(&mut *out, &output)?;
    writeln!(out)?;
    Ok(())
}

type Check = (&'static str, fn() -> Result<bool>);

fn check_attention() -> Result<bool> {
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let inst = random_instance(derive_seed(77, i), random_shape(derive_seed(78, i), 0.5))?;
        let model = inst.model.clone().with_value_map(DMatrix::from_fn(
            inst.model.d_q(),
            inst.model.d_q(),
            |r, c| ((r * 7 + c * 3) % 5) as f64 / 5.0 - 0.4,
        ))?;
        let r = hnc_retrieve(&model, &inst.context, &inst.query)?;
        let a = attention_view(&model, &inst.context, &inst.query)?;
        let via_retrieval = r.u_new.transpose() * model.w_v();
        worst = worst.max((via_retrieval - &a.output).amax());
        let total: f64 = r.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || r.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Ok(false);
        }
    }
    Ok(worst <= 1e-12)
}

fn check_bound() -> Result<bool> {
    for i in 0..1000 {
        let inst = random_instance(derive_seed(91, i), random_shape(derive_seed(92, i), 0.5))?;
        match verify_bound(
            &inst.model,
            &inst.context,
            &inst.query,
            &inst.u_star,
            inst.target_index,
        ) {
            Ok(_) => {}
            Err(Error::BoundViolation(_)) => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

fn check_beta() -> Result<bool> {
    let sep = SeparationReport {
        target_index: 0,
        delta_all: vec![
            None,
            Some(1.0),
            Some(1.0),
            Some(1.0),
            Some(1.0),
            Some(1.0),
            Some(1.0),
            Some(1.0),
        ],
        delta_min: Some(1.0),
        duplicate_count: 1,
    };
    let mut base = theorem1_bound(&sep, 1.0, 0.1, 1.0)?;
    let c_rows = bound_monotonicity_check(
        &base,
        &Sweep::C((0..=20).map(|i| i as f64 / 10.0).collect()),
    )?;
    let m_rows = bound_monotonicity_check(&base, &Sweep::M((1..=32).collect()))?;
    base.c = 0.5;
    let t_rows = bound_monotonicity_check(&base, &Sweep::T((1..=8).collect()))?;
    Ok(is_non_decreasing(&c_rows)
        && is_non_decreasing(&m_rows)
        && is_non_increasing(&t_rows)
        && beta(0.0, 8, 1) == 0.0
        && beta(0.7, 8, 8) == 0.0)
}

fn check_classic() -> Result<bool> {
    let m: Vec<i8> = (0..16)
        .map(|i| if (i * 5) % 3 == 0 { 1 } else { -1 })
        .collect();
    let neg: Vec<i8> = m.iter().map(|s| -s).collect();
    let net = ClassicHopfield::store(std::slice::from_ref(&m))?;
    let a = net.update(&m, Schedule::Sequential, 5)?;
    let b = net.update(&neg, Schedule::Sequential, 5)?;
    Ok(a.converged && a.state == m && b.converged && b.state == neg)
}

const CHECKS: &[Check] = &[
    ("attention-equivalence", check_attention),
    ("bound-soundness", check_bound),
    ("beta-monotonicity", check_beta),
    ("classic-fixed-points", check_classic),
];

fn selftest(out: &mut dyn Write) -> Result<bool> {
    let mut all = true;
    for (name, check) in CHECKS {
        let ok = check()?;
        all &= ok;
        writeln!(out, "{} {name}", if ok { "PASS" } else { "FAIL" })?;
    }
    writeln!(
        out,
        "# default config\n{}",
        ExperimentConfig::default().to_toml()
    )?;
    Ok(all)
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match command {
        Command::BoundSweep(common) => {
            let config = common.load()?;
            let sweep = run_bound_sweep(&config)?;
            emit(&config, &sweep.to_csv(), out)?;
            writeln!(err, "{}", sweep.summary())?;
        }
        Command::KStudy(common) => {
            let config = common.load()?;
            let study = run_k_study(&config)?;
            if let Some(w) = study.task.separation_warning() {
                writeln!(err, "warning: {w}")?;
            }
            emit(&config, &study.to_csv(), out)?;
        }
        Command::Compare(common) => {
            let config = common.load()?;
            let cmp = run_strategy_comparison(&config)?;
            emit(&config, &cmp.to_csv(), out)?;
            match &config.output {
                Some(path) => {
                    let json_path = Path::new(path).with_extension("json");
                    std::fs::write(&json_path, cmp.to_json()).map_err(|e| {
                        Error::Config(format!("cannot write {}: {e}", json_path.display()))
                    })?;
                }
                None => writeln!(out, "{}", cmp.to_json())?,
            }
        }
        Command::Retrieve { input } => retrieve(&input, out)?,
        Command::Selftest => {
            if !selftest(out)? {
                return Ok(EXIT_VIOLATION);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parse `args` (program name first) and run, writing to the given streams.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(Error::BoundViolation(v)) => {
            let _ = writeln!(err, "invariant violation: {v}");
            EXIT_VIOLATION
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if matches!(e, Error::Config(_)) {
                let _ = writeln!(
                    err,
                    "\n{}",
                    <Cli as clap::CommandFactory>::command().render_usage()
                );
            }
            EXIT_USAGE
        }
    }
}

/// Process entry point.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}
