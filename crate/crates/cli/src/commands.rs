use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use socs_core::eval::{marginalize_log, partition_function};
use socs_core::reductions::{born, mps_to_circuit, psd_to_socs, snefy_to_socs, Mps, PsdModel, SnefySpec};
use socs_core::training::{bits_per_dim, fit, sweep_learning_rates, EpochMetrics, Split};
use socs_core::Circuit;

use crate::assign::parse_assignment;
use crate::config::Config;
use crate::data::read_csv;
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};
use crate::model_io::{load_model, save_model, ModelFile};
use crate::verify::{self, Replay, Suite, VerifyOptions};

#[derive(Parser, Debug)]
#[command(name = "socs", version, about = "Train, query and convert squared probabilistic circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a model from a config and fit it on CSV data.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        valid: PathBuf,
        /// Model file; metrics.json is written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean log-likelihood and bits per dimension of a model on CSV data.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Report file; the report is always printed too.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Marginal of a model file or circuit file given "NAME=value,..." evidence.
    Marginalize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "")]
        assign: String,
        #[arg(long)]
        normalize: bool,
    },
    /// Convert an MPS, PSD model or SNEFY spec to circuit JSON.
    Convert {
        #[arg(long, value_enum)]
        from: Source,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// For MPS input, write the Born machine instead of the raw contraction.
        #[arg(long)]
        square: bool,
    },
    /// Run property suites against brute-force oracles.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
        #[arg(long, default_value_t = 8)]
        max_vars: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the failing case (default: verify-replay.json).
        #[arg(long)]
        replay_out: Option<PathBuf>,
        /// Rerun the single case stored in a replay file.
        #[arg(long, conflicts_with_all = ["suite", "max_vars", "seed"])]
        replay: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Source {
    Mps,
    Psd,
    Snefy,
}

/// Parses `args` (program name first) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult<i32> {
    match cmd {
        Command::Train { config, data, valid, out: path } => cmd_train(&config, &data, &valid, &path, out),
        Command::Eval { model, data, out: path } => cmd_eval(&model, &data, path.as_deref(), out),
        Command::Marginalize { model, assign, normalize } => cmd_marginalize(&model, &assign, normalize, out),
        Command::Convert { from, input, out: path, square } => cmd_convert(from, &input, &path, square),
        Command::Verify { suite, max_vars, seed, replay_out, replay, inject_fault } => {
            let path = replay_out.unwrap_or_else(|| PathBuf::from("verify-replay.json"));
            match replay {
                Some(r) => cmd_replay(&r, &path, out),
                None => cmd_verify(&VerifyOptions { suite, max_vars, seed, inject_fault }, &path, out),
            }
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn print_json(out: &mut dyn Write, v: &impl Serialize) -> CliResult<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct TrainMetrics {
    pub model_class: String,
    pub num_params: usize,
    pub learning_rate: f64,
    pub best_epoch: usize,
    pub best_valid_nll: f64,
    pub stopped_early: bool,
    pub trace: Vec<EpochMetrics>,
}

/// Path of the metrics file written beside a model file.
pub fn metrics_path(model_out: &Path) -> PathBuf {
    model_out.with_file_name("metrics.json")
}

fn cmd_train(config: &Path, data: &Path, valid: &Path, path: &Path, out: &mut dyn Write) -> CliResult<i32> {
    let cfg = Config::from_json_str(&read(config)?).map_err(|e| e.context(&config.display().to_string()))?;
    let train_t = read_csv(data)?;
    let valid_t = read_csv(valid)?;
    let variables = match &cfg.variables {
        Some(v) => v.clone(),
        None => {
            if valid_t.header != train_t.header {
                return Err(CliError::usage("training and validation columns differ"));
            }
            let mut all = train_t.clone();
            all.rows.extend(valid_t.rows.iter().cloned());
            all.infer_variables(cfg.input_family)
        }
    };
    let train = train_t.bind(&variables, Split::Train).map_err(|e| e.context(&data.display().to_string()))?;
    let valid_d = valid_t.bind(&variables, Split::Valid).map_err(|e| e.context(&valid.display().to_string()))?;
    let mut model = cfg.build_model(variables)?;
    let (lr, report) = match &cfg.learning_rate_sweep {
        Some(rates) => sweep_learning_rates(&mut model, &train, &valid_d, &cfg.train, rates)?,
        None => (cfg.train.learning_rate, fit(&mut model, &train, &valid_d, &cfg.train)?),
    };
    save_model(&model, path)?;
    let metrics = TrainMetrics {
        model_class: model.spec.model_class.name(),
        num_params: model.num_params(),
        learning_rate: lr,
        best_epoch: report.best_epoch,
        best_valid_nll: report.best_valid_nll,
        stopped_early: report.stopped_early,
        trace: report.trace,
    };
    let mpath = metrics_path(path);
    write(&mpath, &serde_json::to_string_pretty(&metrics)?)?;
    print_json(
        out,
        &json!({
            "model": path.display().to_string(),
            "metrics": mpath.display().to_string(),
            "best_epoch": metrics.best_epoch,
            "best_valid_nll": metrics.best_valid_nll,
        }),
    )?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub test_ll_mean: f64,
    pub bpd: f64,
    pub num_rows: usize,
    pub log_z: f64,
}

fn cmd_eval(model: &Path, data: &Path, path: Option<&Path>, out: &mut dyn Write) -> CliResult<i32> {
    let m = load_model(model)?;
    let d = read_csv(data)?.bind(&m.variables, Split::Test).map_err(|e| e.context(&data.display().to_string()))?;
    if d.is_empty() {
        return Err(CliError::usage(format!("{}: no rows", data.display())));
    }
    let (log_z, lls) = m.log_likelihoods(&d.rows)?;
    let mean = lls.iter().sum::<f64>() / lls.len() as f64;
    if !mean.is_finite() {
        return Err(CliError::numerical(format!("mean log-likelihood is {mean}")));
    }
    let report = EvalReport { test_ll_mean: mean, bpd: bits_per_dim(mean, m.variables.len()), num_rows: lls.len(), log_z };
    if let Some(p) = path {
        write(p, &serde_json::to_string_pretty(&report)?)?;
    }
    print_json(out, &report)?;
    Ok(EXIT_OK)
}

fn cmd_marginalize(model: &Path, assign: &str, normalize: bool, out: &mut dyn Write) -> CliResult<i32> {
    let text = read(model)?;
    let is_model = serde_json::from_str::<serde_json::Value>(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", model.display())))?
        .get("format_version")
        .is_some();
    let (circuit, log_z) = if is_model {
        let m = ModelFile::from_json_str(&text)?.to_model().map_err(|e| e.context(&model.display().to_string()))?;
        let z = m.log_partition()?;
        (m.circuit().clone(), Some(z))
    } else {
        let c = Circuit::from_json_str(&text).map_err(|e| CliError::from(e).context(&model.display().to_string()))?;
        (c, None)
    };
    let e = parse_assignment(assign, circuit.variables())?;
    let v = marginalize_log(&circuit, &e)?;
    if !v.is_finite() && !v.is_zero() {
        return Err(CliError::numerical("marginal is not finite"));
    }
    let m = v.to_complex();
    let mut report = json!({
        "log_marginal": v.log_mag,
        "marginal": if m.im.abs() <= 1e-12 * m.norm() { json!(m.re) } else { json!([m.re, m.im]) },
    });
    if normalize {
        let lz = match log_z {
            Some(z) => z,
            None => {
                let z = partition_function(&circuit)?;
                if !(z.re > 0.0 && z.re.is_finite()) || z.im.abs() > 1e-9 * z.re {
                    return Err(CliError::numerical(format!("partition function {z} is not positive")));
                }
                z.re.ln()
            }
        };
        report["log_z"] = json!(lz);
        report["normalized"] = json!((v.log_mag - lz).exp());
    }
    print_json(out, &report)?;
    Ok(EXIT_OK)
}

fn cmd_convert(from: Source, input: &Path, path: &Path, square: bool) -> CliResult<i32> {
    let text = read(input)?;
    let ctx = |e: socs_core::Error| CliError::from(e).context(&input.display().to_string());
    if square && !matches!(from, Source::Mps) {
        return Err(CliError::usage("--square applies to MPS input only"));
    }
    let c = match from {
        Source::Mps => {
            let m = Mps::from_json_str(&text).map_err(ctx)?;
            if square {
                born(&m)
            } else {
                mps_to_circuit(&m)
            }
        }
        Source::Psd => PsdModel::from_json_str(&text).and_then(|p| psd_to_socs(&p)).map(|s| s.circuit().clone()),
        Source::Snefy => SnefySpec::from_json_str(&text).and_then(|s| snefy_to_socs(&s)),
    }
    .map_err(ctx)?;
    write(path, &c.to_json_string())?;
    Ok(EXIT_OK)
}

fn finish_verify(report: &verify::Report, replay_path: &Path, out: &mut dyn Write) -> CliResult<i32> {
    let mut summary = serde_json::to_value(report)?;
    if let Some(r) = &report.replay {
        write(replay_path, &serde_json::to_string_pretty(r)?)?;
        summary["replay_file"] = json!(replay_path.display().to_string());
    }
    print_json(out, &summary)?;
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_verify(opts: &VerifyOptions, replay_path: &Path, out: &mut dyn Write) -> CliResult<i32> {
    finish_verify(&verify::run(opts), replay_path, out)
}

fn cmd_replay(path: &Path, replay_path: &Path, out: &mut dyn Write) -> CliResult<i32> {
    let r: Replay = serde_json::from_str(&read(path)?).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    let report = verify::rerun(&r).map_err(CliError::usage)?;
    finish_verify(&report, replay_path, out)
}

