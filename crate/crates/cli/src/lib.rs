//! Command implementations behind the `deeplyap` binary.
//!
//! Every command returns an [`Outcome`] (mapped to the process exit code) or a
//! [`CliError`] (exit code 1). Progress goes to the `log` writer, data to `out`.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use deeplyap::network::LyapunovNet;
use deeplyap::trainer::{sample_fresh, train_with_observer, EpochRecord, TrainReport};
use deeplyap::verifier::{
    check_decrease, export_slice, integrate, verify_samples, write_slice_csv, VerifyReport,
};
use serde::Serialize;

pub use config::RunConfig;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success = 0,
    NotConverged = 2,
    Violations = 3,
}

impl Outcome {
    pub fn code(self) -> i32 {
        self as i32
    }
}

pub const EXIT_USAGE: i32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config { field: String, message: String },
    Io(String),
    Run(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config { field, message } => write!(f, "config field `{field}`: {message}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<deeplyap::Error> for CliError {
    fn from(e: deeplyap::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

fn io_err(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("cannot {what} {}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err("create directory", dir, e))?;
    }
    fs::write(path, contents).map_err(|e| io_err("write", path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report is serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Default)]
pub struct TrainArgs {
    pub config: PathBuf,
    pub seed_override: Option<u64>,
    pub checkpoint: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Run report written next to the checkpoint. `wall_time_seconds` is the only
/// field that varies between identical runs.
#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub config: &'a RunConfig,
    pub param_count: usize,
    pub converged: bool,
    pub epochs_run: usize,
    pub history: &'a [EpochRecord],
    pub checkpoint: String,
    pub wall_time_seconds: f64,
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<Outcome, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed_override {
        cfg.train.seed = seed;
    }
    if let Some(p) = &args.checkpoint {
        cfg.outputs.checkpoint = p.clone();
    }
    if let Some(p) = &args.report {
        cfg.outputs.report = p.clone();
    }
    let vf = cfg.vector_field()?;
    let shape = cfg.shape_for(vf.dim())?;
    let spec = cfg.loss_spec()?;
    if shape.n_sub > shape.n {
        let _ = writeln!(log, "warning: n_sub = {} exceeds the state dimension {}", shape.n_sub, shape.n);
    }
    let _ = writeln!(
        log,
        "training `{}`: {} parameters, {} points, batch {}, {:?} loss",
        vf.name(),
        shape.param_count(),
        cfg.train.m,
        cfg.train.batch_size,
        spec.kind
    );

    let (net, mut report): (LyapunovNet, TrainReport) = train_with_observer(&cfg.train, shape, &vf, &spec, |r| {
        let _ = writeln!(log, "epoch {:>3}: err1 = {:.6e}  err_inf = {:.6e}", r.epoch, r.err1, r.err_inf);
    })?;

    write_file(&cfg.outputs.checkpoint, &net.serialize())?;
    report.checkpoint = Some(cfg.outputs.checkpoint.display().to_string());
    let doc = RunReport {
        config: &cfg,
        param_count: net.param_count(),
        converged: report.converged,
        epochs_run: report.epochs_run,
        history: &report.history,
        checkpoint: cfg.outputs.checkpoint.display().to_string(),
        wall_time_seconds: report.wall_time_seconds,
    };
    write_file(&cfg.outputs.report, &to_json(&doc))?;

    let last = report.history.last();
    let _ = writeln!(
        out,
        "{} after {} epochs: err1 = {:e}, err_inf = {:e}; checkpoint {}",
        if report.converged { "converged" } else { "not converged" },
        report.epochs_run,
        last.map_or(f64::NAN, |r| r.err1),
        last.map_or(f64::NAN, |r| r.err_inf),
        cfg.outputs.checkpoint.display()
    );
    Ok(if report.converged {
        Outcome::Success
    } else {
        Outcome::NotConverged
    })
}

fn load_pair(config: &Path, checkpoint: &Path) -> Result<(RunConfig, LyapunovNet), CliError> {
    let cfg = RunConfig::load(config)?;
    let text = fs::read_to_string(checkpoint).map_err(|e| io_err("read checkpoint", checkpoint, e))?;
    let net = LyapunovNet::deserialize(&text)?;
    Ok((cfg, net))
}

fn check_dims(net: &LyapunovNet, n: usize) -> Result<(), CliError> {
    if net.shape().n != n {
        return Err(CliError::Run(
            deeplyap::Error::ShapeMismatch(format!(
                "checkpoint has input dimension {}, configured system has {n}",
                net.shape().n
            ))
            .to_string(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct VerifyArgs {
    pub config: PathBuf,
    pub checkpoint: PathBuf,
    pub samples: usize,
    pub r0: f64,
    pub seed_override: Option<u64>,
    pub report: Option<PathBuf>,
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<Outcome, CliError> {
    let (cfg, net) = load_pair(&args.config, &args.checkpoint)?;
    let vf = cfg.vector_field()?;
    check_dims(&net, vf.dim())?;
    if args.samples == 0 {
        return Err(CliError::Run("--samples must be positive".into()));
    }
    let spec = cfg.loss_spec()?;
    let seed = args.seed_override.unwrap_or(cfg.train.seed);
    let points = sample_fresh(vf.dim(), args.samples, seed);
    let rep: VerifyReport = verify_samples(&net, &vf, &spec, &points, args.r0)?;

    let _ = writeln!(
        log,
        "checked {} points (r0 = {}): {} bound violations (largest excess {}), {} decrease violations (largest residual {}); err1 = {:e}, err_inf = {:e}",
        rep.points_checked,
        rep.exclusion_radius,
        rep.bound_violations.violations,
        fmt_worst(rep.bound_violations.worst),
        rep.residual_violations.violations,
        fmt_worst(rep.residual_violations.worst),
        rep.err1,
        rep.err_inf
    );
    let doc = to_json(&rep);
    if let Some(path) = &args.report {
        write_file(path, &doc)?;
    }
    let _ = out.write_all(doc.as_bytes());
    Ok(if rep.total_violations() == 0 {
        Outcome::Success
    } else {
        Outcome::Violations
    })
}

fn fmt_worst(w: Option<f64>) -> String {
    w.map_or_else(|| "n/a".into(), |v| format!("{v:e}"))
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub config: PathBuf,
    pub checkpoint: PathBuf,
    pub x0: Vec<Vec<f64>>,
    pub t_end: f64,
    pub dt: f64,
    pub slack: f64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub x0: Vec<f64>,
    pub file: Option<String>,
    pub monotone: bool,
    pub first_violation: Option<usize>,
    pub w_start: Option<f64>,
    pub w_end: Option<f64>,
    pub error: Option<String>,
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, log: &mut dyn Write) -> Result<Outcome, CliError> {
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(CliError::Run(format!("--dt must be positive, got {}", args.dt)));
    }
    if !(args.t_end >= args.dt && args.t_end.is_finite()) {
        return Err(CliError::Run(format!("--t-end must be at least --dt, got {}", args.t_end)));
    }
    if args.x0.is_empty() {
        return Err(CliError::Run("at least one --x0 is required".into()));
    }
    let (cfg, net) = load_pair(&args.config, &args.checkpoint)?;
    let vf = cfg.vector_field()?;
    check_dims(&net, vf.dim())?;
    if let Some(bad) = args.x0.iter().find(|x| x.len() != vf.dim()) {
        return Err(CliError::Run(format!(
            "initial value {bad:?} has length {}, system dimension is {}",
            bad.len(),
            vf.dim()
        )));
    }

    let mut summaries = Vec::new();
    for (k, x0) in args.x0.iter().enumerate() {
        let mut s = TrajectorySummary {
            x0: x0.clone(),
            file: None,
            monotone: false,
            first_violation: None,
            w_start: None,
            w_end: None,
            error: None,
        };
        match integrate(&vf, x0, args.t_end, args.dt, Some(&net)) {
            Err(e) => s.error = Some(e.to_string()),
            Ok(traj) => {
                let path = args.out_dir.join(format!("trajectory_{}.csv", k + 1));
                let mut buf = Vec::new();
                traj.write_w_series(&mut buf).expect("writing to memory");
                write_file(&path, std::str::from_utf8(&buf).expect("ascii"))?;
                let dec = check_decrease(&traj, args.slack)?;
                s.file = Some(path.display().to_string());
                s.monotone = dec.monotone;
                s.first_violation = dec.first_violation;
                s.w_start = traj.w_values.first().copied();
                s.w_end = traj.w_values.last().copied();
            }
        }
        let _ = writeln!(
            log,
            "trajectory {} from {:?}: {}",
            k + 1,
            x0,
            match (&s.error, s.monotone) {
                (Some(e), _) => format!("failed: {e}"),
                (None, true) => format!("W decreases from {:e} to {:e}", s.w_start.unwrap(), s.w_end.unwrap()),
                (None, false) => format!("W increases after step {}", s.first_violation.unwrap()),
            }
        );
        summaries.push(s);
    }
    let _ = out.write_all(to_json(&summaries).as_bytes());
    Ok(if summaries.iter().all(|s| s.monotone) {
        Outcome::Success
    } else {
        Outcome::Violations
    })
}

#[derive(Debug, Clone)]
pub struct SliceArgs {
    pub config: PathBuf,
    pub checkpoint: PathBuf,
    /// One-based coordinate indices.
    pub axes: (usize, usize),
    pub half_width: f64,
    pub resolution: usize,
    pub out: Option<PathBuf>,
}

pub fn cmd_slice(args: &SliceArgs, out: &mut dyn Write, _log: &mut dyn Write) -> Result<Outcome, CliError> {
    let (cfg, net) = load_pair(&args.config, &args.checkpoint)?;
    let vf = cfg.vector_field()?;
    check_dims(&net, vf.dim())?;
    let (i, j) = args.axes;
    if i == 0 || j == 0 {
        return Err(CliError::Run("--axes are one-based (x1..xn)".into()));
    }
    let rows = export_slice(&net, &vf, i - 1, j - 1, args.half_width, args.resolution)?;
    let mut buf = Vec::new();
    write_slice_csv(&rows, &mut buf).expect("writing to memory");
    match &args.out {
        Some(path) => write_file(path, std::str::from_utf8(&buf).expect("ascii"))?,
        None => {
            let _ = out.write_all(&buf);
        }
    }
    Ok(Outcome::Success)
}

pub fn cmd_params(config: &Path, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let vf = cfg.vector_field()?;
    let shape = cfg.shape_for(vf.dim())?;
    let _ = writeln!(out, "{}", shape.param_count());
    Ok(Outcome::Success)
}

/// Parses `"1,0,0.5"` into a state vector.
pub fn parse_state(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}
