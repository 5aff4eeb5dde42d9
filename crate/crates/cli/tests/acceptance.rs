//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The training criteria run the shipped configurations through `cmd_train` and
//! take tens of minutes on a single core.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use deeplyap::diffmath::{fd_gradient, lu_invert, rel_err, Matrix};
use deeplyap::dynamics::{builtin, parse_vector_field};
use deeplyap::loss::{loss_param_gradient, loss_pointwise, BoundSpec, LossKind, LossSpec};
use deeplyap::network::{LyapunovNet, NetShape};
use deeplyap::verifier::integrate;
use deeplyap::PointSet;
use deeplyap_cli::{cmd_params, cmd_simulate, cmd_train, Outcome, RunConfig, SimulateArgs, TrainArgs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

struct RunResult {
    outcome: Outcome,
    epochs: usize,
    err1: f64,
    err_inf: f64,
    checkpoint: PathBuf,
}

fn train_run(config: &Path, seed: u64, dir: &Path, tag: &str) -> Result<RunResult, String> {
    let checkpoint = dir.join(format!("{tag}_seed{seed}.checkpoint.json"));
    let report = dir.join(format!("{tag}_seed{seed}.report.json"));
    let args = TrainArgs {
        config: config.to_path_buf(),
        seed_override: Some(seed),
        checkpoint: Some(checkpoint.clone()),
        report: Some(report.clone()),
    };
    let start = Instant::now();
    let outcome = cmd_train(&args, &mut io::sink(), &mut io::sink()).map_err(|e| e.to_string())?;
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let last = doc["history"].as_array().and_then(|h| h.last()).ok_or("empty history")?;
    let r = RunResult {
        outcome,
        epochs: doc["epochs_run"].as_u64().unwrap_or(0) as usize,
        err1: last["err1"].as_f64().unwrap_or(f64::NAN),
        err_inf: last["err_inf"].as_f64().unwrap_or(f64::NAN),
        checkpoint,
    };
    println!(
        "    {tag} seed {seed}: {:?} after {} epochs, err1 {:.3e}, err_inf {:.3e} ({:.0}s)",
        r.outcome,
        r.epochs,
        r.err1,
        r.err_inf,
        start.elapsed().as_secs_f64()
    );
    Ok(r)
}

fn criterion_1() -> Verdict {
    let mut got = Vec::new();
    for name in ["2d_pdi.json", "10d_pdi.json"] {
        let mut buf = Vec::new();
        match cmd_params(&shipped(name), &mut buf) {
            Ok(_) => got.push(String::from_utf8_lossy(&buf).trim().to_string()),
            Err(e) => return Verdict::new(false, e.to_string()),
        }
    }
    Verdict::new(got == ["775", "2671"], format!("2-D {}, 10-D {}", got[0], got[1]))
}

/// Runs seeds in order until `need` successes are reached or can no longer be reached.
fn seeds_until_decided(
    seeds: &[u64],
    need: usize,
    mut run: impl FnMut(u64) -> Result<bool, String>,
) -> Result<(usize, usize), String> {
    let (mut ok, mut tried) = (0, 0);
    for &seed in seeds {
        if ok >= need || ok + (seeds.len() - tried) < need {
            break;
        }
        tried += 1;
        if run(seed)? {
            ok += 1;
        }
    }
    Ok((ok, tried))
}

fn criterion_2(dir: &Path) -> Verdict {
    let cfg = shipped("2d_pdi.json");
    match seeds_until_decided(&[1, 2, 3, 4, 5], 3, |s| {
        Ok(train_run(&cfg, s, dir, "2d_pdi")?.outcome == Outcome::Success)
    }) {
        Ok((ok, tried)) => Verdict::new(ok >= 3, format!("{ok} of {tried} seeds converged within 30 epochs (need 3 of 5)")),
        Err(e) => Verdict::new(false, e),
    }
}

fn criterion_3(dir: &Path) -> Verdict {
    let cfg = shipped("2d_pde.json");
    match seeds_until_decided(&[1, 2, 3, 4, 5], 3, |s| {
        let r = train_run(&cfg, s, dir, "2d_pde")?;
        Ok(r.epochs == 20 && r.err1 > 1e-2)
    }) {
        Ok((ok, tried)) => Verdict::new(ok >= 3, format!("{ok} of {tried} seeds ended with err1 > 1e-2 after 20 epochs (need 3 of 5)")),
        Err(e) => Verdict::new(false, e),
    }
}

fn criterion_4(dir: &Path, converged: &mut Option<PathBuf>) -> Verdict {
    let cfg = shipped("10d_pdi.json");
    match seeds_until_decided(&[1, 2, 3], 2, |s| {
        let r = train_run(&cfg, s, dir, "10d_pdi")?;
        let ok = r.outcome == Outcome::Success;
        if ok && converged.is_none() {
            *converged = Some(r.checkpoint);
        }
        Ok(ok)
    }) {
        Ok((ok, tried)) => Verdict::new(ok >= 2, format!("{ok} of {tried} seeds converged within 30 epochs (need 2 of 3)")),
        Err(e) => Verdict::new(false, e),
    }
}

fn criterion_5(dir: &Path, checkpoint: Option<&Path>) -> Verdict {
    let Some(checkpoint) = checkpoint else {
        return Verdict::new(false, "no converged 10-D checkpoint available");
    };
    let alternating: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
    let mut e1 = vec![0.0; 10];
    e1[0] = 1.0;
    let args = SimulateArgs {
        config: shipped("10d_pdi.json"),
        checkpoint: checkpoint.to_path_buf(),
        x0: vec![vec![1.0; 10], alternating, e1],
        t_end: 10.0,
        dt: 1e-3,
        slack: 1e-9,
        out_dir: dir.join("trajectories"),
    };
    let mut out = Vec::new();
    match cmd_simulate(&args, &mut out, &mut io::sink()) {
        Ok(outcome) => {
            let doc: serde_json::Value = serde_json::from_slice(&out).unwrap_or_default();
            let flags: Vec<bool> = doc
                .as_array()
                .map(|a| a.iter().map(|t| t["monotone"].as_bool().unwrap_or(false)).collect())
                .unwrap_or_default();
            Verdict::new(
                outcome == Outcome::Success && flags.len() == 3,
                format!("monotone decrease per trajectory: {flags:?}"),
            )
        }
        Err(e) => Verdict::new(false, e.to_string()),
    }
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> String {
    (1..=n)
        .map(|i| {
            let j = rng.gen_range(1..=n);
            let k = rng.gen_range(1..=n);
            format!(
                "-{:.3}*x{i} + {:.3}*x{j} - {:.3}*x{k}^2",
                rng.gen_range(0.5..2.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0)
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let n = rng.gen_range(1..=3);
        let shape = NetShape::new(n, rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=8)).unwrap();
        let net = LyapunovNet::init(shape, case).unwrap();
        let vf = parse_vector_field(&random_field(&mut rng, n), n).unwrap();
        let kind = if case % 2 == 0 { LossKind::Pdi } else { LossKind::Pde };
        let spec = LossSpec::new(kind, rng.gen_range(0.5..2.0), BoundSpec::quadratic(0.1, 10.0).unwrap()).unwrap();
        let pts: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
        let points = PointSet::from_points(&pts).unwrap();

        let exact = loss_param_gradient(&spec, &net, &vf, &points).unwrap();
        let fd = fd_gradient(
            |theta| {
                let probe = LyapunovNet::from_params(shape, theta.to_vec()).unwrap();
                loss_param_gradient(&spec, &probe, &vf, &points).unwrap().value
            },
            net.params(),
            h,
        );
        for (a, b) in exact.grad.iter().zip(&fd) {
            worst = worst.max(rel_err(*a, *b));
        }
        for x in &pts {
            let g = net.grad_x(x);
            let gfd = fd_gradient(|y| net.forward(y), x, h);
            for (a, b) in g.iter().zip(&gfd) {
                worst = worst.max(rel_err(*a, *b));
            }
        }
    }
    Verdict::new(worst < 1e-5, format!("50 configurations, worst relative error {worst:.2e} (limit 1e-5)"))
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut zeros, mut failures) = (0, Vec::new());
    for i in 0..10_000 {
        let n = rng.gen_range(1..=4);
        let bounds = BoundSpec::quadratic(0.1, 10.0).unwrap();
        let nu = rng.gen_range(0.1..3.0);
        let pdi = LossSpec::new(LossKind::Pdi, nu, bounds).unwrap();
        let pde = LossSpec::new(LossKind::Pde, nu, bounds).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..=3.0)).collect();
        let fx: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..=3.0)).collect();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let w = rng.gen_range(0.0..12.0) * r2;
        let (li, le) = (loss_pointwise(&pdi, w, &p, &x, &fx), loss_pointwise(&pde, w, &p, &x, &fx));
        let q = p.iter().zip(&fx).map(|(a, b)| a * b).sum::<f64>() + r2;
        let holds = q <= 0.0 && 0.1 * r2 <= w && w <= 10.0 * r2;
        if li == 0.0 {
            zeros += 1;
        }
        if !(li >= 0.0 && le >= 0.0 && li <= le && (li == 0.0) == holds) {
            failures.push(i);
        }
    }
    Verdict::new(
        failures.is_empty() && zeros > 0,
        format!("10000 tuples ({zeros} with zero PDI loss), {} failures", failures.len()),
    )
}

fn criterion_8() -> Verdict {
    let vf = builtin("example_10d").unwrap();
    let t = vf.transform().expect("10-D system carries T").forward().clone();
    let inv = lu_invert(&t).unwrap();
    let residual = t.matmul(&inv).unwrap().dist_inf(&Matrix::identity(10));

    let decay = parse_vector_field("-x1", 1).unwrap();
    let err_at = |dt: f64| {
        let traj = integrate(&decay, &[1.0], 1.0, dt, None).unwrap();
        (traj.final_state()[0] - (-1.0f64).exp()).abs()
    };
    let fine = err_at(1e-3);
    let (e1, e2, e3) = (err_at(0.2), err_at(0.1), err_at(0.05));
    let ratios = (e1 / e2, e2 / e3);
    Verdict::new(
        residual < 1e-12 && fine <= 1e-9 && ratios.0 >= 12.0 && ratios.1 >= 12.0,
        format!(
            "|T T^-1 - I| = {residual:.1e}, RK4 error at dt 1e-3 = {fine:.1e}, halving ratios {:.1} and {:.1}",
            ratios.0, ratios.1
        ),
    )
}

fn criterion_9(dir: &Path) -> Verdict {
    let mut cfg = RunConfig::load(&shipped("2d_pdi.json")).unwrap();
    cfg.train.m = 4_000;
    cfg.train.max_epochs = 2;
    let path = dir.join("determinism.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let ck = dir.join(format!("determinism_{k}.checkpoint.json"));
        let args = TrainArgs {
            config: path.clone(),
            seed_override: Some(9),
            checkpoint: Some(ck.clone()),
            report: Some(dir.join(format!("determinism_{k}.report.json"))),
        };
        if let Err(e) = cmd_train(&args, &mut io::sink(), &mut io::sink()) {
            return Verdict::new(false, e.to_string());
        }
        bytes.push(fs::read(&ck).unwrap());
    }
    Verdict::new(bytes[0] == bytes[1], format!("two checkpoints of {} bytes, identical: {}", bytes[0].len(), bytes[0] == bytes[1]))
}

fn main() -> ExitCode {
    let dir = TempDir::new().expect("temporary directory");
    let mut converged_10d = None;
    let mut verdicts = Vec::new();
    let mut record = |k: usize, name: &str, v: Verdict| {
        println!("criterion {k} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        verdicts.push(v.pass);
    };
    record(1, "parameter counts", criterion_1());
    record(2, "2-D PDI training", criterion_2(dir.path()));
    record(3, "2-D PDE failure mode", criterion_3(dir.path()));
    record(4, "10-D PDI training", criterion_4(dir.path(), &mut converged_10d));
    record(5, "trajectory decrease", criterion_5(dir.path(), converged_10d.as_deref()));
    record(6, "gradient exactness", criterion_6());
    record(7, "loss semantics", criterion_7());
    record(8, "matrix and integrator oracles", criterion_8());
    record(9, "determinism", criterion_9(dir.path()));
    let passed = verdicts.iter().filter(|&&p| p).count();
    println!("acceptance: {passed} of {} criteria passed", verdicts.len());
    if passed == verdicts.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
