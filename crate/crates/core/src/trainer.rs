//! Minibatch Adam training of a [`LyapunovNet`] on uniform samples of `[-1, 1]ⁿ`.

use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::VectorField;
use crate::loss::{FieldSamples, LossSpec, LossSummary};
use crate::network::{LyapunovNet, NetShape, Workspace};
use crate::{Error, PointSet, Result};

// Independent ChaCha streams per purpose, all keyed by the run seed.
const DATA_STREAM: u64 = 2;
const SHUFFLE_STREAM: u64 = 3;
const EVAL_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], hp: &AdamParams) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - hp.beta1.powi(t);
        let c2 = 1.0 - hp.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
            *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], hp: &AdamParams) {
    state.step(params, grad, hp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Number of sample points.
    pub m: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub max_epochs: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub adam: AdamParams,
    #[serde(default = "default_true")]
    pub shuffle_each_epoch: bool,
    /// Draw a fresh dataset before every epoch after the first.
    #[serde(default)]
    pub resample_each_epoch: bool,
    /// Also report the metrics on this many fresh points after each epoch.
    #[serde(default)]
    pub fresh_eval_samples: Option<usize>,
    /// Keep the first layer at its initial value (no updates).
    #[serde(default)]
    pub freeze_first_layer: bool,
}

fn default_batch_size() -> usize {
    32
}

fn default_tol() -> f64 {
    1e-6
}

fn default_true() -> bool {
    true
}

impl TrainConfig {
    pub fn new(m: usize, max_epochs: usize, seed: u64) -> Self {
        Self {
            m,
            batch_size: default_batch_size(),
            max_epochs,
            tol: default_tol(),
            seed,
            adam: AdamParams::default(),
            shuffle_each_epoch: true,
            resample_each_epoch: false,
            fresh_eval_samples: None,
            freeze_first_layer: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.m < self.batch_size {
            return Err(Error::InvalidConfig(format!(
                "m = {} must be at least batch_size = {}",
                self.m, self.batch_size
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be positive, got {}", self.tol)));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid Adam hyperparameters {a:?}")));
        }
        if self.fresh_eval_samples == Some(0) {
            return Err(Error::InvalidConfig("fresh_eval_samples must be positive".into()));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.m.div_ceil(self.batch_size)
    }
}

/// Metrics after one epoch: `err1` is the mean and `err_inf` the maximum pointwise loss
/// over the training points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub err1: f64,
    pub err_inf: f64,
    /// Mean of the minibatch losses seen during the epoch.
    pub mean_batch_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fresh: Option<LossSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub converged: bool,
    pub history: Vec<EpochRecord>,
    pub wall_time_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
}

/// `m` i.i.d. uniform points on `[-1, 1]ⁿ` (ChaCha8, keyed by `seed`).
pub fn sample_dataset(n: usize, m: usize, seed: u64) -> PointSet {
    sample_stream(n, m, seed, DATA_STREAM)
}

/// Like [`sample_dataset`] but on an independent stream, for held-out checks.
pub fn sample_fresh(n: usize, m: usize, seed: u64) -> PointSet {
    sample_stream(n, m, seed, EVAL_STREAM)
}

fn sample_stream(n: usize, m: usize, seed: u64, stream: u64) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    draw(&mut rng, n, m)
}

fn draw(rng: &mut ChaCha8Rng, n: usize, m: usize) -> PointSet {
    assert!(n >= 1 && m >= 1);
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    let data = (0..n * m).map(|_| dist.sample(rng)).collect();
    PointSet::new(n, data).expect("n ≥ 1")
}

pub fn train(cfg: &TrainConfig, shape: NetShape, vf: &VectorField, spec: &LossSpec) -> Result<(LyapunovNet, TrainReport)> {
    train_with_observer(cfg, shape, vf, spec, |_| {})
}

/// [`train`] calling `on_epoch` after each epoch's metrics are computed.
pub fn train_with_observer<F>(
    cfg: &TrainConfig,
    shape: NetShape,
    vf: &VectorField,
    spec: &LossSpec,
    mut on_epoch: F,
) -> Result<(LyapunovNet, TrainReport)>
where
    F: FnMut(&EpochRecord),
{
    cfg.validate()?;
    spec.validate()?;
    if shape.n != vf.dim() {
        return Err(Error::ShapeMismatch(format!(
            "network input dimension {} differs from system dimension {}",
            shape.n,
            vf.dim()
        )));
    }
    let start = Instant::now();
    let mut net = LyapunovNet::init(shape, cfg.seed)?;
    if cfg.freeze_first_layer {
        net.set_identity_first_layer();
    }
    let mut history = Vec::new();

    if cfg.max_epochs == 0 {
        return Ok((
            net,
            TrainReport {
                epochs_run: 0,
                converged: false,
                history,
                wall_time_seconds: start.elapsed().as_secs_f64(),
                checkpoint: None,
            },
        ));
    }

    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    data_rng.set_stream(DATA_STREAM);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);

    let mut samples = FieldSamples::new(vf, draw(&mut data_rng, shape.n, cfg.m))?;
    let fresh = cfg
        .fresh_eval_samples
        .map(|k| FieldSamples::new(vf, sample_fresh(shape.n, k, cfg.seed)))
        .transpose()?;

    let frozen = if cfg.freeze_first_layer {
        let lay = shape.layout();
        lay.w1..lay.w2
    } else {
        0..0
    };
    let mut adam = AdamState::new(net.param_count());
    let mut grad = vec![0.0; net.param_count()];
    let mut ws = Workspace::new(&shape);
    let mut order: Vec<usize> = (0..cfg.m).collect();
    let mut converged = false;

    for epoch in 1..=cfg.max_epochs {
        if epoch > 1 && cfg.resample_each_epoch {
            samples = FieldSamples::new(vf, draw(&mut data_rng, shape.n, cfg.m))?;
        }
        if cfg.shuffle_each_epoch {
            order.shuffle(&mut shuffle_rng);
        }
        let mut batch_loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let loss = samples.gradient_on(spec, &net, batch, &mut ws, &mut grad);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "loss or gradient at epoch {epoch}, batch {b} (loss = {loss})"
                )));
            }
            grad[frozen.clone()].fill(0.0);
            batch_loss_sum += loss;
            adam.step(net.params_mut(), &grad, &cfg.adam);
        }

        let metrics = samples.summary(spec, &net);
        if !metrics.mean.is_finite() || !metrics.max.is_finite() {
            return Err(Error::NonFinite(format!("metrics after epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            err1: metrics.mean,
            err_inf: metrics.max,
            mean_batch_loss: batch_loss_sum / cfg.steps_per_epoch() as f64,
            fresh: fresh.as_ref().map(|f| f.summary(spec, &net)),
        };
        on_epoch(&record);
        history.push(record);
        if metrics.mean < cfg.tol && metrics.max < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok((
        net,
        TrainReport {
            epochs_run: history.len(),
            converged,
            history,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            checkpoint: None,
        },
    ))
}
