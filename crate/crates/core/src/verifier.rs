//! A-posteriori checks of a trained network.
//!
//! Sampled checks of the bounds and of the decrease inequality, fixed-step RK4
//! trajectories with `W` along them, and planar slices for plotting.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::VectorField;
use crate::loss::{FieldSamples, LossSpec};
use crate::network::{LyapunovNet, Workspace};
use crate::{Error, PointSet, Result};

pub const DEFAULT_EXCLUSION_RADIUS: f64 = 0.05;
pub const DEFAULT_DECREASE_SLACK: f64 = 1e-9;
pub const DEFAULT_DT: f64 = 1e-3;

/// Violation count for one condition, with the largest violation amount over all
/// checked points (negative when every point satisfies the condition with room to
/// spare) and the point where it is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckStats {
    pub checked: usize,
    pub violations: usize,
    pub worst: Option<f64>,
    pub witness: Option<Vec<f64>>,
}

impl CheckStats {
    fn new() -> Self {
        Self {
            checked: 0,
            violations: 0,
            worst: None,
            witness: None,
        }
    }

    fn record(&mut self, amount: f64, x: &[f64]) {
        self.checked += 1;
        if amount > 0.0 {
            self.violations += 1;
        }
        if self.worst.is_none_or(|w| amount > w) {
            self.worst = Some(amount);
            self.witness = Some(x.to_vec());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub points_checked: usize,
    /// Amount is `max(α₁(‖x‖) - W(x), W(x) - α₂(‖x‖))`.
    pub bound_violations: CheckStats,
    /// Amount is `DW(x)·f(x) + ‖x‖²`, only over points with `‖x‖ ≥ r0`.
    pub residual_violations: CheckStats,
    pub exclusion_radius: f64,
    pub err1: f64,
    pub err_inf: f64,
}

impl VerifyReport {
    pub fn total_violations(&self) -> usize {
        self.bound_violations.violations + self.residual_violations.violations
    }
}

struct PointCheck {
    loss: f64,
    bound: f64,
    residual: f64,
    norm_sq: f64,
}

/// Checks `α₁(‖x‖) ≤ W(x) ≤ α₂(‖x‖)` at every point and `DW(x)·f(x) + ‖x‖² ≤ 0` at
/// every point with `‖x‖ ≥ r0`.
pub fn verify_samples(
    net: &LyapunovNet,
    vf: &VectorField,
    spec: &LossSpec,
    points: &PointSet,
    r0: f64,
) -> Result<VerifyReport> {
    if r0.is_nan() || r0 < 0.0 {
        return Err(Error::InvalidConfig(format!("exclusion radius must be non-negative, got {r0}")));
    }
    if net.shape().n != vf.dim() {
        return Err(Error::ShapeMismatch(format!(
            "network input dimension {} differs from system dimension {}",
            net.shape().n,
            vf.dim()
        )));
    }
    let samples = FieldSamples::new(vf, points.clone())?;
    let checks: Vec<PointCheck> = (0..samples.len())
        .into_par_iter()
        .map_init(
            || Workspace::new(net.shape()),
            |ws, i| {
                let (x, fx) = (samples.points().point(i), samples.fields().point(i));
                let o = net.orbital(x, fx, ws);
                let norm_sq: f64 = x.iter().map(|v| v * v).sum();
                let (lo, hi) = spec.bounds.bounds_at(norm_sq);
                PointCheck {
                    loss: spec.eval_orbital(o.w, o.dwf, norm_sq).value,
                    bound: (lo - o.w).max(o.w - hi),
                    residual: o.dwf + norm_sq,
                    norm_sq,
                }
            },
        )
        .collect();

    let mut bounds = CheckStats::new();
    let mut residual = CheckStats::new();
    let (mut sum, mut max) = (0.0, 0.0f64);
    let r0_sq = r0 * r0;
    for (c, x) in checks.iter().zip(points.iter()) {
        sum += c.loss;
        max = max.max(c.loss);
        bounds.record(c.bound, x);
        if c.norm_sq >= r0_sq {
            residual.record(c.residual, x);
        }
    }
    Ok(VerifyReport {
        points_checked: checks.len(),
        bound_violations: bounds,
        residual_violations: residual,
        exclusion_radius: r0,
        err1: sum / checks.len() as f64,
        err_inf: max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `W` along `states`; empty until a network is attached.
    pub w_values: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn attach(&mut self, net: &LyapunovNet) {
        self.w_values = self.states.iter().map(|x| net.forward(x)).collect();
    }

    /// `t,W` rows with a header line.
    pub fn write_w_series<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,W")?;
        for (t, w) in self.times.iter().zip(&self.w_values) {
            writeln!(out, "{t},{w}")?;
        }
        Ok(())
    }
}

/// Classical fixed-step RK4 from `x0` over `[0, t_end]`. The last step is shortened
/// when `t_end` is not a multiple of `dt`. If `net` is given, `W` is evaluated along
/// the solution.
pub fn integrate(
    vf: &VectorField,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    net: Option<&LyapunovNet>,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::InvalidConfig(format!("t_end = {t_end} must be at least dt = {dt}")));
    }
    if x0.len() != vf.dim() {
        return Err(Error::Dimension(format!(
            "initial state has length {}, system dimension is {}",
            x0.len(),
            vf.dim()
        )));
    }
    if let Some(net) = net {
        if net.shape().n != vf.dim() {
            return Err(Error::ShapeMismatch(format!(
                "network input dimension {} differs from system dimension {}",
                net.shape().n,
                vf.dim()
            )));
        }
    }
    let ratio = t_end / dt;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };

    let n = vf.dim();
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(x0.to_vec());
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut x = x0.to_vec();
    for s in 1..=steps {
        let t_next = if s == steps { t_end } else { s as f64 * dt };
        let h = t_next - times[s - 1];
        vf.eval_into(&x, &mut k1)?;
        axpy(&x, 0.5 * h, &k1, &mut tmp);
        vf.eval_into(&tmp, &mut k2)?;
        axpy(&x, 0.5 * h, &k2, &mut tmp);
        vf.eval_into(&tmp, &mut k3)?;
        axpy(&x, h, &k3, &mut tmp);
        vf.eval_into(&tmp, &mut k4)?;
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("trajectory state at t = {t_next}")));
        }
        times.push(t_next);
        states.push(x.clone());
    }
    let mut traj = Trajectory {
        times,
        states,
        w_values: Vec::new(),
    };
    if let Some(net) = net {
        traj.attach(net);
    }
    Ok(traj)
}

fn axpy(x: &[f64], h: f64, k: &[f64], out: &mut [f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + h * ki;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecreaseCheck {
    pub monotone: bool,
    pub first_violation: Option<usize>,
}

/// `W` is non-increasing up to `slack`: `w[k+1] ≤ w[k] + slack` for all `k`.
pub fn check_decrease(traj: &Trajectory, slack: f64) -> Result<DecreaseCheck> {
    let w = &traj.w_values;
    if w.len() < 2 {
        return Err(Error::InvalidConfig(
            "decrease check needs at least two W values; attach a network to the trajectory".into(),
        ));
    }
    let first_violation = w.windows(2).position(|p| p[1] > p[0] + slack);
    Ok(DecreaseCheck {
        monotone: first_violation.is_none(),
        first_violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub xi: f64,
    pub xj: f64,
    pub w: f64,
    pub dwf: f64,
}

/// `W` and `DW·f` on a `resolution × resolution` grid over `[-half_width, half_width]²`
/// in coordinates `axis_i`, `axis_j` (zero-based); all other coordinates are 0.
/// Rows run over `xi` in the outer loop.
pub fn export_slice(
    net: &LyapunovNet,
    vf: &VectorField,
    axis_i: usize,
    axis_j: usize,
    half_width: f64,
    resolution: usize,
) -> Result<Vec<SliceRow>> {
    let n = vf.dim();
    if axis_i == axis_j || axis_i >= n || axis_j >= n {
        return Err(Error::InvalidConfig(format!(
            "slice axes must be distinct and below {n}, got {axis_i} and {axis_j}"
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidConfig(format!("resolution must be at least 2, got {resolution}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidConfig(format!("half width must be positive, got {half_width}")));
    }
    if net.shape().n != n {
        return Err(Error::ShapeMismatch(format!(
            "network input dimension {} differs from system dimension {n}",
            net.shape().n
        )));
    }
    let coord = |k: usize| -half_width + 2.0 * half_width * k as f64 / (resolution - 1) as f64;
    let mut ws = Workspace::new(net.shape());
    let mut x = vec![0.0; n];
    let mut fx = vec![0.0; n];
    let mut rows = Vec::with_capacity(resolution * resolution);
    for a in 0..resolution {
        for b in 0..resolution {
            x[axis_i] = coord(a);
            x[axis_j] = coord(b);
            vf.eval_into(&x, &mut fx)?;
            let o = net.orbital(&x, &fx, &mut ws);
            rows.push(SliceRow {
                xi: x[axis_i],
                xj: x[axis_j],
                w: o.w,
                dwf: o.dwf,
            });
        }
    }
    Ok(rows)
}

/// Comma-separated `xi,xj,W,DWf` with a header line.
pub fn write_slice_csv<W: Write>(rows: &[SliceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "xi,xj,W,DWf")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.xi, r.xj, r.w, r.dwf)?;
    }
    Ok(())
}
