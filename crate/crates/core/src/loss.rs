//! Pointwise training loss and its batch aggregates.
//!
//! For a candidate value `w = W(x)`, gradient `p = DW(x)` and field value `f(x)`:
//!
//! ```text
//! q    = p·f(x) + ‖x‖²
//! L    = R(q) + ν ( [w - α₁(‖x‖)]₋² + [w - α₂(‖x‖)]₊² )
//! R(q) = q²          (equation form, `Pde`)
//! R(q) = [q]₊²       (inequality form, `Pdi`)
//! ```
//!
//! with `αᵢ(r) = cᵢ rᵖ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffmath::DualBundle;
use crate::dynamics::VectorField;
use crate::network::{LyapunovNet, Workspace};
use crate::{Error, PointSet, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Pde,
    Pdi,
}

/// `α₁(r) = c1·r^power`, `α₂(r) = c2·r^power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub c1: f64,
    pub c2: f64,
    pub power: f64,
}

impl BoundSpec {
    pub fn new(c1: f64, c2: f64, power: f64) -> Result<Self> {
        let b = Self { c1, c2, power };
        b.validate()?;
        Ok(b)
    }

    pub fn quadratic(c1: f64, c2: f64) -> Result<Self> {
        Self::new(c1, c2, 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidConfig(format!("c1 must be positive, got {}", self.c1)));
        }
        if !(self.c2 > self.c1 && self.c2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "c2 must exceed c1 = {}, got {}",
                self.c1, self.c2
            )));
        }
        if !(self.power >= 1.0 && self.power.is_finite()) {
            return Err(Error::InvalidConfig(format!("power must be at least 1, got {}", self.power)));
        }
        Ok(())
    }

    /// `r^power` from `‖x‖²`.
    fn radial(&self, norm_sq: f64) -> f64 {
        if self.power == 2.0 {
            norm_sq
        } else {
            norm_sq.powf(0.5 * self.power)
        }
    }

    /// `(α₁(‖x‖), α₂(‖x‖))` from `‖x‖²`.
    pub fn bounds_at(&self, norm_sq: f64) -> (f64, f64) {
        let r = self.radial(norm_sq);
        (self.c1 * r, self.c2 * r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub nu: f64,
    pub bounds: BoundSpec,
}

impl LossSpec {
    pub fn new(kind: LossKind, nu: f64, bounds: BoundSpec) -> Result<Self> {
        let s = Self { kind, nu, bounds };
        s.validate()?;
        Ok(s)
    }

    pub fn pdi(c1: f64, c2: f64) -> Result<Self> {
        Self::new(LossKind::Pdi, 1.0, BoundSpec::quadratic(c1, c2)?)
    }

    pub fn pde(c1: f64, c2: f64) -> Result<Self> {
        Self::new(LossKind::Pde, 1.0, BoundSpec::quadratic(c1, c2)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidConfig(format!("nu must be finite and non-negative, got {}", self.nu)));
        }
        self.bounds.validate()
    }

    /// Loss from `w`, the orbital derivative `dwf = p·f(x)` and `‖x‖²`, together
    /// with `∂L/∂w` and `∂L/∂dwf`.
    #[inline]
    pub fn eval_orbital(&self, w: f64, dwf: f64, norm_sq: f64) -> PointLoss {
        let q = dwf + norm_sq;
        let qr = match self.kind {
            LossKind::Pde => q,
            LossKind::Pdi => q.max(0.0),
        };
        let (lo, hi) = self.bounds.bounds_at(norm_sq);
        let below = (w - lo).min(0.0);
        let above = (w - hi).max(0.0);
        PointLoss {
            value: qr * qr + self.nu * (below * below + above * above),
            d_w: 2.0 * self.nu * (below + above),
            d_dwf: 2.0 * qr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLoss {
    pub value: f64,
    pub d_w: f64,
    pub d_dwf: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `L(w, p, x)` with `fx = f(x)` supplied by the caller.
pub fn loss_pointwise(spec: &LossSpec, w: f64, p: &[f64], x: &[f64], fx: &[f64]) -> f64 {
    assert!(p.len() == x.len() && x.len() == fx.len(), "p, x and fx must have equal length");
    spec.eval_orbital(w, dot(p, fx), dot(x, x)).value
}

/// Mean and maximum of a list of pointwise losses, summed in index order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub mean: f64,
    pub max: f64,
}

impl LossSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let sum: f64 = values.iter().sum();
        Self {
            mean: sum / values.len() as f64,
            max: values.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// States together with the field evaluated at them, so `f` is computed once per point.
#[derive(Debug, Clone)]
pub struct FieldSamples {
    points: PointSet,
    fields: PointSet,
}

impl FieldSamples {
    pub fn new(vf: &VectorField, points: PointSet) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Dimension("need at least one point".into()));
        }
        if points.dim() != vf.dim() {
            return Err(Error::Dimension(format!(
                "points have dimension {}, field has {}",
                points.dim(),
                vf.dim()
            )));
        }
        let mut data = vec![0.0; points.as_flat().len()];
        data.par_chunks_mut(points.dim())
            .zip(points.as_flat().par_chunks(points.dim()))
            .try_for_each(|(out, x)| vf.eval_into(x, out))?;
        let fields = PointSet::new(points.dim(), data)?;
        Ok(Self { points, fields })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn fields(&self) -> &PointSet {
        &self.fields
    }

    /// Pointwise losses in index order. Evaluated in parallel; the result does not
    /// depend on the thread count.
    pub fn losses(&self, spec: &LossSpec, net: &LyapunovNet) -> Vec<f64> {
        const CHUNK: usize = 1024;
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let mut ws = Workspace::new(net.shape());
            for (j, slot) in chunk.iter_mut().enumerate() {
                let i = c * CHUNK + j;
                let (x, fx) = (self.points.point(i), self.fields.point(i));
                let o = net.orbital(x, fx, &mut ws);
                *slot = spec.eval_orbital(o.w, o.dwf, dot(x, x)).value;
            }
        });
        out
    }

    pub fn summary(&self, spec: &LossSpec, net: &LyapunovNet) -> LossSummary {
        LossSummary::from_values(&self.losses(spec, net))
    }

    /// Mean loss over `indices` and its parameter gradient, written to `grad`
    /// (overwritten). Sequential and order-deterministic.
    pub fn gradient_on(
        &self,
        spec: &LossSpec,
        net: &LyapunovNet,
        indices: &[usize],
        ws: &mut Workspace,
        grad: &mut [f64],
    ) -> f64 {
        assert_eq!(grad.len(), net.param_count());
        grad.fill(0.0);
        let scale = 1.0 / indices.len() as f64;
        let mut total = 0.0;
        for &i in indices {
            let (x, fx) = (self.points.point(i), self.fields.point(i));
            let o = net.orbital(x, fx, ws);
            let pl = spec.eval_orbital(o.w, o.dwf, dot(x, x));
            total += pl.value;
            if pl.d_w != 0.0 || pl.d_dwf != 0.0 {
                net.backprop(x, fx, ws, pl.d_w * scale, pl.d_dwf * scale, grad);
            }
        }
        total * scale
    }
}

/// `(mean, max)` of the pointwise loss of `net` over `points`.
pub fn batch_loss(spec: &LossSpec, net: &LyapunovNet, vf: &VectorField, points: &PointSet) -> Result<LossSummary> {
    check_net(net, vf)?;
    Ok(FieldSamples::new(vf, points.clone())?.summary(spec, net))
}

/// Mean loss over `points` and its exact gradient with respect to every parameter.
pub fn loss_param_gradient(
    spec: &LossSpec,
    net: &LyapunovNet,
    vf: &VectorField,
    points: &PointSet,
) -> Result<DualBundle> {
    check_net(net, vf)?;
    let samples = FieldSamples::new(vf, points.clone())?;
    let indices: Vec<usize> = (0..samples.len()).collect();
    let mut grad = vec![0.0; net.param_count()];
    let mut ws = Workspace::new(net.shape());
    let value = samples.gradient_on(spec, net, &indices, &mut ws, &mut grad);
    Ok(DualBundle::new(value, grad))
}

fn check_net(net: &LyapunovNet, vf: &VectorField) -> Result<()> {
    if net.shape().n != vf.dim() {
        return Err(Error::ShapeMismatch(format!(
            "network input dimension {} differs from system dimension {}",
            net.shape().n,
            vf.dim()
        )));
    }
    Ok(())
}
