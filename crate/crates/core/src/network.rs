//! The compositional Lyapunov network.
//!
//! ```text
//! x ∈ Rⁿ ──► y = W₁x + b₁ ∈ R^{n_sub·d_max}      (linear layer)
//!            ȳᵢ = slice i of y, length d_max
//!            zᵢₖ = ŵᵢₖ·ȳᵢ + b̂ᵢₖ,  k = 1..M       (sublayer i, softplus)
//! W(x) = Σᵢₖ aᵢₖ softplus(zᵢₖ) + c
//! ```
//!
//! All parameters live in one flat vector `θ` laid out as
//! `[W₁ (row-major), b₁, Ŵ (sublayer-major, row-major), b̂, a, c]`, which is
//! also the order of every gradient returned by this crate.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffmath::{softplus, softplus_with_d1, DualBundle};
use crate::{Error, Result};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

const INIT_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetShape {
    /// Input dimension.
    pub n: usize,
    /// Number of sublayers.
    pub n_sub: usize,
    /// Inputs per sublayer.
    pub d_max: usize,
    /// Softplus neurons per sublayer.
    pub m_per: usize,
}

impl NetShape {
    pub fn new(n: usize, n_sub: usize, d_max: usize, m_per: usize) -> Result<Self> {
        let shape = Self {
            n,
            n_sub,
            d_max,
            m_per,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n", self.n),
            ("n_sub", self.n_sub),
            ("d_max", self.d_max),
            ("m_per", self.m_per),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("network {name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Width of the linear first hidden layer.
    pub fn first_width(&self) -> usize {
        self.n_sub * self.d_max
    }

    /// Softplus neurons across all sublayers.
    pub fn second_width(&self) -> usize {
        self.n_sub * self.m_per
    }

    pub fn hidden_neurons(&self) -> usize {
        self.first_width() + self.second_width()
    }

    pub fn param_count(&self) -> usize {
        self.n_sub * self.d_max * (self.n + 1)
            + self.n_sub * self.m_per * (self.d_max + 1)
            + self.n_sub * self.m_per
            + 1
    }

    pub fn layout(&self) -> Layout {
        let w1 = 0;
        let b1 = w1 + self.first_width() * self.n;
        let w2 = b1 + self.first_width();
        let b2 = w2 + self.second_width() * self.d_max;
        let a = b2 + self.second_width();
        let c = a + self.second_width();
        Layout { w1, b1, w2, b2, a, c }
    }
}

/// Offsets of each parameter block inside `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
    pub a: usize,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovNet {
    shape: NetShape,
    params: Vec<f64>,
}

/// Per-point intermediate values kept between the forward and backward pass.
#[derive(Debug, Clone)]
pub struct Workspace {
    y1: Vec<f64>,
    v1: Vec<f64>,
    sp: Vec<f64>,
    s1: Vec<f64>,
    u: Vec<f64>,
    dy1: Vec<f64>,
    dv1: Vec<f64>,
}

impl Workspace {
    pub fn new(shape: &NetShape) -> Self {
        let (h1, h2) = (shape.first_width(), shape.second_width());
        Self {
            y1: vec![0.0; h1],
            v1: vec![0.0; h1],
            sp: vec![0.0; h2],
            s1: vec![0.0; h2],
            u: vec![0.0; h2],
            dy1: vec![0.0; h1],
            dv1: vec![0.0; h1],
        }
    }
}

/// `W(x)` and the orbital derivative `DW(x)·f(x)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalValue {
    pub w: f64,
    pub dwf: f64,
}

impl LyapunovNet {
    /// Glorot-uniform weights (per layer, per sublayer for `Ŵ`), zero biases.
    pub fn init(shape: NetShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INIT_STREAM);
        let mut net = Self::zeros(shape)?;
        let lay = shape.layout();
        let glorot = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Uniform::new_inclusive(-limit, limit)
        };

        let dist = glorot(shape.n, shape.first_width());
        for p in &mut net.params[lay.w1..lay.b1] {
            *p = dist.sample(&mut rng);
        }
        let dist = glorot(shape.d_max, shape.m_per);
        for p in &mut net.params[lay.w2..lay.b2] {
            *p = dist.sample(&mut rng);
        }
        let dist = glorot(shape.second_width(), 1);
        for p in &mut net.params[lay.a..lay.c] {
            *p = dist.sample(&mut rng);
        }
        Ok(net)
    }

    pub fn zeros(shape: NetShape) -> Result<Self> {
        shape.validate()?;
        Ok(Self {
            shape,
            params: vec![0.0; shape.param_count()],
        })
    }

    pub fn from_params(shape: NetShape, params: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if params.len() != shape.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "shape needs {} parameters, got {}",
                shape.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameter".into()));
        }
        Ok(Self { shape, params })
    }

    /// Makes the first layer select coordinates: row `k` of `W₁` is the unit vector
    /// `e_{k mod n}` and `b₁ = 0`. With `n_sub = n`, `d_max = 1` this is the
    /// one-hidden-layer network acting on the raw coordinates.
    pub fn set_identity_first_layer(&mut self) {
        let (n, h1) = (self.shape.n, self.shape.first_width());
        let lay = self.shape.layout();
        for k in 0..h1 {
            for j in 0..n {
                self.params[lay.w1 + k * n + j] = if j == k % n { 1.0 } else { 0.0 };
            }
        }
        self.params[lay.b1..lay.w2].fill(0.0);
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn w1(&self) -> &[f64] {
        let l = self.shape.layout();
        &self.params[l.w1..l.b1]
    }

    pub fn b1(&self) -> &[f64] {
        let l = self.shape.layout();
        &self.params[l.b1..l.w2]
    }

    pub fn w2(&self) -> &[f64] {
        let l = self.shape.layout();
        &self.params[l.w2..l.b2]
    }

    pub fn b2(&self) -> &[f64] {
        let l = self.shape.layout();
        &self.params[l.b2..l.a]
    }

    pub fn a(&self) -> &[f64] {
        let l = self.shape.layout();
        &self.params[l.a..l.c]
    }

    pub fn c(&self) -> f64 {
        self.params[self.shape.layout().c]
    }

    fn first_layer(&self, x: &[f64], y1: &mut [f64]) {
        let n = self.shape.n;
        for ((y, row), b) in y1.iter_mut().zip(self.w1().chunks_exact(n)).zip(self.b1()) {
            *y = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b;
        }
    }

    fn check_input(&self, x: &[f64]) {
        assert_eq!(x.len(), self.shape.n, "input length must equal network dimension");
    }

    /// `W(x; θ)`.
    pub fn forward(&self, x: &[f64]) -> f64 {
        self.check_input(x);
        let mut y1 = vec![0.0; self.shape.first_width()];
        self.first_layer(x, &mut y1);
        (0..self.shape.n_sub)
            .map(|i| self.sublayer_output(i, &y1))
            .sum::<f64>()
            + self.c()
    }

    fn sublayer_output(&self, i: usize, y1: &[f64]) -> f64 {
        let NetShape { d_max, m_per, .. } = self.shape;
        let ybar = &y1[i * d_max..(i + 1) * d_max];
        let (w2, b2, a) = (self.w2(), self.b2(), self.a());
        (i * m_per..(i + 1) * m_per)
            .map(|k| {
                let row = &w2[k * d_max..(k + 1) * d_max];
                let z = row.iter().zip(ybar).map(|(w, y)| w * y).sum::<f64>() + b2[k];
                a[k] * softplus(z)
            })
            .sum()
    }

    /// Contribution of sublayer `i` to `W(x) - c`.
    pub fn sublayer_contribution(&self, i: usize, x: &[f64]) -> f64 {
        self.check_input(x);
        assert!(i < self.shape.n_sub);
        let mut y1 = vec![0.0; self.shape.first_width()];
        self.first_layer(x, &mut y1);
        self.sublayer_output(i, &y1)
    }

    /// `∇ₓ W(x; θ)`.
    pub fn grad_x(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_grad_x(x).grad
    }

    pub fn value_and_grad_x(&self, x: &[f64]) -> DualBundle {
        self.check_input(x);
        let NetShape { n, d_max, .. } = self.shape;
        let mut y1 = vec![0.0; self.shape.first_width()];
        self.first_layer(x, &mut y1);
        let (w2, b2, a) = (self.w2(), self.b2(), self.a());

        // g = ∂W/∂y
        let mut g = vec![0.0; self.shape.first_width()];
        let mut value = self.c();
        for (k, row) in w2.chunks_exact(d_max).enumerate() {
            let i = k / self.shape.m_per;
            let ybar = &y1[i * d_max..(i + 1) * d_max];
            let z = row.iter().zip(ybar).map(|(w, y)| w * y).sum::<f64>() + b2[k];
            let (sp, s1) = softplus_with_d1(z);
            value += a[k] * sp;
            let scale = a[k] * s1;
            for (gj, wj) in g[i * d_max..(i + 1) * d_max].iter_mut().zip(row) {
                *gj += scale * wj;
            }
        }
        let mut grad = vec![0.0; n];
        for (row, gk) in self.w1().chunks_exact(n).zip(&g) {
            for (o, w) in grad.iter_mut().zip(row) {
                *o += gk * w;
            }
        }
        DualBundle::new(value, grad)
    }

    /// `W(x)` and `DW(x)·fx`, leaving the intermediates in `ws` for [`Self::backprop`].
    pub fn orbital(&self, x: &[f64], fx: &[f64], ws: &mut Workspace) -> OrbitalValue {
        self.check_input(x);
        let d_max = self.shape.d_max;
        self.first_layer(x, &mut ws.y1);
        // v = W₁ fx: the direction of y along the flow.
        let n = self.shape.n;
        for (v, row) in ws.v1.iter_mut().zip(self.w1().chunks_exact(n)) {
            *v = row.iter().zip(fx).map(|(w, f)| w * f).sum();
        }
        let (w2, b2, a) = (self.w2(), self.b2(), self.a());
        let mut w = self.c();
        let mut dwf = 0.0;
        for (k, row) in w2.chunks_exact(d_max).enumerate() {
            let i = k / self.shape.m_per;
            let ybar = &ws.y1[i * d_max..(i + 1) * d_max];
            let vbar = &ws.v1[i * d_max..(i + 1) * d_max];
            let mut z = b2[k];
            let mut u = 0.0;
            for j in 0..d_max {
                z += row[j] * ybar[j];
                u += row[j] * vbar[j];
            }
            let (sp, s1) = softplus_with_d1(z);
            ws.sp[k] = sp;
            ws.s1[k] = s1;
            ws.u[k] = u;
            w += a[k] * sp;
            dwf += a[k] * s1 * u;
        }
        OrbitalValue { w, dwf }
    }

    /// Adds `gw·∂W/∂θ + gd·∂(DW·fx)/∂θ` to `grad`. `ws` must come from
    /// [`Self::orbital`] at the same `(x, fx)`.
    pub fn backprop(&self, x: &[f64], fx: &[f64], ws: &mut Workspace, gw: f64, gd: f64, grad: &mut [f64]) {
        let NetShape { n, d_max, .. } = self.shape;
        let lay = self.shape.layout();
        let (w2, a) = (self.w2(), self.a());
        ws.dy1.fill(0.0);
        ws.dv1.fill(0.0);

        for (k, row) in w2.chunks_exact(d_max).enumerate() {
            let i = k / self.shape.m_per;
            let (sp, s1, u) = (ws.sp[k], ws.s1[k], ws.u[k]);
            let s2 = s1 * (1.0 - s1);
            // ∂/∂z and ∂/∂u of gw·W + gd·DWf for this neuron
            let gz = a[k] * (gw * s1 + gd * s2 * u);
            let gu = gd * a[k] * s1;

            grad[lay.a + k] += gw * sp + gd * s1 * u;
            grad[lay.b2 + k] += gz;
            let gw2 = &mut grad[lay.w2 + k * d_max..lay.w2 + (k + 1) * d_max];
            let lo = i * d_max;
            for j in 0..d_max {
                gw2[j] += gz * ws.y1[lo + j] + gu * ws.v1[lo + j];
                ws.dy1[lo + j] += gz * row[j];
                ws.dv1[lo + j] += gu * row[j];
            }
        }
        grad[lay.c] += gw;

        for r in 0..self.shape.first_width() {
            let (dy, dv) = (ws.dy1[r], ws.dv1[r]);
            grad[lay.b1 + r] += dy;
            let gw1 = &mut grad[lay.w1 + r * n..lay.w1 + (r + 1) * n];
            for ((g, xc), fc) in gw1.iter_mut().zip(x).zip(fx) {
                *g += dy * xc + dv * fc;
            }
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            shape: self.shape,
            w1: self.w1().to_vec(),
            b1: self.b1().to_vec(),
            w2: self.w2().to_vec(),
            b2: self.b2().to_vec(),
            a: self.a().to_vec(),
            c: self.c(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint schema_version {} (expected {CHECKPOINT_SCHEMA_VERSION})",
                ck.schema_version
            )));
        }
        let s = ck.shape;
        s.validate().map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        let expect = [
            ("w1", ck.w1.len(), s.first_width() * s.n),
            ("b1", ck.b1.len(), s.first_width()),
            ("w2", ck.w2.len(), s.second_width() * s.d_max),
            ("b2", ck.b2.len(), s.second_width()),
            ("a", ck.a.len(), s.second_width()),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::ShapeMismatch(format!(
                    "field `{name}` has {got} entries, shape requires {want}"
                )));
            }
        }
        let params = [&ck.w1[..], &ck.b1, &ck.w2, &ck.b2, &ck.a, &[ck.c]].concat();
        Self::from_params(s, params)
    }

    /// JSON checkpoint document.
    pub fn serialize(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_checkpoint()).expect("checkpoint is serializable");
        s.push('\n');
        s
    }

    pub fn deserialize(doc: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(doc).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_checkpoint(&ck)
    }
}

/// On-disk form of a [`LyapunovNet`]. Arrays are row-major; `w2` stacks the
/// `m_per × d_max` matrices of the sublayers in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub shape: NetShape,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub a: Vec<f64>,
    pub c: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffmath::{fd_gradient, rel_err};
    use rand::Rng;

    fn shape(n: usize, n_sub: usize, d_max: usize, m_per: usize) -> NetShape {
        NetShape::new(n, n_sub, d_max, m_per).unwrap()
    }

    /// Straightforward evaluation straight from the layer formulas.
    #[allow(clippy::needless_range_loop)]
    fn reference_forward(net: &LyapunovNet, x: &[f64]) -> f64 {
        let s = net.shape;
        let mut y = Vec::new();
        for k in 0..s.first_width() {
            let mut acc = net.b1()[k];
            for j in 0..s.n {
                acc += net.w1()[k * s.n + j] * x[j];
            }
            y.push(acc);
        }
        let mut out = net.c();
        for i in 0..s.n_sub {
            for k in 0..s.m_per {
                let idx = i * s.m_per + k;
                let mut z = net.b2()[idx];
                for j in 0..s.d_max {
                    z += net.w2()[idx * s.d_max + j] * y[i * s.d_max + j];
                }
                out += net.a()[idx] * (1.0 + z.exp()).ln();
            }
        }
        out
    }

    fn random_net(rng: &mut impl Rng, s: NetShape) -> LyapunovNet {
        let params = (0..s.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        LyapunovNet::from_params(s, params).unwrap()
    }

    #[test]
    fn experiment_parameter_counts() {
        assert_eq!(shape(2, 2, 1, 128).param_count(), 775);
        assert_eq!(shape(10, 5, 2, 128).param_count(), 2671);
        assert_eq!(shape(1, 1, 1, 1).param_count(), 6);
        let l = shape(10, 5, 2, 128).layout();
        assert_eq!(l.c + 1, 2671);
    }

    #[test]
    fn zero_shape_rejected() {
        assert!(NetShape::new(2, 0, 1, 4).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let s = shape(10, 5, 2, 16);
        let a = LyapunovNet::init(s, 7).unwrap();
        let b = LyapunovNet::init(s, 7).unwrap();
        let c = LyapunovNet::init(s, 8).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn init_respects_glorot_limits_and_zero_biases() {
        let s = shape(10, 5, 2, 128);
        let net = LyapunovNet::init(s, 3).unwrap();
        let lim1 = (6.0f64 / 20.0).sqrt();
        let lim2 = (6.0f64 / 130.0).sqrt();
        let lim3 = (6.0f64 / 641.0).sqrt();
        assert!(net.w1().iter().all(|w| w.abs() <= lim1));
        assert!(net.w2().iter().all(|w| w.abs() <= lim2));
        assert!(net.a().iter().all(|w| w.abs() <= lim3));
        assert!(net.b1().iter().chain(net.b2()).all(|&b| b == 0.0));
        assert_eq!(net.c(), 0.0);
    }

    #[test]
    fn zero_net_is_zero() {
        let net = LyapunovNet::zeros(shape(3, 2, 2, 4)).unwrap();
        assert_eq!(net.forward(&[0.3, -1.0, 2.0]), 0.0);
        assert_eq!(net.grad_x(&[0.3, -1.0, 2.0]), vec![0.0; 3]);
    }

    #[test]
    fn single_neuron() {
        let s = shape(2, 1, 1, 1);
        // w1 = (1, 0), b1 = 0, w2 = 1, b2 = 0, a = 1, c = 0
        let net = LyapunovNet::from_params(s, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((net.forward(&[0.0, 5.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(net.grad_x(&[0.0, 5.0]), vec![0.5, 0.0]);
    }

    #[test]
    fn forward_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = shape(rng.gen_range(1..5), rng.gen_range(1..4), rng.gen_range(1..3), rng.gen_range(1..9));
            let net = random_net(&mut rng, s);
            let x: Vec<f64> = (0..s.n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (got, want) = (net.forward(&x), reference_forward(&net, &x));
            assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()), "{got} vs {want}");
        }
    }

    #[test]
    fn grad_x_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let s = shape(rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..3), rng.gen_range(1..9));
            let net = random_net(&mut rng, s);
            let x: Vec<f64> = (0..s.n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fd = fd_gradient(|p| net.forward(p), &x, 1e-4);
            let g = net.value_and_grad_x(&x);
            assert!((g.value - net.forward(&x)).abs() < 1e-13 * (1.0 + g.value.abs()));
            for (a, b) in g.grad.iter().zip(&fd) {
                assert!(rel_err(*a, *b) < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn orbital_matches_grad_dot_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = shape(3, 2, 2, 5);
        let net = random_net(&mut rng, s);
        let mut ws = Workspace::new(&s);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fx: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let o = net.orbital(&x, &fx, &mut ws);
            let g = net.grad_x(&x);
            let dot: f64 = g.iter().zip(&fx).map(|(a, b)| a * b).sum();
            assert!((o.w - net.forward(&x)).abs() < 1e-13);
            assert!((o.dwf - dot).abs() < 1e-12);
        }
    }

    #[test]
    fn backprop_matches_finite_differences_over_theta() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let s = shape(rng.gen_range(1..4), rng.gen_range(1..3), rng.gen_range(1..3), rng.gen_range(1..6));
            let net = random_net(&mut rng, s);
            let x: Vec<f64> = (0..s.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fx: Vec<f64> = (0..s.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (gw, gd) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mut ws = Workspace::new(&s);
            net.orbital(&x, &fx, &mut ws);
            let mut grad = vec![0.0; s.param_count()];
            net.backprop(&x, &fx, &mut ws, gw, gd, &mut grad);

            let fd = fd_gradient(
                |theta| {
                    let probe = LyapunovNet::from_params(s, theta.to_vec()).unwrap();
                    let mut ws = Workspace::new(&s);
                    let o = probe.orbital(&x, &fx, &mut ws);
                    gw * o.w + gd * o.dwf
                },
                net.params(),
                1e-4,
            );
            for (a, b) in grad.iter().zip(&fd) {
                assert!(rel_err(*a, *b) < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn sublayers_add_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let s = shape(10, 5, 2, 8);
        let net = random_net(&mut rng, s);
        for _ in 0..20 {
            let x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sum: f64 = (0..5).map(|i| net.sublayer_contribution(i, &x)).sum();
            let w = net.forward(&x) - net.c();
            assert!((sum - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn cut_sublayer_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let s = shape(4, 3, 2, 6);
        let mut net = random_net(&mut rng, s);
        let lay = s.layout();
        let i = 1;
        for r in i * s.d_max..(i + 1) * s.d_max {
            net.params_mut()[lay.w1 + r * s.n..lay.w1 + (r + 1) * s.n].fill(0.0);
            net.params_mut()[lay.b1 + r] = 0.0;
        }
        let at_zero = net.sublayer_contribution(i, &[0.0; 4]);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert_eq!(net.sublayer_contribution(i, &x), at_zero);
        }
    }

    #[test]
    fn identity_first_layer() {
        let s = shape(3, 3, 1, 4);
        let mut net = LyapunovNet::init(s, 1).unwrap();
        net.set_identity_first_layer();
        assert_eq!(net.w1(), &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let s = shape(2, 2, 1, 128);
        let net = random_net(&mut rng, s);
        let back = LyapunovNet::deserialize(&net.serialize()).unwrap();
        assert_eq!(back.param_count(), 775);
        assert_eq!(back.params(), net.params());
        for _ in 0..100 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            assert_eq!(back.forward(&x).to_bits(), net.forward(&x).to_bits());
        }
    }

    #[test]
    fn checkpoint_errors() {
        let net = LyapunovNet::init(shape(2, 1, 1, 2), 0).unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&net.serialize()).unwrap();
        doc.as_object_mut().unwrap().remove("a");
        assert!(matches!(LyapunovNet::deserialize(&doc.to_string()), Err(Error::Schema(_))));

        let mut doc: serde_json::Value = serde_json::from_str(&net.serialize()).unwrap();
        doc["b2"] = serde_json::json!([0.0]);
        assert!(matches!(LyapunovNet::deserialize(&doc.to_string()), Err(Error::ShapeMismatch(_))));

        let mut doc: serde_json::Value = serde_json::from_str(&net.serialize()).unwrap();
        doc["schema_version"] = serde_json::json!(99);
        assert!(matches!(LyapunovNet::deserialize(&doc.to_string()), Err(Error::Schema(_))));

        assert!(matches!(LyapunovNet::deserialize("not json"), Err(Error::Schema(_))));
    }
}
