use crate::diffmath::{lu_invert, Matrix};
use crate::dynamics::expr::{parse_components, Expr};
use crate::{Error, Result};

pub const BUILTIN_NAMES: [&str; 2] = ["example_2d", "example_10d"];

/// Coordinate transform `T` of the 10-D example, in tenths.
#[rustfmt::skip]
const EXAMPLE_10D_T_TENTHS: [[i8; 10]; 10] = [
    [-2, -3,  5, -8,  8,  4,  7,  7, -10,  8],
    [ 2, 10,  9,  8, -1,  6, -3,  5,   8, -3],
    [-3,  3,  4, -4,  0, -6,  3,  6,  10, -5],
    [-7, -1, -6, -2, -6,  4,  1, -1,   1, -6],
    [ 1, -6, -9, -7, -2, -1,  1,  2,   0, -8],
    [ 6,  9, -2, 10,  4,  5,  0, -1,  -4,  0],
    [-10, 10, 7,  6, -8, -8,  0, -2,  -2,  7],
    [-9,  8,  2, 10, -8,  4, -3,  7,   2, -8],
    [ 6, -1, -4, -5, -3, -1, -7, 10,   8, -3],
    [ 0, -10, -1, 4, -3, -1, -2,  7,  -1,  8],
];

/// Closed-form systems shipped with the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// `ẋ₁ = -x₁ - 10x₂²`, `ẋ₂ = -2x₂`.
    Example2d,
    /// Five damped 2-D oscillators coupled by small quadratic terms (the `f̂` of the 10-D example).
    Example10dCore,
}

impl Builtin {
    fn dim(self) -> usize {
        match self {
            Builtin::Example2d => 2,
            Builtin::Example10dCore => 10,
        }
    }

    fn eval_into(self, x: &[f64], out: &mut [f64]) {
        match self {
            Builtin::Example2d => {
                out[0] = -x[0] - 10.0 * (x[1] * x[1]);
                out[1] = -2.0 * x[1];
            }
            Builtin::Example10dCore => {
                for k in 0..5 {
                    let (a, b) = (x[2 * k], x[2 * k + 1]);
                    out[2 * k] = -a + 0.5 * b;
                    out[2 * k + 1] = -0.5 * a - b;
                }
                out[0] -= 0.1 * x[8] * x[8];
                out[2] -= 0.1 * x[0] * x[0];
                out[4] += 0.1 * x[6] * x[6];
                out[9] += 0.1 * x[1] * x[1];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rhs {
    Expressions(Vec<Expr>),
    Builtin(Builtin),
}

/// A linear change of coordinates `x̃ = T x` with its cached inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    forward: Matrix,
    inverse: Matrix,
}

impl Transform {
    pub fn new(forward: Matrix) -> Result<Self> {
        let inverse = lu_invert(&forward)?;
        let residual = forward
            .matmul(&inverse)?
            .dist_inf(&Matrix::identity(forward.rows()));
        if residual > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "transform is too ill-conditioned (‖T·T⁻¹ - I‖∞ = {residual:e})"
            )));
        }
        Ok(Self { forward, inverse })
    }

    pub fn forward(&self) -> &Matrix {
        &self.forward
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inverse
    }
}

/// Right-hand side of `ẋ = f(x)`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    name: String,
    dim: usize,
    rhs: Rhs,
    transform: Option<Transform>,
}

impl VectorField {
    pub fn from_expressions(name: impl Into<String>, components: Vec<Expr>) -> Result<Self> {
        let dim = components.len();
        if dim == 0 {
            return Err(Error::Arity {
                expected: 1,
                found: 0,
            });
        }
        if let Some(idx) = components.iter().filter_map(Expr::max_var).max() {
            if idx >= dim {
                return Err(Error::UnknownVariable {
                    index: idx + 1,
                    dim,
                    line: 0,
                    column: 0,
                });
            }
        }
        let vf = Self {
            name: name.into(),
            dim,
            rhs: Rhs::Expressions(components),
            transform: None,
        };
        vf.check_origin()?;
        Ok(vf)
    }

    /// Replaces `f` by `x ↦ T⁻¹ f(T x)`.
    pub fn with_transform(mut self, t: Matrix) -> Result<Self> {
        if t.rows() != self.dim || t.cols() != self.dim {
            return Err(Error::Dimension(format!(
                "transform is {}x{} but the system has dimension {}",
                t.rows(),
                t.cols(),
                self.dim
            )));
        }
        self.transform = Some(Transform::new(t)?);
        self.check_origin()?;
        Ok(self)
    }

    fn check_origin(&self) -> Result<()> {
        self.eval(&vec![0.0; self.dim]).map(|_| ())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rhs(&self) -> &Rhs {
        &self.rhs
    }

    pub fn transform(&self) -> Option<&Transform> {
        self.transform.as_ref()
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Writes `f(x)` into `out`; fails if any component is NaN or infinite.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim || out.len() != self.dim {
            return Err(Error::Dimension(format!(
                "state has length {}, field `{}` has dimension {}",
                x.len(),
                self.name,
                self.dim
            )));
        }
        match &self.transform {
            None => self.eval_core(x, out)?,
            Some(t) => {
                let tx = t.forward.mul_vec(x);
                let mut fhat = vec![0.0; self.dim];
                self.eval_core(&tx, &mut fhat)?;
                t.inverse.mul_vec_into(&fhat, out);
            }
        }
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "component {} of `{}` at {x:?} is {}",
                i + 1,
                self.name,
                out[i]
            )));
        }
        Ok(())
    }

    fn eval_core(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.rhs {
            Rhs::Builtin(b) => b.eval_into(x, out),
            Rhs::Expressions(es) => {
                for (o, e) in out.iter_mut().zip(es) {
                    *o = e.eval(x)?;
                }
            }
        }
        Ok(())
    }
}

/// Parses `n` component expressions separated by newlines or `;`.
pub fn parse_vector_field(source: &str, n: usize) -> Result<VectorField> {
    let comps = parse_components(source, n)?;
    if comps.len() != n {
        return Err(Error::Arity {
            expected: n,
            found: comps.len(),
        });
    }
    VectorField::from_expressions("custom", comps)
}

pub fn builtin(name: &str) -> Result<VectorField> {
    match name {
        "example_2d" => Ok(VectorField {
            name: name.into(),
            dim: 2,
            rhs: Rhs::Builtin(Builtin::Example2d),
            transform: None,
        }),
        "example_10d" => {
            let core = Builtin::Example10dCore;
            let t: Vec<f64> = EXAMPLE_10D_T_TENTHS
                .iter()
                .flatten()
                .map(|&v| f64::from(v) / 10.0)
                .collect();
            VectorField {
                name: name.into(),
                dim: core.dim(),
                rhs: Rhs::Builtin(core),
                transform: None,
            }
            .with_transform(Matrix::from_row_major(10, 10, t)?)
        }
        other => Err(Error::UnknownSystem(other.into())),
    }
}
