//! Vector fields `f: Rⁿ → Rⁿ` for `ẋ = f(x)`.
//!
//! A field is either parsed from a small expression language (one component per
//! line or `;`-separated, variables `x1..xn`) or one of the built-in systems, and
//! may be wrapped in a linear change of coordinates `f(x) = T⁻¹ f̂(T x)`.

mod expr;
mod field;

pub use expr::{parse_expr, BinOp, Expr, Func};
pub use field::{builtin, parse_vector_field, Rhs, Transform, VectorField, BUILTIN_NAMES};
