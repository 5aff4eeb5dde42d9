//! The run configuration document.

use std::fs;
use std::path::{Path, PathBuf};

use deeplyap::diffmath::Matrix;
use deeplyap::dynamics::{builtin, parse_vector_field, VectorField};
use deeplyap::loss::{BoundSpec, LossKind, LossSpec};
use deeplyap::network::NetShape;
use deeplyap::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub net: NetConfig,
    pub loss: LossConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

/// Either `{"builtin": name}` or `{"n": .., "expressions": .., "transform": ..}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expressions: Option<Expressions>,
    /// Rows of `T`; the system becomes `x ↦ T⁻¹ f(T x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expressions {
    Text(String),
    Lines(Vec<String>),
}

impl Expressions {
    fn source(&self) -> String {
        match self {
            Expressions::Text(s) => s.clone(),
            Expressions::Lines(v) => v.join("\n"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub n_sub: usize,
    pub d_max: usize,
    pub m_per: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub kind: LossKind,
    #[serde(default = "default_nu")]
    pub nu: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(default = "default_power")]
    pub power: f64,
}

fn default_nu() -> f64 {
    1.0
}

fn default_power() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "default_checkpoint")]
    pub checkpoint: PathBuf,
    #[serde(default = "default_report")]
    pub report: PathBuf,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self {
            checkpoint: default_checkpoint(),
            report: default_report(),
        }
    }
}

fn default_checkpoint() -> PathBuf {
    "checkpoint.json".into()
}

fn default_report() -> PathBuf {
    "report.json".into()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Parses and validates. Errors name the offending field, e.g. `loss.kind`.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config {
                field: if path == "." || path == "?" { "<root>".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let vf = self.vector_field()?;
        self.shape_for(vf.dim())?;
        self.loss_spec()?;
        self.train.validate().map_err(|e| field_err("train", e))?;
        Ok(())
    }

    pub fn vector_field(&self) -> Result<VectorField, CliError> {
        let s = &self.system;
        match (&s.builtin, s.n, &s.expressions) {
            (Some(name), None, None) => {
                if s.transform.is_some() {
                    return Err(CliError::config("system.transform", "not allowed together with system.builtin"));
                }
                builtin(name).map_err(|e| field_err("system.builtin", e))
            }
            (None, Some(n), Some(expr)) => {
                let vf = parse_vector_field(&expr.source(), n).map_err(|e| field_err("system.expressions", e))?;
                match &s.transform {
                    None => Ok(vf),
                    Some(rows) => {
                        let t = Matrix::from_rows(rows).map_err(|e| field_err("system.transform", e))?;
                        vf.with_transform(t).map_err(|e| field_err("system.transform", e))
                    }
                }
            }
            (Some(_), _, _) => Err(CliError::config(
                "system",
                "give either `builtin` or `n` with `expressions`, not both",
            )),
            (None, None, _) => Err(CliError::config("system.n", "missing (or set system.builtin)")),
            (None, Some(_), None) => Err(CliError::config("system.expressions", "missing")),
        }
    }

    pub fn shape_for(&self, n: usize) -> Result<NetShape, CliError> {
        NetShape::new(n, self.net.n_sub, self.net.d_max, self.net.m_per).map_err(|e| field_err("net", e))
    }

    pub fn loss_spec(&self) -> Result<LossSpec, CliError> {
        let l = &self.loss;
        let bounds = BoundSpec::new(l.c1, l.c2, l.power).map_err(|e| field_err("loss", e))?;
        LossSpec::new(l.kind, l.nu, bounds).map_err(|e| field_err("loss.nu", e))
    }
}

fn field_err(field: &str, e: deeplyap::Error) -> CliError {
    CliError::config(field, e.to_string())
}
