use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::cyclic::{ProbeMapOptions, SamplerOptions};
use crate::error::{Error, Result};
use crate::geometry::{PerturbationField, ShapeSpec};
use crate::perturbation::SplitOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Hadamard,
    Split,
    CountStability,
    Cyclic,
    Coverage,
    ProbeMap,
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Hadamard => "hadamard",
            Command::Split => "split",
            Command::CountStability => "count-stability",
            Command::Cyclic => "cyclic",
            Command::Coverage => "coverage",
            Command::ProbeMap => "probe-map",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountConfig {
    pub interval: (f64, f64),
    pub sweep: Vec<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
    #[serde(default = "default_max_mult")]
    pub max_mult: usize,
    #[serde(default = "default_oracle_tol")]
    pub tol: f64,
}

fn default_max_dim() -> usize {
    16
}
fn default_max_mult() -> usize {
    3
}
fn default_oracle_tol() -> f64 {
    1e-8
}

/// One experiment. Only the sections used by the command need to be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must match the command given on the command line.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub shape: Option<ShapeSpec>,
    /// Node count for curves (defaults to the shape's own count); ignored for meshes.
    #[serde(default)]
    pub resolution: Option<usize>,
    /// Eigenvalue clustering tolerance; defaults depend on the dimension.
    #[serde(default)]
    pub degeneracy_tol: Option<f64>,
    #[serde(default)]
    pub field: Option<PerturbationField>,
    /// Cluster index in the spectrum (descending order).
    #[serde(default)]
    pub cluster: Option<usize>,
    /// Alternatively, the cluster nearest to this value.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Finite-difference step sizes.
    #[serde(default)]
    pub h: Option<Vec<f64>>,
    #[serde(default)]
    pub split: Option<SplitOptions>,
    #[serde(default)]
    pub count: Option<CountConfig>,
    #[serde(default)]
    pub sampler: Option<SamplerOptions>,
    /// Row-norm threshold for the coverage experiment.
    #[serde(default)]
    pub coverage_threshold: Option<f64>,
    #[serde(default)]
    pub probe_map: Option<ProbeMapOptions>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn require<'a, T>(v: &'a Option<T>, name: &str, cmd: Command) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| invalid(format!("`{name}` is required for {}", cmd.name())))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Canonical bytes used for artifact naming.
    pub fn canonical(&self, cmd: Command) -> Vec<u8> {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v["command"] = serde_json::Value::String(cmd.name().to_string());
        serde_json::to_vec(&v).expect("config serializes")
    }

    pub fn shape(&self, cmd: Command) -> Result<&ShapeSpec> {
        require(&self.shape, "shape", cmd)
    }

    pub fn field(&self, cmd: Command) -> Result<&PerturbationField> {
        require(&self.field, "field", cmd)
    }

    /// Structural checks that need no numerics.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        if let Some(c) = self.command {
            if c != cmd {
                return Err(invalid(format!("config is for `{}` but `{}` was requested", c.name(), cmd.name())));
            }
        }
        if let Some(t) = self.degeneracy_tol {
            positive("degeneracy_tol", t)?;
        }
        if let Some(t) = self.coverage_threshold {
            positive("coverage_threshold", t)?;
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() {
                return Err(invalid("lambda must be finite"));
            }
        }
        let needs_shape = cmd != Command::Oracle;
        if needs_shape {
            self.shape(cmd)?;
        }
        match cmd {
            Command::Spectrum | Command::Oracle => {}
            Command::Hadamard => {
                self.field(cmd)?;
                let h = require(&self.h, "h", cmd)?;
                if h.len() < 2 {
                    return Err(invalid("at least two step sizes are needed for Richardson extrapolation"));
                }
                for &x in h {
                    positive("h", x)?;
                }
            }
            Command::Split => {
                self.field(cmd)?;
                let s = require(&self.split, "split", cmd)?;
                positive("split.tol", s.tol)?;
                if !(s.h.is_finite() && s.min_abs >= 0.0) {
                    return Err(invalid("split.h must be finite and split.min_abs non-negative"));
                }
            }
            Command::CountStability => {
                self.field(cmd)?;
                let c = require(&self.count, "count", cmd)?;
                positive("count.tol", c.tol)?;
                if c.sweep.is_empty() || c.sweep.iter().any(|h| !h.is_finite()) {
                    return Err(invalid("count.sweep must be a non-empty list of finite values"));
                }
            }
            Command::Cyclic | Command::Coverage => {
                let s = require(&self.sampler, "sampler", cmd)?;
                positive("sampler.rank_tol", s.rank_tol)?;
                if s.samples == 0 {
                    return Err(invalid("sampler.samples must be positive"));
                }
            }
            Command::ProbeMap => {
                let p = require(&self.probe_map, "probe_map", cmd)?;
                positive("probe_map.extent", p.extent)?;
            }
        }
        if cmd == Command::Oracle {
            let o = require(&self.oracle, "oracle", cmd)?;
            positive("oracle.tol", o.tol)?;
            if o.trials == 0 {
                return Err(invalid("oracle.trials must be positive"));
            }
        }
        Ok(())
    }
}
