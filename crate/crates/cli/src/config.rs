//! Experiment configuration: flat TOML with one table per concern.
//!
//! ```toml
//! command = "recover"
//! seed = 7
//! trials = 100
//!
//! [model]
//! kind = "k-sparse"
//! dim = 64
//! order = 4
//!
//! [operator]
//! ensemble = "gaussian"
//! measurements = 32
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Recover,
    RipScan,
    BoundsCheck,
    PhaseTransition,
    LowrankDemo,
    MultibandDemo,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Recover,
        Command::RipScan,
        Command::BoundsCheck,
        Command::PhaseTransition,
        Command::LowrankDemo,
        Command::MultibandDemo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Recover => "recover",
            Command::RipScan => "rip-scan",
            Command::BoundsCheck => "bounds-check",
            Command::PhaseTransition => "phase-transition",
            Command::LowrankDemo => "lowrank-demo",
            Command::MultibandDemo => "multiband-demo",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    KSparse,
    BlockSparse,
    LowRank,
    Multiband,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::KSparse => "k-sparse",
            ModelKind::BlockSparse => "block-sparse",
            ModelKind::LowRank => "low-rank",
            ModelKind::Multiband => "multiband",
        }
    }
}

/// Which union of subspaces signals are drawn from and projected onto.
///
/// `k-sparse` uses `dim` and `order`; `block-sparse` uses `blocks`,
/// `block_len` and `order`; `low-rank` uses `rows`, `cols` and `rank`;
/// `multiband` uses `blocks`, `grid` and `order`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_len: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    Gaussian,
    Rademacher,
    /// Identity; `measurements` must equal the operator's input size.
    Identity,
    /// Orthonormal columns from a QR factorisation of a Gaussian draw.
    Orthonormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldChoice {
    #[default]
    Real,
    Complex,
}

/// Measurement operator. For `multiband` models `measurements` is the
/// number of output blocks; for `low-rank` it is the number of linear
/// measurements of the vectorised matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub ensemble: Ensemble,
    pub measurements: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldChoice>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Explicit step `μ`; otherwise `step_fraction / ‖Φ‖²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    /// Relative error counted as a successful recovery.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_tol: Option<f64>,
}

impl SolverSection {
    pub fn step_fraction(&self) -> f64 {
        self.step_fraction.unwrap_or(0.99)
    }

    pub fn max_iters(&self) -> usize {
        self.max_iters.unwrap_or(500)
    }

    pub fn residual_tol(&self) -> f64 {
        self.residual_tol.unwrap_or(1e-12)
    }

    pub fn success_tol(&self) -> f64 {
        self.success_tol.unwrap_or(1e-4)
    }
}

/// Signal and noise generation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    /// Standard deviation of additive measurement noise per entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    /// Norm of an off-model perturbation added to the drawn member.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail: Option<f64>,
}

impl SignalSection {
    pub fn norm(&self) -> f64 {
        self.norm.unwrap_or(1.0)
    }

    pub fn noise(&self) -> f64 {
        self.noise.unwrap_or(0.0)
    }

    pub fn tail(&self) -> f64 {
        self.tail.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMethod {
    Exhaustive,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<ScanMethod>,
    /// Sampled pairs per Monte-Carlo estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    /// Slack `δ` in the fixed-iteration guarantee.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl BoundsSection {
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.1)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measurements: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orders: Vec<usize>,
    /// Cap on cells × trials.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_runs: Option<usize>,
}

impl SweepSection {
    pub const DEFAULT_MAX_RUNS: usize = 200_000;

    pub fn max_runs(&self) -> usize {
        self.max_runs.unwrap_or(Self::DEFAULT_MAX_RUNS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub model: ModelSection,
    pub operator: OperatorSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub signal: SignalSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical serialisation, hex encoded. The output
    /// path is left out so a table does not depend on where it is written.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn field(&self) -> FieldChoice {
        match (self.operator.field, self.model.kind) {
            (Some(f), _) => f,
            (None, ModelKind::Multiband) => FieldChoice::Complex,
            (None, _) => FieldChoice::Real,
        }
    }

    /// Checks parameter domains that the TOML schema cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let positive = |name: &str, v: Option<f64>| match v {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(CliError::Config(format!("{name} must be > 0, got {v}"))),
            _ => Ok(()),
        };
        positive("solver.step", self.solver.step)?;
        positive("solver.step_fraction", self.solver.step_fraction)?;
        positive("solver.success_tol", self.solver.success_tol)?;
        positive("signal.norm", self.signal.norm)?;
        positive("operator.scale", self.operator.scale)?;
        positive("bounds.delta", self.bounds.delta)?;
        if let Some(v) = self.solver.residual_tol {
            if !(v >= 0.0) {
                return bad(format!("solver.residual_tol must be >= 0, got {v}"));
            }
        }
        for (name, v) in [("signal.noise", self.signal.noise), ("signal.tail", self.signal.tail)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be >= 0, got {v}"));
                }
            }
        }
        if self.operator.measurements == 0 {
            return bad("operator.measurements must be >= 1".into());
        }
        let need = |name: &str, v: Option<usize>| {
            v.ok_or_else(|| CliError::Config(format!("model.{name} is required for a {} model", self.model.kind.as_str())))
        };
        match self.model.kind {
            ModelKind::KSparse => {
                need("dim", self.model.dim)?;
                need("order", self.model.order)?;
            }
            ModelKind::BlockSparse => {
                need("blocks", self.model.blocks)?;
                need("block_len", self.model.block_len)?;
                need("order", self.model.order)?;
            }
            ModelKind::LowRank => {
                need("rows", self.model.rows)?;
                need("cols", self.model.cols)?;
                need("rank", self.model.rank)?;
            }
            ModelKind::Multiband => {
                need("blocks", self.model.blocks)?;
                need("grid", self.model.grid)?;
                need("order", self.model.order)?;
            }
        }
        let required = match self.command {
            Command::BoundsCheck | Command::PhaseTransition => Some(ModelKind::KSparse),
            Command::LowrankDemo => Some(ModelKind::LowRank),
            Command::MultibandDemo => Some(ModelKind::Multiband),
            Command::Recover | Command::RipScan => None,
        };
        if let Some(kind) = required {
            if self.model.kind != kind {
                return bad(format!("{} requires model.kind = \"{}\"", self.command, kind.as_str()));
            }
        }
        if self.command == Command::PhaseTransition {
            if self.sweep.measurements.is_empty() || self.sweep.orders.is_empty() {
                return bad("phase-transition needs sweep.measurements and sweep.orders".into());
            }
            let runs = (self.sweep.measurements.len() * self.sweep.orders.len()).saturating_mul(self.trials);
            if runs > self.sweep.max_runs() {
                return bad(format!(
                    "sweep of {runs} recoveries exceeds sweep.max_runs = {}",
                    self.sweep.max_runs()
                ));
            }
        }
        Ok(())
    }
}
