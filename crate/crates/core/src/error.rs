use std::path::PathBuf;

use thiserror::Error;

/// Which resource constraint an infeasibility refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Exactly one hovering position per device.
    SingleConnection,
    /// UAV CPU budget at one hovering position.
    CpuBudget,
    /// UAV charging-power budget at one hovering position.
    PowerBudget,
    /// Offloading device without a CPU share at its position.
    CpuShare,
    /// Device with non-zero energy demand but no charging power.
    ChargingPower,
    /// Harvested energy does not cover consumed energy.
    EnergyBalance,
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Constraint::SingleConnection => "single connection",
            Constraint::CpuBudget => "UAV CPU budget",
            Constraint::PowerBudget => "UAV charging budget",
            Constraint::CpuShare => "positive CPU share",
            Constraint::ChargingPower => "positive charging power",
            Constraint::EnergyBalance => "energy balance",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("distance {dist_m} m is below the 1 m reference distance")]
    Domain { dist_m: f64 },

    #[error("infeasible allocation: {}position {position}: {constraint}", fmt_device(.device))]
    Infeasible {
        device: Option<usize>,
        position: usize,
        constraint: Constraint,
    },

    #[error("{quantity} must be positive, got {value}")]
    NonPositive { quantity: &'static str, value: f64 },

    #[error("exhaustive search over {candidates} candidates exceeds the limit of {limit}")]
    SizeGuard { candidates: f64, limit: f64 },

    #[error("scenario file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("unsupported scenario schema version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn fmt_device(device: &Option<usize>) -> String {
    device.map(|i| format!("device {i}, ")).unwrap_or_default()
}

impl Error {
    pub(crate) fn validation(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
