//! Experiment driver: JSON configurations, scenario runs that write
//! plot-ready CSV plus a manifest, slope reports and the shipped presets.

mod config;
mod csv;
mod presets;
mod run;
mod slope;

pub use config::{
    ExpectedOrder, ExperimentConfig, FieldBlock, ModelBlock, PointSpec, RenyiMethod, Scenario, SlopeBlock, StBlock,
    StSimBlock,
};
pub use csv::{fmt_num, Table, CSV_SCHEMA_VERSION};
pub use presets::{preset, PRESETS};
pub use run::{
    run_config_file, run_config_text, Artifact, RunManifest, RunOptions, SlopeSummary, MANIFEST_SCHEMA_VERSION,
    OUTPUT_ROOT_ENV,
};
pub use slope::{slope_report, SlopeCheck, SlopeReport};

use crate::covmodels::ModelError;
use crate::fieldsim::SimError;
use crate::lsmodel::{FitError, LsError};
use crate::polybasis::BasisError;
use crate::stfunctional::StError;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpError {
    #[error("invalid configuration: {}", violations.join("; "))]
    Config { violations: Vec<String> },
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("curve CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Fit(FitError),
    #[error(transparent)]
    Ls(#[from] LsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    St(#[from] StError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Basis(#[from] BasisError),
}

impl ExpError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        ExpError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExpError::Config { .. } => "config_validation",
            ExpError::Parse(_) => "config_parse",
            ExpError::Io { .. } => "io",
            ExpError::UnknownPreset(_) => "unknown_preset",
            ExpError::Csv(_) => "csv",
            ExpError::Fit(_) => "slope_fit",
            _ => "operation",
        }
    }

    /// Library module the failure came from.
    pub fn module(&self) -> &'static str {
        match self {
            ExpError::Fit(_) | ExpError::Ls(_) => "lsmodel",
            ExpError::Sim(_) => "fieldsim",
            ExpError::St(_) => "stfunctional",
            ExpError::Model(_) => "covmodels",
            ExpError::Basis(_) => "polybasis",
            _ => "expcli",
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> serde_json::Value {
        let mut err = serde_json::json!({
            "kind": self.kind(),
            "module": self.module(),
            "message": self.to_string(),
        });
        if let ExpError::Config { violations } = self {
            err["violations"] = serde_json::json!(violations);
        }
        serde_json::json!({ "error": err })
    }
}
