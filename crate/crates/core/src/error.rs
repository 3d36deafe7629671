use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the offline/online pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("position ({x}, {y}) lies outside the area [-{half_width}, {half_width}]^2")]
    OutOfArea { x: f64, y: f64, half_width: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample ({value}) outside the GEV support")]
    Support { value: f64 },

    #[error("cannot fit GEV: {0}")]
    Fit(String),

    #[error("ill-conditioned kernel system: {0}")]
    Conditioning(String),

    #[error("incomplete dataset, missing fits for: {0}")]
    IncompleteDataset(String),

    #[error("no model trained for zone {0}")]
    MissingZoneModel(usize),

    #[error("infeasible channel: sigma*zeta + mu = {0} is not positive")]
    InfeasibleChannel(f64),

    #[error("no feasible starting point for placement")]
    InfeasibleStart,

    #[error("projection failed: {0}")]
    Projection(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("config hash mismatch for {path}: expected {expected}, found {found}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("unsupported format version {found} in {what} (expected {expected})")]
    FormatVersion {
        what: String,
        found: u32,
        expected: u32,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {msg}")]
    Parse { what: String, msg: String },
}

impl Error {
    /// Short stable identifier, used by the CLI's machine-parsable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::OutOfArea { .. } => "out_of_area",
            Error::DegenerateGeometry(_) => "degenerate_geometry",
            Error::Domain(_) => "domain",
            Error::Support { .. } => "support",
            Error::Fit(_) => "fit",
            Error::Conditioning(_) => "conditioning",
            Error::IncompleteDataset(_) => "incomplete_dataset",
            Error::MissingZoneModel(_) => "missing_zone_model",
            Error::InfeasibleChannel(_) => "infeasible_channel",
            Error::InfeasibleStart => "infeasible_start",
            Error::Projection(_) => "projection",
            Error::Empty(_) => "empty",
            Error::HashMismatch { .. } => "hash_mismatch",
            Error::FormatVersion { .. } => "format_version",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, msg: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            msg: msg.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
