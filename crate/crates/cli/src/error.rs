use std::path::Path;

use bangbang::io::{atomic_write, FORMAT_VERSION};
use bangbang::Error;
use serde::Serialize;

pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_INCOMPATIBLE: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    /// `(tau, D_S)` probes of a failed critical-time search.
    pub history: Vec<[f64; 2]>,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, kind: "usage", message: message.into(), history: Vec::new() }
    }

    pub fn incompatible(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INCOMPATIBLE, kind: "incompatible", message: message.into(), history: Vec::new() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INTERNAL, kind: "internal", message: message.into(), history: Vec::new() }
    }

    /// The machine-readable error document.
    pub fn document(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            exit_code: i32,
            message: &'a str,
            #[serde(skip_serializing_if = "<[_]>::is_empty")]
            history: &'a [[f64; 2]],
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            format_version: u32,
            error: Body<'a>,
        }
        let doc = Doc {
            format_version: FORMAT_VERSION,
            error: Body { kind: self.kind, exit_code: self.code, message: &self.message, history: &self.history },
        };
        toml::to_string(&doc).unwrap_or_else(|_| format!("[error]\nmessage = {:?}\n", self.message))
    }

    pub fn write_to(&self, dir: &Path) {
        if let Err(e) = atomic_write(&dir.join("error.toml"), self.document().as_bytes()) {
            log::warn!("could not write the error document: {e}");
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Lattice(_) | Error::Occupants { .. } | Error::DimensionTooLarge { .. } => (EXIT_USAGE, "invalid_system"),
            Error::Config(_) => (EXIT_USAGE, "config"),
            Error::Parse { .. } | Error::MissingSection { .. } => (EXIT_USAGE, "parse"),
            Error::FormatVersion { .. } => (EXIT_USAGE, "format_version"),
            Error::DegenerateGroundState { .. } => (EXIT_DEGENERATE, "degenerate_ground_state"),
            Error::StatesCoincide { .. } => (EXIT_DEGENERATE, "states_coincide"),
            Error::Incompatible(_) | Error::DimensionMismatch { .. } => (EXIT_INCOMPATIBLE, "incompatible"),
            Error::TauSearch { .. } => (EXIT_INTERNAL, "tau_search"),
            Error::Fit { .. } => (EXIT_INTERNAL, "fit"),
            Error::Io { .. } => (EXIT_INTERNAL, "io"),
            _ => (EXIT_INTERNAL, "internal"),
        };
        let history = match &e {
            Error::TauSearch { history, .. } => history.iter().map(|&(t, d)| [t, d]).collect(),
            _ => Vec::new(),
        };
        CliError { code, kind, message: e.to_string(), history }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
