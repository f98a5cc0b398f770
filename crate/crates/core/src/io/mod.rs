//! Configuration, persisted records and plot-data files.
//!
//! Records and configs are TOML documents. Floats are written in Rust's
//! shortest round-trip decimal form, so every stored `f64` parses back to the
//! identical bit pattern.

mod config;
mod plot;
mod record;

use std::fs;
use std::path::Path;

pub use config::{GridConfig, RunConfig, RunSection, SystemConfig};
pub use plot::{format_number, write_columns, write_matrix, PlotHeader};
pub use record::{ProtocolRecord, RecordMeta, RecordResult, StoredProtocol, TransferSection};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Writes `contents` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Parses a versioned document and checks that every required section is present.
pub fn parse_document(text: &str, path: &str, sections: &[&str]) -> Result<toml::Table> {
    let table: toml::Table =
        text.parse().map_err(|e: toml::de::Error| Error::Parse { path: path.into(), message: e.to_string() })?;
    match table.get("format_version") {
        None => return Err(Error::MissingSection { path: path.into(), section: "format_version".into() }),
        Some(toml::Value::Integer(v)) if *v == i64::from(FORMAT_VERSION) => {}
        Some(other) => {
            let found = match other {
                toml::Value::String(s) => s.clone(),
                v => v.to_string(),
            };
            return Err(Error::FormatVersion { found, expected: FORMAT_VERSION });
        }
    }
    if let Some(missing) = sections.iter().find(|s| !table.contains_key(**s)) {
        return Err(Error::MissingSection { path: path.into(), section: (*missing).into() });
    }
    Ok(table)
}

pub(crate) fn from_table<T: serde::de::DeserializeOwned>(table: toml::Table, path: &str) -> Result<T> {
    T::deserialize(table).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })
}

pub(crate) fn to_toml<T: serde::Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Config(format!("serialization failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Probe {
        x: f64,
        v: Vec<f64>,
    }

    proptest! {
        #[test]
        fn floats_round_trip_bit_exactly(bits in any::<u64>(), more in proptest::collection::vec(any::<u64>(), 0..6)) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let v: Vec<f64> = more.into_iter().map(f64::from_bits).filter(|f| f.is_finite()).collect();
            let p = Probe { x, v };
            let back: Probe = toml::from_str(&to_toml(&p).unwrap()).unwrap();
            prop_assert_eq!(back.x.to_bits(), p.x.to_bits());
            prop_assert_eq!(back.v.iter().map(|f| f.to_bits()).collect::<Vec<_>>(), p.v.iter().map(|f| f.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn version_and_sections_are_checked() {
        assert!(matches!(parse_document("format_version = 99\n", "f", &[]), Err(Error::FormatVersion { .. })));
        assert!(matches!(
            parse_document("format_version = \"99\"\n", "f", &[]),
            Err(Error::FormatVersion { found, .. }) if found == "99"
        ));
        assert!(matches!(parse_document("x = 1\n", "f", &[]), Err(Error::MissingSection { .. })));
        let err = parse_document("format_version = 1\n[a]\n", "f", &["a", "b"]).unwrap_err();
        assert!(matches!(err, Error::MissingSection { section, .. } if section == "b"));
        assert!(matches!(parse_document("format_version = = 1", "f", &[]), Err(Error::Parse { .. })));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(read_text(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
