use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{atomic_write, from_table, parse_document, read_text, to_toml, RunConfig, SystemConfig, FORMAT_VERSION};
use crate::error::Result;
use crate::optimizer::{ControlProblem, Probe, TauCritical};
use crate::propagator::evolve_continuous;
use crate::protocol::{ControlTrace, JumpProtocol};

const SECTIONS: [&str; 5] = ["meta", "system", "transfer", "result", "protocol"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordMeta {
    pub config_hash: String,
    pub seed: u64,
    /// Optimizer stages that produced the protocol.
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferSection {
    pub ln_r_init: f64,
    pub ln_r_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordResult {
    pub tau: f64,
    pub tau_extrapolated: Option<f64>,
    pub dist_state: f64,
    pub dist_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredProtocol {
    pub tau: f64,
    pub j: ControlTrace,
    pub k: ControlTrace,
}

impl From<&JumpProtocol> for StoredProtocol {
    fn from(p: &JumpProtocol) -> Self {
        StoredProtocol { tau: p.tau, j: p.j.clone(), k: p.k.clone() }
    }
}

impl StoredProtocol {
    pub fn to_protocol(&self) -> Result<JumpProtocol> {
        JumpProtocol::new(self.tau, self.j.clone(), self.k.clone())
    }
}

/// An optimized protocol with everything needed to reproduce and re-check it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolRecord {
    pub format_version: u32,
    pub meta: RecordMeta,
    pub system: SystemConfig,
    pub transfer: TransferSection,
    pub result: RecordResult,
    pub protocol: StoredProtocol,
    #[serde(default)]
    pub history: Vec<Probe>,
}

impl ProtocolRecord {
    pub fn from_search(config: &RunConfig, ln_r_init: f64, ln_r_target: f64, found: &TauCritical) -> Self {
        ProtocolRecord {
            format_version: FORMAT_VERSION,
            meta: RecordMeta { config_hash: config.hash(), seed: config.run.seed, provenance: "dbmc+cbmc".into() },
            system: config.system.clone(),
            transfer: TransferSection { ln_r_init, ln_r_target },
            result: RecordResult {
                tau: found.tau_critical,
                tau_extrapolated: found.tau_extrapolated,
                dist_state: found.outcome.dist_state,
                dist_energy: found.outcome.dist_energy,
            },
            protocol: (&found.outcome.protocol).into(),
            history: found.history.clone(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }

    pub fn from_toml_str(text: &str, path: &str) -> Result<Self> {
        from_table(parse_document(text, path, &SECTIONS)?, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&read_text(path)?, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_toml()?.as_bytes())
    }

    pub fn jump_protocol(&self) -> Result<JumpProtocol> {
        self.protocol.to_protocol()
    }

    /// `|D_S(re-evolved) - stored D_S|`
    pub fn reevolution_error(&self, problem: &ControlProblem) -> Result<f64> {
        let psi = evolve_continuous(&problem.transfer.psi_init, &self.jump_protocol()?, &problem.eigs)?;
        Ok((problem.transfer.dist_state(&psi) - self.result.dist_state).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::optimizer::SearchPhase;

    fn sample() -> ProtocolRecord {
        ProtocolRecord {
            format_version: FORMAT_VERSION,
            meta: RecordMeta { config_hash: "0123456789abcdef".into(), seed: 7, provenance: "dbmc+cbmc".into() },
            system: SystemConfig::default(),
            transfer: TransferSection { ln_r_init: -1.5, ln_r_target: 1.5 },
            result: RecordResult { tau: 0.1 + 0.2, tau_extrapolated: None, dist_state: 0.0199999, dist_energy: 1e-3 },
            protocol: StoredProtocol {
                tau: 0.1 + 0.2,
                j: ControlTrace { initial: true, jumps: vec![0.01, 1.0 / 3.0, 0.2 + 1e-17] },
                k: ControlTrace { initial: false, jumps: vec![std::f64::consts::PI / 20.0, 0.29999999999999993] },
            },
            history: vec![Probe { tau: 0.25, dist_state: 0.07, phase: SearchPhase::Extrapolating }],
        }
    }

    #[test]
    fn five_jump_record_round_trips_bit_exactly() {
        let r = sample();
        let text = r.to_toml().unwrap();
        let back = ProtocolRecord::from_toml_str(&text, "r.toml").unwrap();
        assert_eq!(back, r);
        for (a, b) in back.protocol.j.jumps.iter().chain(&back.protocol.k.jumps).zip(r.protocol.j.jumps.iter().chain(&r.protocol.k.jumps)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn truncated_record_names_missing_section() {
        let text = sample().to_toml().unwrap();
        let cut = text.find("[protocol").unwrap();
        let err = ProtocolRecord::from_toml_str(&text[..cut], "r.toml").unwrap_err();
        assert!(matches!(err, Error::MissingSection { ref section, .. } if section == "protocol"), "{err}");
    }

    #[test]
    fn unknown_version_is_refused() {
        let text = sample().to_toml().unwrap().replace("format_version = 1", "format_version = 99");
        assert!(matches!(ProtocolRecord::from_toml_str(&text, "r"), Err(Error::FormatVersion { .. })));
        let text = sample().to_toml().unwrap().replace("format_version = 1", "format_version = \"99\"");
        assert!(matches!(ProtocolRecord::from_toml_str(&text, "r"), Err(Error::FormatVersion { .. })));
    }
}
