//! Scenario configuration documents (TOML).
//!
//! ```toml
//! [physics]          # hbar, mass, sigma (std of |ψ|², length), kx (1/length)
//! [geometry]         # source, splitter, box1, box2 as [x, y] (length)
//! [splitter]         # transmission, reflection as [re, im]; attenuate_advanced
//! [grid]             # n, extent (length), snapshot_n, snapshot_extent, snapshot_origin
//! [run]              # panel_times (time), runs, seed, renormalize_outcomes
//! ```
//!
//! Every key is optional; absent keys take the defaults of the reference
//! setup. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub physics: PhysicsSection,
    pub geometry: GeometrySection,
    pub splitter: SplitterSection,
    pub grid: GridSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub hbar: Option<f64>,
    pub mass: Option<f64>,
    pub sigma: Option<f64>,
    pub kx: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub source: Option<[f64; 2]>,
    pub splitter: Option<[f64; 2]>,
    pub box1: Option<[f64; 2]>,
    pub box2: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitterSection {
    pub transmission: Option<[f64; 2]>,
    pub reflection: Option<[f64; 2]>,
    pub attenuate_advanced: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: Option<usize>,
    pub extent: Option<f64>,
    pub snapshot_n: Option<usize>,
    pub snapshot_extent: Option<f64>,
    pub snapshot_origin: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub panel_times: Option<Vec<f64>>,
    pub runs: Option<u64>,
    pub seed: Option<u64>,
    pub renormalize_outcomes: Option<bool>,
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    toml::from_str(text).map_err(|e| {
        let field = e
            .message()
            .split('`')
            .nth(1)
            .filter(|_| e.message().starts_with("unknown field"))
            .unwrap_or("<document>")
            .to_string();
        Error::config(field, e.to_string().trim_end().replace('\n', " | "))
    })
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(parse_config("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn reads_sections() {
        let cfg = parse_config(
            "[physics]\nsigma = 25.0\n[splitter]\ntransmission = [1.0, 0.0]\nreflection = [0.0, 0.0]\n[run]\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.physics.sigma, Some(25.0));
        assert_eq!(cfg.splitter.transmission, Some([1.0, 0.0]));
        assert_eq!(cfg.run.seed, Some(7));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("[physics]\nmas = 2.0\n").unwrap_err();
        match err {
            Error::InvalidConfig { field, message } => {
                assert_eq!(field, "mas");
                assert!(message.contains("line 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_document_reports_position() {
        let err = parse_config("[physics]\nmass = = 1\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("line 2") && text.contains("column"), "{text}");
    }

    #[test]
    fn wrong_type_rejected() {
        assert!(parse_config("[grid]\nn = \"big\"\n").is_err());
    }
}
