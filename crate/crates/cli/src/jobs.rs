//! Job configurations for each subcommand and the presets that ship with
//! the binary.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mdiqds::channel::{ChannelParams, IntensitySet};
use mdiqds::counts::{Link, Mode};
use mdiqds::keyrate::{SecurityParams, SweepSettings};
use mdiqds::qds::{QdsInputs, QdsParams};

/// Rate sweep over distance, also used for the security and channel
/// settings when analysing an ingested count table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepJob {
    pub channel: ChannelParams,
    pub intensities: IntensitySet,
    pub security: SecurityParams,
    pub settings: SweepSettings,
    pub distances: Vec<f64>,
    pub modes: Vec<Mode>,
    /// Acquisition time of an ingested table; by default its pulse count
    /// over the clock rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_s: Option<f64>,
}

impl Default for SweepJob {
    fn default() -> Self {
        SweepJob {
            channel: ChannelParams::default(),
            intensities: IntensitySet::default(),
            security: SecurityParams::default(),
            settings: SweepSettings::default(),
            distances: (0..=14).map(|k| k as f64 * 10.0).collect(),
            modes: vec![Mode::Qkd, Mode::Mdi],
            elapsed_s: None,
        }
    }
}

/// How a signature analysis derives its inputs from a count table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FromCounts {
    pub test_fraction: f64,
    pub c_sig: Option<u64>,
    /// Acquisition time; by default the table's pulse count over 1 GHz.
    pub total_time_s: Option<f64>,
    pub duty_fraction: f64,
}

impl Default for FromCounts {
    fn default() -> Self {
        FromCounts {
            test_fraction: 0.3,
            c_sig: None,
            total_time_s: None,
            duty_fraction: 1.0,
        }
    }
}

/// Published figures a run is compared against in the summary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Reference {
    pub p_e: Option<f64>,
    pub e_sig_upper: Option<f64>,
    pub s_auth: Option<f64>,
    pub s_ver: Option<f64>,
    pub l_sig: Option<f64>,
    pub n_signatures: Option<u64>,
    pub avg_time_per_signature_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdsJob {
    pub link: Link,
    #[serde(default)]
    pub seed: u64,
    /// Budgets and block sizes; block sizes are replaced when the inputs
    /// come from a count table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<QdsParams>,
    /// Block-level inputs given directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<QdsInputs>,
    #[serde(default)]
    pub intensities: IntensitySet,
    #[serde(default)]
    pub from_counts: FromCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
}

impl QdsJob {
    pub fn for_link(link: Link) -> Self {
        QdsJob {
            link,
            seed: 0,
            params: None,
            inputs: None,
            intensities: IntensitySet::default(),
            from_counts: FromCounts::default(),
            reference: None,
        }
    }

    pub fn params(&self) -> QdsParams {
        self.params
            .unwrap_or_else(|| QdsParams::for_mode(self.link.mode()))
    }
}

/// Which subcommand a preset configures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Simulate,
    Sweep,
    Qds,
}

pub struct Preset {
    pub name: &'static str,
    pub kind: Kind,
    pub text: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "published-mdi",
        kind: Kind::Qds,
        text: include_str!("../presets/published-mdi.toml"),
    },
    Preset {
        name: "published-qkd",
        kind: Kind::Qds,
        text: include_str!("../presets/published-qkd.toml"),
    },
    Preset {
        name: "hardware",
        kind: Kind::Sweep,
        text: include_str!("../presets/hardware.toml"),
    },
    Preset {
        name: "desk",
        kind: Kind::Simulate,
        text: include_str!("../presets/desk.toml"),
    },
];

pub fn preset(name: &str, kind: Kind) -> Result<&'static Preset> {
    let p = PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        anyhow!("unknown preset {name:?}; available: {}", names.join(", "))
    })?;
    if p.kind != kind {
        bail!(
            "preset {name:?} configures `{:?}`, not this subcommand",
            p.kind
        );
    }
    Ok(p)
}

fn parse<T: DeserializeOwned>(text: &str, toml_syntax: bool, origin: &str) -> Result<T> {
    if toml_syntax {
        toml::from_str(text).map_err(|e| anyhow!("{origin}: {e}"))
    } else {
        serde_json::from_str(text).map_err(|e| anyhow!("{origin}: {e}"))
    }
}

/// Reads a JSON or TOML (by extension) config file.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let toml_syntax = path.extension().is_some_and(|e| e == "toml");
    parse(&text, toml_syntax, &path.display().to_string())
}

pub fn read_preset<T: DeserializeOwned>(name: &str, kind: Kind) -> Result<T> {
    let p = preset(name, kind)?;
    parse(p.text, true, &format!("preset {name}"))
}
