//! Run configuration and the end-to-end pipeline: schedule, simulate,
//! estimate keys and distil signature parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::{
    mdi_yield_model_with, qkd_yield_model, ChannelParams, IntensitySet, MdiOptions, DEFAULT_N_CUT,
};
use crate::counts::{CountTable, Link};
use crate::decoy::estimate_bounds;
use crate::error::{domain, Error, Result};
use crate::keyrate::{derive_seed, secure_key_length, KeyRateResult, SecurityParams};
use crate::mathkit::Probability;
use crate::netsim::run::{run_plan_with, LinkModels, RunOptions, Tallies, ZPool};
use crate::netsim::schedule::{schedule, SessionType, Weights};
use crate::qds::{distil_table, QdsOutcome, QdsParams};

fn default_test_fraction() -> f64 {
    0.3
}

/// How signature parameters are chosen from a simulated pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QdsSettings {
    /// Share of the pool disclosed as the test set.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Fixed block size; by default the smallest secure one is searched.
    #[serde(default)]
    pub c_sig: Option<u64>,
    /// Budgets; block sizes in here are overwritten.
    #[serde(default = "QdsParams::mdi_default")]
    pub budgets: QdsParams,
}

impl Default for QdsSettings {
    fn default() -> Self {
        QdsSettings {
            test_fraction: default_test_fraction(),
            c_sig: None,
            budgets: QdsParams::mdi_default(),
        }
    }
}

/// Everything a simulation run depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub slots: u64,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub intensities: IntensitySet,
    /// Alice's fibre and Charlie's detectors as seen from Alice. Used for
    /// her half of the MDI link and for the AC link.
    #[serde(default)]
    pub alice_arm: ChannelParams,
    #[serde(default)]
    pub bob_arm: ChannelParams,
    #[serde(default)]
    pub mdi: MdiOptions,
    #[serde(default)]
    pub security: SecurityParams,
    #[serde(default)]
    pub qds: QdsSettings,
    pub seed: u64,
    /// Detection events kept in the trace.
    #[serde(default)]
    pub trace_events: usize,
}

impl RunConfig {
    pub fn new(slots: u64, seed: u64) -> Self {
        RunConfig {
            slots,
            weights: Weights::default(),
            intensities: IntensitySet::default(),
            alice_arm: ChannelParams::default(),
            bob_arm: ChannelParams::default(),
            mdi: MdiOptions::default(),
            security: SecurityParams::default(),
            qds: QdsSettings::default(),
            seed,
            trace_events: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.intensities.validate()?;
        self.alice_arm.validate()?;
        self.bob_arm.validate()?;
        self.security.validate()?;
        let f = self.qds.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(domain(format!("test fraction {f} outside (0, 1)")));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn models(&self) -> Result<LinkModels> {
        Ok(LinkModels {
            ab: Some(mdi_yield_model_with(
                &self.alice_arm,
                &self.bob_arm,
                &self.mdi,
                DEFAULT_N_CUT,
            )?),
            ac: Some(qkd_yield_model(&self.alice_arm)?),
            bc: Some(qkd_yield_model(&self.bob_arm)?),
        })
    }

    /// Wall-clock duration of the run.
    pub fn elapsed_s(&self) -> f64 {
        self.slots as f64 / self.alice_arm.clock_rate_hz
    }
}

/// Provenance of a run: enough to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub tallies: Tallies,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSummary {
    pub len: u64,
    pub errors: u64,
    pub error_rate: f64,
}

impl From<&ZPool> for PoolSummary {
    fn from(p: &ZPool) -> Self {
        PoolSummary {
            len: p.len() as u64,
            errors: p.errors.iter().filter(|&&e| e).count() as u64,
            error_rate: p.error_rate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum KeyOutcome {
    Key(KeyRateResult),
    NoKey { reason: String },
}

impl KeyOutcome {
    pub fn secure_bits(&self) -> u64 {
        match self {
            KeyOutcome::Key(k) => k.secure_bits,
            KeyOutcome::NoKey { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub manifest: Manifest,
    pub tables: BTreeMap<Link, CountTable>,
    pub pools: BTreeMap<Link, PoolSummary>,
    pub keys: BTreeMap<Link, KeyOutcome>,
    /// Signature parameters for Alice's two links.
    pub qds: BTreeMap<Link, QdsOutcome>,
}

/// A report together with the raw Z-basis pools.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub report: RunReport,
    pub z_pools: BTreeMap<Link, ZPool>,
    pub trace: Vec<crate::netsim::run::DetectionEvent>,
}

fn session_of(link: Link) -> SessionType {
    match link {
        Link::AB => SessionType::MdiAb,
        Link::AC => SessionType::QkdAc,
        Link::BC => SessionType::QkdBc,
    }
}

/// Key length of one count table. Analytical failures (too few counts, no
/// single-photon guarantee, an insecure channel) become a `NoKey` outcome;
/// anything else propagates.
pub fn key_outcome(
    table: &CountTable,
    intensities: &IntensitySet,
    security: &SecurityParams,
    elapsed_s: f64,
) -> Result<KeyOutcome> {
    let no_key = |e: Error| match e {
        Error::Domain(_)
        | Error::MissingEntry(_)
        | Error::InconsistentCounts(_)
        | Error::Insecure(_)
        | Error::Insufficient(_)
        | Error::Lp(_) => Ok(KeyOutcome::NoKey {
            reason: e.to_string(),
        }),
        other => Err(other),
    };
    let mode = table.link.mode();
    let bounds = match security
        .secrecy_budget()
        .and_then(|eps| estimate_bounds(table, intensities, eps, mode))
    {
        Ok(b) => b,
        Err(e) => return no_key(e),
    };
    let signal = table.signal()?;
    match secure_key_length(
        &bounds,
        signal.detected,
        Probability::saturating(signal.qber()),
        security,
    ) {
        Ok(k) => Ok(KeyOutcome::Key(k.over(elapsed_s))),
        Err(e) => no_key(e),
    }
}

fn qds_for(table: &CountTable, config: &RunConfig, duty: f64) -> Result<QdsOutcome> {
    let q = &config.qds;
    distil_table(
        table,
        &config.intensities,
        &q.budgets,
        q.test_fraction,
        q.c_sig,
        config.elapsed_s(),
        duty,
    )
}

/// Runs the configured simulation and every analysis on its output.
pub fn simulate(config: &RunConfig) -> Result<Simulation> {
    config.validate()?;
    let plan = schedule(
        config.slots,
        config.weights,
        config.intensities,
        derive_seed(config.seed, 0),
    )?;
    let out = run_plan_with(
        &plan,
        &config.models()?,
        derive_seed(config.seed, 1),
        RunOptions {
            trace_events: config.trace_events,
        },
    )?;
    let mut keys = BTreeMap::new();
    let mut qds = BTreeMap::new();
    for (&link, table) in &out.tables {
        let duty = config.weights.fraction(session_of(link));
        let elapsed = config.elapsed_s();
        keys.insert(
            link,
            key_outcome(table, &config.intensities, &config.security, elapsed)?,
        );
        if link != Link::BC {
            qds.insert(link, qds_for(table, config, duty)?);
        }
    }
    let report = RunReport {
        manifest: Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            config: *config,
            tallies: out.tallies,
        },
        tables: out.tables,
        pools: out.z_pools.iter().map(|(&l, p)| (l, p.into())).collect(),
        keys,
        qds,
    };
    Ok(Simulation {
        report,
        z_pools: out.z_pools,
        trace: out.trace,
    })
}
