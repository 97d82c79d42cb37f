//! Secure key length for QKD and MDI-QKD links and rate-versus-distance
//! sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    mdi_yield_model_with, qkd_yield_model, synthesize_table, ChannelParams, IntensitySet,
    MdiOptions, Synthesis,
};
use crate::counts::{Link, Mode};
use crate::decoy::{estimate_bounds, DecoyBounds};
use crate::error::{domain, Result};
use crate::mathkit::{binary_entropy, FailureBudget, Probability};

fn default_eps_sec() -> FailureBudget {
    FailureBudget::new(1e-10).unwrap()
}
fn default_eps_cor() -> FailureBudget {
    FailureBudget::new(1e-15).unwrap()
}
fn default_f_ec() -> f64 {
    1.16
}

/// Security parameters of the key-length formula.
///
/// The budgets are plain positive reals so that the degenerate values used
/// to switch the finite-size term off (`eps_sec = 21`, `eps_cor = 2`) can be
/// expressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    #[serde(default = "default_eps_sec_f64")]
    pub eps_sec: f64,
    #[serde(default = "default_eps_cor_f64")]
    pub eps_cor: f64,
    #[serde(default = "default_f_ec")]
    pub f_ec: f64,
}

fn default_eps_sec_f64() -> f64 {
    default_eps_sec().get()
}
fn default_eps_cor_f64() -> f64 {
    default_eps_cor().get()
}

impl Default for SecurityParams {
    fn default() -> Self {
        SecurityParams {
            eps_sec: default_eps_sec_f64(),
            eps_cor: default_eps_cor_f64(),
            f_ec: default_f_ec(),
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_sec > 0.0 && self.eps_cor > 0.0) {
            return Err(domain("security budgets must be positive"));
        }
        if !(self.f_ec >= 1.0) {
            return Err(domain(format!(
                "error-correction efficiency {} below 1",
                self.f_ec
            )));
        }
        Ok(())
    }

    /// The secrecy budget as a failure probability, for the estimation steps.
    pub fn secrecy_budget(&self) -> Result<FailureBudget> {
        FailureBudget::new(self.eps_sec.min(1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub secure_bits: u64,
    pub rate_bps: f64,
    pub leak_ec_bits: u64,
    pub delta_bits: u64,
    /// Acquisition time the key was collected over; zero until
    /// [`KeyRateResult::over`] attaches one.
    pub elapsed_s: f64,
}

impl KeyRateResult {
    pub fn over(mut self, elapsed_s: f64) -> Self {
        self.elapsed_s = elapsed_s;
        self.rate_bps = if elapsed_s > 0.0 {
            self.secure_bits as f64 / elapsed_s
        } else {
            0.0
        };
        self
    }
}

/// Bits disclosed by error correction: `ceil(f_ec · h(qber) · n_z)`.
pub fn leak_ec(n_z: u64, qber_z: Probability, params: &SecurityParams) -> u64 {
    (params.f_ec * binary_entropy(qber_z) * n_z as f64).ceil() as u64
}

/// Composable finite-size correction `6 log₂(21/ε_sec) + log₂(2/ε_cor)`,
/// rounded up and floored at zero.
pub fn finite_size_delta(params: &SecurityParams) -> u64 {
    let d = 6.0 * (21.0 / params.eps_sec).log2() + (2.0 / params.eps_cor).log2();
    d.max(0.0).ceil() as u64
}

/// The unclamped extraction term `S₁ (1 - h(e_ph))`.
pub fn extractable_bits(bounds: &DecoyBounds) -> f64 {
    let eph = bounds.eph_upper.get();
    let h = if eph >= 0.5 {
        1.0
    } else {
        binary_entropy(bounds.eph_upper)
    };
    bounds.s1_lower * (1.0 - h)
}

pub fn secure_key_length(
    bounds: &DecoyBounds,
    n_z: u64,
    qber_z: Probability,
    params: &SecurityParams,
) -> Result<KeyRateResult> {
    params.validate()?;
    if bounds.s1_lower > n_z as f64 {
        return Err(domain(format!(
            "single-photon bound {} exceeds the {n_z} Z detections",
            bounds.s1_lower
        )));
    }
    let leak = leak_ec(n_z, qber_z, params);
    let delta = finite_size_delta(params);
    let raw = extractable_bits(bounds) - leak as f64 - delta as f64;
    Ok(KeyRateResult {
        secure_bits: raw.max(0.0).floor() as u64,
        rate_bps: 0.0,
        leak_ec_bits: leak,
        delta_bits: delta,
        elapsed_s: 0.0,
    })
}

/// Simulation settings shared by every point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSettings {
    /// Pulses (QKD) or pulse pairs (MDI) per point. The default is a
    /// day-long acquisition at 1 GHz.
    pub pulses: u64,
    /// Fraction of slots the link is active; stretches the elapsed time.
    pub duty: f64,
    pub seed: u64,
    /// Gain factor of the QKD receiver's passive basis choice.
    pub qkd_sifting: f64,
    pub mdi: MdiOptions,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            pulses: 90_000_000_000_000,
            duty: 1.0,
            seed: 0,
            qkd_sifting: 0.5,
            mdi: MdiOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub distance_km: f64,
    pub mode: Mode,
    pub secure_bits: u64,
    pub elapsed_s: f64,
    pub rate_bps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Per-point seed, a SplitMix64 step over `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key from one synthesized acquisition on a link of the given length.
///
/// MDI distances are end to end, split evenly between the two arms.
pub fn simulate_point(
    template: &ChannelParams,
    intensities: &IntensitySet,
    distance_km: f64,
    mode: Mode,
    security: &SecurityParams,
    settings: &SweepSettings,
    seed: u64,
) -> Result<KeyRateResult> {
    let (model, link, sifting) = match mode {
        Mode::Qkd => (
            qkd_yield_model(&template.at_distance(distance_km))?,
            Link::AC,
            settings.qkd_sifting,
        ),
        Mode::Mdi => {
            let arm = template.at_distance(distance_km / 2.0);
            (
                mdi_yield_model_with(&arm, &arm, &settings.mdi, crate::channel::DEFAULT_N_CUT)?,
                Link::AB,
                1.0,
            )
        }
    };
    let synthesis = Synthesis {
        pulses: settings.pulses,
        sifting,
    };
    let table = synthesize_table(&model, intensities, link, synthesis, seed)?;
    let bounds = estimate_bounds(&table, intensities, security.secrecy_budget()?, mode)?;
    let signal = table.signal()?;
    let result = secure_key_length(
        &bounds,
        signal.detected,
        Probability::saturating(signal.qber()),
        security,
    )?;
    let elapsed = settings.pulses as f64 / template.clock_rate_hz / settings.duty;
    Ok(result.over(elapsed))
}

/// Secure key rate at each distance; failing points report rate 0 with a
/// note instead of aborting the sweep.
pub fn rate_sweep(
    template: &ChannelParams,
    intensities: &IntensitySet,
    distances: &[f64],
    mode: Mode,
    security: &SecurityParams,
    settings: &SweepSettings,
) -> Result<Vec<SweepPoint>> {
    if distances.is_empty() {
        return Err(domain("rate sweep needs at least one distance"));
    }
    if !(settings.duty > 0.0 && settings.duty <= 1.0) {
        return Err(domain(format!("duty {} outside (0, 1]", settings.duty)));
    }
    template.validate()?;
    intensities.validate()?;
    security.validate()?;
    let elapsed = settings.pulses as f64 / template.clock_rate_hz / settings.duty;
    Ok(distances
        .par_iter()
        .enumerate()
        .map(|(i, &d)| {
            let seed = derive_seed(settings.seed, i as u64);
            match simulate_point(template, intensities, d, mode, security, settings, seed) {
                Ok(r) => SweepPoint {
                    distance_km: d,
                    mode,
                    secure_bits: r.secure_bits,
                    elapsed_s: r.elapsed_s,
                    rate_bps: r.rate_bps,
                    note: None,
                },
                Err(e) => SweepPoint {
                    distance_km: d,
                    mode,
                    secure_bits: 0,
                    elapsed_s: elapsed,
                    rate_bps: 0.0,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// CSV with columns `distance_km,mode,secure_bits,elapsed_s,rate_bps`.
pub fn sweep_csv(points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "distance_km",
        "mode",
        "secure_bits",
        "elapsed_s",
        "rate_bps",
    ])
    .map_err(|e| crate::Error::Io(e.to_string()))?;
    for p in points {
        w.write_record([
            p.distance_km.to_string(),
            p.mode.to_string(),
            p.secure_bits.to_string(),
            p.elapsed_s.to_string(),
            p.rate_bps.to_string(),
        ])
        .map_err(|e| crate::Error::Io(e.to_string()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| crate::Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| crate::Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(s1: f64, eph: f64) -> DecoyBounds {
        DecoyBounds {
            s1_lower: s1,
            eph_upper: Probability::saturating(eph),
            y1_lower: Probability::saturating(0.01),
            e1_x_upper: Probability::saturating(eph),
            epsilon_spent: FailureBudget::new(1e-10).unwrap(),
            mode: Mode::Mdi,
            z_detected: 2_500_000,
        }
    }

    #[test]
    fn leak_values() {
        let p = SecurityParams::default();
        assert_eq!(leak_ec(1_000_000, Probability::ZERO, &p), 0);
        let l = leak_ec(1_000_000, Probability::new(0.005).unwrap(), &p);
        assert!((l as i64 - 52_676).abs() <= 10, "{l}");
        let unit = SecurityParams { f_ec: 1.0, ..p };
        assert_eq!(leak_ec(12345, Probability::HALF, &unit), 12345);
    }

    #[test]
    fn delta_values() {
        assert_eq!(finite_size_delta(&SecurityParams::default()), 277);
        let off = SecurityParams {
            eps_sec: 21.0,
            eps_cor: 2.0,
            f_ec: 1.16,
        };
        assert_eq!(finite_size_delta(&off), 0);
    }

    #[test]
    fn half_phase_error_gives_nothing() {
        let r = secure_key_length(
            &bounds(1e6, 0.5),
            2_000_000,
            Probability::new(0.01).unwrap(),
            &SecurityParams::default(),
        )
        .unwrap();
        assert_eq!(r.secure_bits, 0);
    }

    #[test]
    fn bound_above_detections_is_rejected() {
        assert!(secure_key_length(
            &bounds(10.0, 0.1),
            5,
            Probability::ZERO,
            &SecurityParams::default()
        )
        .is_err());
    }

    #[test]
    fn rate_attaches_time() {
        let r = KeyRateResult {
            secure_bits: 100,
            rate_bps: 0.0,
            leak_ec_bits: 0,
            delta_bits: 0,
            elapsed_s: 0.0,
        }
        .over(4.0);
        assert_eq!(r.rate_bps, 25.0);
    }

    #[test]
    fn seeds_differ_per_index() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(9, 3), derive_seed(9, 3));
    }
}
