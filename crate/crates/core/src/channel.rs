//! Ground-truth photon-number yield models and Poisson-mixture count
//! synthesis for the QKD links and the MDI link.
//!
//! The MDI model is phenomenological: a Bell-success factor times the two
//! per-side click probabilities, plus a dark-coincidence floor. Correctness of
//! the analysis pipeline is judged against these tables, not against a
//! quantum-optical interference model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::counts::{Basis, CountRecord, CountTable, Intensity, Label, Link, Mode};
use crate::error::{domain, Error, Result};
use crate::mathkit::{poisson_pmf, poisson_tail, Probability};

pub const DEFAULT_N_CUT: usize = 12;

/// Truncation tail above which expectations are refused.
pub const TAIL_LIMIT: f64 = 1e-10;

fn default_attenuation() -> f64 {
    0.2
}
fn default_efficiency() -> Probability {
    Probability::saturating(0.209)
}
fn default_clock() -> f64 {
    1e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    pub distance_km: f64,
    #[serde(default = "default_attenuation")]
    pub attenuation_db_per_km: f64,
    #[serde(default = "default_efficiency")]
    pub detector_efficiency: Probability,
    pub dark_count_prob: Probability,
    pub misalignment: Probability,
    #[serde(default = "default_clock")]
    pub clock_rate_hz: f64,
    /// Fixed receiver-side loss on top of the fibre, in dB.
    #[serde(default)]
    pub insertion_loss_db: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            distance_km: 0.0,
            attenuation_db_per_km: 0.2,
            detector_efficiency: default_efficiency(),
            dark_count_prob: Probability::saturating(1e-6),
            misalignment: Probability::saturating(0.005),
            clock_rate_hz: 1e9,
            insertion_loss_db: 0.0,
        }
    }
}

impl ChannelParams {
    pub fn at_distance(mut self, distance_km: f64) -> Self {
        self.distance_km = distance_km;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_km >= 0.0) {
            return Err(domain(format!("negative distance {}", self.distance_km)));
        }
        if !(self.attenuation_db_per_km >= 0.0) || !(self.insertion_loss_db >= 0.0) {
            return Err(domain("losses must be non-negative"));
        }
        if !(self.clock_rate_hz > 0.0) {
            return Err(domain("clock rate must be positive"));
        }
        Ok(())
    }

    /// Overall single-photon detection probability.
    pub fn transmittance(&self) -> f64 {
        let loss_db = self.attenuation_db_per_km * self.distance_km + self.insertion_loss_db;
        10f64.powf(-loss_db / 10.0) * self.detector_efficiency.get()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntensitySet {
    pub s: f64,
    pub u: f64,
    pub v: f64,
    #[serde(default)]
    pub w: f64,
    #[serde(default = "default_z_prob")]
    pub z_basis_prob: f64,
}

fn default_z_prob() -> f64 {
    0.8
}

impl Default for IntensitySet {
    fn default() -> Self {
        IntensitySet {
            s: 0.5,
            u: 0.25,
            v: 0.04,
            w: 0.0,
            z_basis_prob: 0.8,
        }
    }
}

impl IntensitySet {
    pub fn validate(&self) -> Result<()> {
        if !(self.s > self.u && self.u > self.v && self.v > self.w && self.w >= 0.0) {
            return Err(domain(format!(
                "intensities must satisfy s > u > v > w >= 0, got {self:?}"
            )));
        }
        if !(self.z_basis_prob > 0.0 && self.z_basis_prob < 1.0) {
            return Err(domain(format!(
                "Z-basis probability {} outside (0, 1)",
                self.z_basis_prob
            )));
        }
        Ok(())
    }

    pub fn mean(&self, label: Label) -> f64 {
        match label {
            Label::S => self.s,
            Label::U => self.u,
            Label::V => self.v,
            Label::W => self.w,
        }
    }

    /// Probability that one sender prepares `label`: Z with the signal,
    /// otherwise X split evenly over the three decoy classes.
    pub fn label_prob(&self, label: Label) -> f64 {
        match label {
            Label::S => self.z_basis_prob,
            _ => (1.0 - self.z_basis_prob) / 3.0,
        }
    }

    /// Mean photon numbers of an entry (second is `None` for QKD entries).
    pub fn means(&self, intensity: Intensity) -> (f64, Option<f64>) {
        match intensity {
            Intensity::Single(l) => (self.mean(l), None),
            Intensity::Pair(a, b) => (self.mean(a), Some(self.mean(b))),
        }
    }
}

/// Options of the phenomenological MDI model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdiOptions {
    pub hom_visibility: Probability,
    /// Fraction of two-sided coincidences that project onto the accepted
    /// Bell state.
    pub bell_success: Probability,
    /// X-basis error rate of multi-photon pairs.
    pub multi_photon_error: Probability,
}

impl Default for MdiOptions {
    fn default() -> Self {
        MdiOptions {
            hom_visibility: Probability::ONE,
            bell_success: Probability::HALF,
            multi_photon_error: Probability::saturating(0.25),
        }
    }
}

/// Per-photon-number detection and error probabilities.
///
/// QKD models are indexed by `n`; MDI models are `(n_cut+1)²` row-major
/// matrices indexed by `(n, m)`. `error_rates` apply to the X (phase) basis;
/// `z_error_rates`, when present, override them in Z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YieldModel {
    pub kind: Mode,
    pub n_cut: usize,
    pub yields: Vec<f64>,
    pub error_rates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_error_rates: Option<Vec<f64>>,
}

impl YieldModel {
    pub fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            Mode::Qkd => self.n_cut + 1,
            Mode::Mdi => (self.n_cut + 1) * (self.n_cut + 1),
        };
        let check = |v: &Vec<f64>, name: &str| -> Result<()> {
            if v.len() != expected {
                return Err(domain(format!(
                    "{name} has {} entries, expected {expected}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(domain(format!("{name} entries must lie in [0, 1]")));
            }
            Ok(())
        };
        check(&self.yields, "yields")?;
        check(&self.error_rates, "error_rates")?;
        if let Some(z) = &self.z_error_rates {
            check(z, "z_error_rates")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: YieldModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    fn index(&self, n: usize, m: usize) -> usize {
        match self.kind {
            Mode::Qkd => n,
            Mode::Mdi => n * (self.n_cut + 1) + m,
        }
    }

    /// Yield of photon number `n` (QKD) or pair `(n, m)` (MDI). Photon numbers
    /// above the cutoff saturate at the cutoff entry.
    pub fn yield_at(&self, n: usize, m: usize) -> f64 {
        self.yields[self.index(n.min(self.n_cut), m.min(self.n_cut))]
    }

    pub fn error_at(&self, basis: Basis, n: usize, m: usize) -> f64 {
        let i = self.index(n.min(self.n_cut), m.min(self.n_cut));
        match (basis, &self.z_error_rates) {
            (Basis::Z, Some(z)) => z[i],
            _ => self.error_rates[i],
        }
    }

    /// Single-photon yield `Y₁` or `Y₁,₁`.
    pub fn single_photon_yield(&self) -> f64 {
        self.yield_at(1, 1)
    }

    /// Single-photon error rate in `basis`.
    pub fn single_photon_error(&self, basis: Basis) -> f64 {
        self.error_at(basis, 1, 1)
    }

    /// Multiplies every yield by `factor` (a sifting acceptance), leaving
    /// error rates unchanged.
    pub fn scaled(&self, factor: f64) -> YieldModel {
        let mut m = self.clone();
        for y in &mut m.yields {
            *y = (*y * factor).clamp(0.0, 1.0);
        }
        m
    }
}

fn click_prob(eta: f64, n: usize) -> f64 {
    1.0 - (1.0 - eta).powi(n as i32)
}

fn ratio_or_half(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

/// Threshold-detector QKD link model.
///
/// With `η` the overall transmittance and `Y₀ = 2d`:
/// `Yₙ = Y₀ + ηₙ - Y₀ηₙ`, `eₙ = (Y₀/2 + e_mis ηₙ (1-Y₀)) / Yₙ`, where
/// `ηₙ = 1 - (1-η)ⁿ`.
pub fn qkd_yield_model(params: &ChannelParams) -> Result<YieldModel> {
    qkd_yield_model_with_cut(params, DEFAULT_N_CUT)
}

pub fn qkd_yield_model_with_cut(params: &ChannelParams, n_cut: usize) -> Result<YieldModel> {
    params.validate()?;
    let eta = params.transmittance();
    let y0 = (2.0 * params.dark_count_prob.get()).min(1.0);
    let mis = params.misalignment.get();
    let mut yields = Vec::with_capacity(n_cut + 1);
    let mut errors = Vec::with_capacity(n_cut + 1);
    for n in 0..=n_cut {
        let eta_n = click_prob(eta, n);
        let y = (y0 + eta_n - y0 * eta_n).clamp(0.0, 1.0);
        yields.push(y);
        errors.push(ratio_or_half(0.5 * y0 + mis * eta_n * (1.0 - y0), y));
    }
    Ok(YieldModel {
        kind: Mode::Qkd,
        n_cut,
        yields,
        error_rates: errors,
        z_error_rates: None,
    })
}

/// Phenomenological MDI link model with default Bell-success factor and
/// multi-photon error floor.
pub fn mdi_yield_model(
    params_a: &ChannelParams,
    params_b: &ChannelParams,
    hom_visibility: Probability,
) -> Result<YieldModel> {
    mdi_yield_model_with(
        params_a,
        params_b,
        &MdiOptions {
            hom_visibility,
            ..MdiOptions::default()
        },
        DEFAULT_N_CUT,
    )
}

/// `Y(n,m) = q ηₐ,ₙ η_b,ₘ + 2 dₐ d_b`. Z errors come from misalignment only;
/// X errors of the `(1,1)` pair add the visibility defect, and larger pairs
/// use the configured multi-photon floor. Dark-coincidence events are random.
pub fn mdi_yield_model_with(
    params_a: &ChannelParams,
    params_b: &ChannelParams,
    opts: &MdiOptions,
    n_cut: usize,
) -> Result<YieldModel> {
    params_a.validate()?;
    params_b.validate()?;
    let (eta_a, eta_b) = (params_a.transmittance(), params_b.transmittance());
    let floor = 2.0 * params_a.dark_count_prob.get() * params_b.dark_count_prob.get();
    let flip = |p: f64, q: f64| p + q - 2.0 * p * q;
    let mis = flip(params_a.misalignment.get(), params_b.misalignment.get());
    let visibility_defect = 0.5 * (1.0 - opts.hom_visibility.get());
    let e_x11 = flip(mis, visibility_defect);
    let e_x_multi = opts.multi_photon_error.get().max(e_x11);
    let q = opts.bell_success.get();

    let size = (n_cut + 1) * (n_cut + 1);
    let mut yields = Vec::with_capacity(size);
    let mut x_err = Vec::with_capacity(size);
    let mut z_err = Vec::with_capacity(size);
    for n in 0..=n_cut {
        for m in 0..=n_cut {
            let signal = q * click_prob(eta_a, n) * click_prob(eta_b, m);
            let y = (signal + floor).clamp(0.0, 1.0);
            yields.push(y);
            let ex = if n == 1 && m == 1 { e_x11 } else { e_x_multi };
            x_err.push(ratio_or_half(0.5 * floor + ex * signal, y));
            z_err.push(ratio_or_half(0.5 * floor + mis * signal, y));
        }
    }
    Ok(YieldModel {
        kind: Mode::Mdi,
        n_cut,
        yields,
        error_rates: x_err,
        z_error_rates: Some(z_err),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainQber {
    pub gain: f64,
    pub qber: f64,
    /// Poisson mass beyond the photon-number cutoff (upper bound on the
    /// gain's truncation error).
    pub truncation_error: f64,
}

/// Poisson-mixture gain and QBER of one intensity (QKD) or intensity pair
/// (MDI) in `basis`.
pub fn expected_gain_and_qber(
    model: &YieldModel,
    basis: Basis,
    mu: f64,
    nu: Option<f64>,
) -> Result<GainQber> {
    let n_cut = model.n_cut;
    let pa: Vec<f64> = (0..=n_cut)
        .map(|n| poisson_pmf(mu, n as u64).map(Probability::get))
        .collect::<Result<_>>()?;
    let mut tail = poisson_tail(mu, n_cut as u64)?;
    let (mut gain, mut err) = (0.0, 0.0);
    match (model.kind, nu) {
        (Mode::Qkd, None) => {
            for (n, w) in pa.iter().enumerate() {
                let y = model.yield_at(n, 0);
                gain += w * y;
                err += w * y * model.error_at(basis, n, 0);
            }
        }
        (Mode::Mdi, Some(nu)) => {
            let pb: Vec<f64> = (0..=n_cut)
                .map(|m| poisson_pmf(nu, m as u64).map(Probability::get))
                .collect::<Result<_>>()?;
            let tail_b = poisson_tail(nu, n_cut as u64)?;
            tail = tail + tail_b - tail * tail_b;
            for (n, wa) in pa.iter().enumerate() {
                for (m, wb) in pb.iter().enumerate() {
                    let w = wa * wb;
                    let y = model.yield_at(n, m);
                    gain += w * y;
                    err += w * y * model.error_at(basis, n, m);
                }
            }
        }
        (kind, nu) => {
            return Err(domain(format!(
                "{kind} model needs {} mean photon number(s), got nu={nu:?}",
                if kind == Mode::Mdi { "two" } else { "one" }
            )))
        }
    }
    if tail > TAIL_LIMIT {
        return Err(Error::TruncationTail {
            tail,
            limit: TAIL_LIMIT,
        });
    }
    Ok(GainQber {
        gain: gain.clamp(0.0, 1.0),
        qber: ratio_or_half(err, gain),
        truncation_error: tail,
    })
}

/// Draws `detected ~ Bin(n_pulses, gain)`, `errors ~ Bin(detected, qber)`.
pub fn sample_counts(
    model: &YieldModel,
    basis: Basis,
    mu: f64,
    nu: Option<f64>,
    n_pulses: u64,
    seed: u64,
) -> Result<CountRecord> {
    let gq = expected_gain_and_qber(model, basis, mu, nu)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draw_record(&mut rng, n_pulses, gq.gain, gq.qber))
}

pub(crate) fn draw_binomial<R: rand::Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("binomial parameters validated")
        .sample(rng)
}

pub(crate) fn draw_record<R: rand::Rng>(
    rng: &mut R,
    sent: u64,
    gain: f64,
    qber: f64,
) -> CountRecord {
    let detected = draw_binomial(rng, sent, gain);
    let errors = draw_binomial(rng, detected, qber);
    CountRecord {
        sent,
        detected,
        errors,
    }
}

/// How a synthesized table's pulse budget is allocated and sifted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    /// Total pulses (QKD) or pulse pairs (MDI).
    pub pulses: u64,
    /// Multiplies every gain, e.g. 0.5 for a passive 50:50 basis choice at
    /// the receiver.
    pub sifting: f64,
}

/// Entries a table needs for decoy analysis on `link`, with the probability
/// that a pulse (pair) falls into each.
pub fn entry_plan(link: Link, intensities: &IntensitySet) -> Vec<(Intensity, Basis, f64)> {
    let mut plan = Vec::new();
    match link.mode() {
        Mode::Qkd => {
            plan.push((
                Intensity::Single(Label::S),
                Basis::Z,
                intensities.label_prob(Label::S),
            ));
            for l in Label::DECOYS {
                plan.push((Intensity::Single(l), Basis::X, intensities.label_prob(l)));
            }
        }
        Mode::Mdi => {
            let pz = intensities.label_prob(Label::S);
            plan.push((Intensity::Pair(Label::S, Label::S), Basis::Z, pz * pz));
            for a in Label::DECOYS {
                for b in Label::DECOYS {
                    let p = intensities.label_prob(a) * intensities.label_prob(b);
                    plan.push((Intensity::Pair(a, b), Basis::X, p));
                }
            }
        }
    }
    plan
}

fn check_link(model: &YieldModel, link: Link) -> Result<()> {
    if model.kind != link.mode() {
        return Err(domain(format!(
            "{} model cannot feed link {link}",
            model.kind
        )));
    }
    Ok(())
}

/// Finite-sample count table drawn from `model`, deterministic under `seed`.
pub fn synthesize_table(
    model: &YieldModel,
    intensities: &IntensitySet,
    link: Link,
    synthesis: Synthesis,
    seed: u64,
) -> Result<CountTable> {
    check_link(model, link)?;
    intensities.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = CountTable::new(link);
    for (intensity, basis, frac) in entry_plan(link, intensities) {
        let (mu, nu) = intensities.means(intensity);
        let gq = expected_gain_and_qber(model, basis, mu, nu)?;
        let sent = (synthesis.pulses as f64 * frac).floor() as u64;
        let rec = draw_record(&mut rng, sent, gq.gain * synthesis.sifting, gq.qber);
        table.record(intensity, basis, rec)?;
    }
    Ok(table)
}

/// Count table holding the rounded expected counts (no sampling noise).
pub fn expected_table(
    model: &YieldModel,
    intensities: &IntensitySet,
    link: Link,
    synthesis: Synthesis,
) -> Result<CountTable> {
    check_link(model, link)?;
    intensities.validate()?;
    let mut table = CountTable::new(link);
    for (intensity, basis, frac) in entry_plan(link, intensities) {
        let (mu, nu) = intensities.means(intensity);
        let gq = expected_gain_and_qber(model, basis, mu, nu)?;
        let sent = (synthesis.pulses as f64 * frac).floor() as u64;
        let detected = ((sent as f64) * gq.gain * synthesis.sifting).round() as u64;
        let errors = (detected as f64 * gq.qber).round() as u64;
        table.record(
            intensity,
            basis,
            CountRecord {
                sent,
                detected: detected.min(sent),
                errors: errors.min(detected),
            },
        )?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64) -> Probability {
        Probability::new(x).unwrap()
    }

    fn params(distance: f64, dark: f64, mis: f64) -> ChannelParams {
        ChannelParams {
            distance_km: distance,
            dark_count_prob: p(dark),
            misalignment: p(mis),
            ..ChannelParams::default()
        }
    }

    #[test]
    fn dead_channel_has_zero_yields() {
        let mut c = params(0.0, 0.0, 0.01);
        c.detector_efficiency = p(0.0);
        let m = qkd_yield_model(&c).unwrap();
        assert!(m.yields.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn dark_vacuum_yield() {
        let m = qkd_yield_model(&params(10.0, 3e-6, 0.01)).unwrap();
        assert!((m.yields[0] - 6e-6).abs() < 1e-18);
        assert_eq!(m.error_rates[0], 0.5);
    }

    #[test]
    fn single_photon_yield_at_25km() {
        let m = qkd_yield_model(&params(25.0, 1e-6, 0.005)).unwrap();
        let eta = 10f64.powf(-0.5) * 0.209;
        assert!((m.yields[1] - 0.0662).abs() < 1e-3);
        assert!((m.yields[1] - (2e-6 + eta - 2e-6 * eta)).abs() < 1e-15);
    }

    #[test]
    fn mdi_dead_channels() {
        let mut c = params(0.0, 0.0, 0.0);
        c.detector_efficiency = p(0.0);
        let m = mdi_yield_model(&c, &c, Probability::ONE).unwrap();
        assert!(m.yields.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn mdi_dark_floor() {
        let d = 4e-6;
        let m = mdi_yield_model(
            &params(20.0, d, 0.0),
            &params(20.0, d, 0.0),
            Probability::ONE,
        )
        .unwrap();
        assert_eq!(m.yield_at(0, 0), 2.0 * d * d);
        assert_eq!(m.error_at(Basis::X, 0, 0), 0.5);
        assert_eq!(m.error_at(Basis::Z, 3, 0), 0.5);
    }

    #[test]
    fn mdi_symmetric_single_pair() {
        let c = params(25.0, 1e-6, 0.005);
        let m = mdi_yield_model(&c, &c, Probability::ONE).unwrap();
        let eta = c.transmittance();
        let y11 = m.single_photon_yield();
        assert!((y11 / (0.5 * eta * eta) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn json_round_trip() {
        let c = params(5.0, 1e-6, 0.01);
        let m = mdi_yield_model(&c, &c, p(0.95)).unwrap();
        let back = YieldModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let bad = r#"{"kind":"QKD","n_cut":1,"yields":[0.1],"error_rates":[0.5]}"#;
        assert!(YieldModel::from_json(bad).is_err());
    }

    #[test]
    fn vacuum_gain_is_dark_yield() {
        let m = qkd_yield_model(&params(30.0, 2e-6, 0.01)).unwrap();
        let g = expected_gain_and_qber(&m, Basis::X, 0.0, None).unwrap();
        assert_eq!(g.gain, m.yields[0]);
    }

    #[test]
    fn single_entry_model() {
        let mut yields = vec![0.0; 13];
        yields[1] = 0.1;
        let m = YieldModel {
            kind: Mode::Qkd,
            n_cut: 12,
            yields,
            error_rates: vec![0.0; 13],
            z_error_rates: None,
        };
        let g = expected_gain_and_qber(&m, Basis::Z, 0.5, None).unwrap();
        assert!((g.gain - 0.5 * (-0.5f64).exp() * 0.1).abs() < 1e-12);
        assert!((g.gain - 0.3033 * 0.1).abs() < 1e-5);
    }

    #[test]
    fn all_dark_qber_is_half() {
        let mut c = params(0.0, 1e-5, 0.0);
        c.detector_efficiency = p(0.0);
        let m = qkd_yield_model(&c).unwrap();
        let g = expected_gain_and_qber(&m, Basis::Z, 0.4, None).unwrap();
        assert!((g.qber - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tail_violation_is_reported() {
        let m = qkd_yield_model(&params(0.0, 1e-6, 0.01)).unwrap();
        assert!(matches!(
            expected_gain_and_qber(&m, Basis::Z, 5.0, None),
            Err(Error::TruncationTail { .. })
        ));
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let m = qkd_yield_model(&params(0.0, 1e-6, 0.01)).unwrap();
        assert!(expected_gain_and_qber(&m, Basis::Z, 0.5, Some(0.5)).is_err());
    }

    #[test]
    fn sampling_edge_cases() {
        let m = qkd_yield_model(&params(10.0, 1e-6, 0.01)).unwrap();
        let r = sample_counts(&m, Basis::Z, 0.5, None, 0, 3).unwrap();
        assert_eq!(r, CountRecord::default());
        let a = sample_counts(&m, Basis::Z, 0.5, None, 1_000_000, 7).unwrap();
        let b = sample_counts(&m, Basis::Z, 0.5, None, 1_000_000, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn large_sample_within_five_sigma() {
        let m = YieldModel {
            kind: Mode::Qkd,
            n_cut: 12,
            yields: vec![0.01; 13],
            error_rates: vec![0.1; 13],
            z_error_rates: None,
        };
        let r = sample_counts(&m, Basis::Z, 0.3, None, 100_000_000, 11).unwrap();
        let sigma = (1e8f64 * 0.01 * 0.99).sqrt();
        assert!((sigma - 995.0).abs() < 1.0);
        assert!((r.detected as f64 - 1e6).abs() < 5.0 * sigma);
    }
}
