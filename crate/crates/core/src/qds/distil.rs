//! From single-photon bounds and test-set error rates to signature
//! parameters and security figures.

use serde::{Deserialize, Serialize};

use crate::counts::Mode;
use crate::decoy::{restrict_to_block, DecoyBounds};
use crate::error::{domain, Error, Result};
use crate::mathkit::{
    binary_entropy, hoeffding_log_bound, inv_binary_entropy, serfling_deviation, FailureBudget,
    Probability,
};

/// Where the authentication and verification thresholds sit inside the gap
/// `(E_sig, p_E)`, as fractions of its width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub auth: f64,
    pub ver: f64,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule {
            auth: 1.0 / 3.0,
            ver: 2.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QdsParams {
    /// Bits per signature block.
    pub c_sig: u64,
    /// Size of the random test set used to estimate the block error rate.
    pub c_test: u64,
    pub eps_h: FailureBudget,
    pub p_rep_budget: FailureBudget,
    /// Budget charged for the decoy-state estimate of the block.
    pub eps_decoy: FailureBudget,
    pub p_fail_total: FailureBudget,
    #[serde(default)]
    pub thresholds: ThresholdRule,
}

impl QdsParams {
    fn with_sizes(c_sig: u64, c_test: u64) -> Self {
        QdsParams {
            c_sig,
            c_test,
            eps_h: FailureBudget::new(2e-11).unwrap(),
            p_rep_budget: FailureBudget::new(0.5e-10).unwrap(),
            eps_decoy: FailureBudget::new(2e-11).unwrap(),
            p_fail_total: FailureBudget::new(1e-10).unwrap(),
            thresholds: ThresholdRule::default(),
        }
    }

    /// MDI-link defaults: 2.5 Mbit blocks.
    pub fn mdi_default() -> Self {
        Self::with_sizes(2_500_000, 1_714_426)
    }

    /// QKD-link defaults: 150 kbit blocks.
    pub fn qkd_default() -> Self {
        Self::with_sizes(150_000, 46_979_354)
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Mdi => Self::mdi_default(),
            Mode::Qkd => Self::qkd_default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_sig == 0 || self.c_test == 0 {
            return Err(domain("c_sig and c_test must be positive"));
        }
        if self.eps_h.get() >= 1.0 {
            return Err(domain("eps_h must be below 1"));
        }
        let t = self.thresholds;
        if !(0.0 < t.auth && t.auth < t.ver && t.ver < 1.0) {
            return Err(domain(format!(
                "threshold fractions {t:?} not in 0 < auth < ver < 1"
            )));
        }
        Ok(())
    }
}

/// Lowest error rate an eavesdropper must induce on the signature block:
/// `h⁻¹( (S₁/C_sig) · (1 - h(e_ph)) )`.
pub fn eve_error_floor(
    s1_sig_lower: f64,
    c_sig: u64,
    eph_sig_upper: Probability,
) -> Result<Probability> {
    if c_sig == 0 {
        return Err(domain("empty signature block"));
    }
    if s1_sig_lower < 0.0 || s1_sig_lower > c_sig as f64 {
        return Err(domain(format!(
            "single-photon bound {s1_sig_lower} outside [0, {c_sig}]"
        )));
    }
    if eph_sig_upper.get() > 0.5 {
        return Err(domain("phase-error bound above one half"));
    }
    let rhs = s1_sig_lower / c_sig as f64 * (1.0 - binary_entropy(eph_sig_upper));
    if rhs > 1.0 {
        return Err(domain(format!("entropy argument {rhs} exceeds 1")));
    }
    inv_binary_entropy(rhs)
}

/// Upper bound on the error rate of the signature block given the rate
/// observed on the test set.
pub fn qber_upper(
    e_test: Probability,
    c_test: u64,
    c_sig: u64,
    eps_h: FailureBudget,
) -> Result<Probability> {
    let dev = serfling_deviation(c_sig, c_test, eps_h)?;
    Ok(Probability::saturating(e_test.get() + dev))
}

/// Thresholds at one and two thirds of the gap between the block error
/// bound and Eve's floor.
pub fn thresholds(
    e_sig_upper: Probability,
    p_e: Probability,
) -> Result<(Probability, Probability)> {
    thresholds_with(e_sig_upper, p_e, ThresholdRule::default())
}

pub fn thresholds_with(
    e_sig_upper: Probability,
    p_e: Probability,
    rule: ThresholdRule,
) -> Result<(Probability, Probability)> {
    let (e, p) = (e_sig_upper.get(), p_e.get());
    if p <= e {
        return Err(Error::Insecure(format!(
            "no threshold gap: p_E = {p:.4} does not exceed the block error bound {e:.4}"
        )));
    }
    let gap = p - e;
    Ok((
        Probability::saturating(e + rule.auth * gap),
        Probability::saturating(e + rule.ver * gap),
    ))
}

/// Shortest signature whose repudiation probability
/// `exp(-(s_ver - s_auth)² L / 4)` stays within `p_rep_budget`.
pub fn signature_length(
    s_auth: Probability,
    s_ver: Probability,
    p_rep_budget: FailureBudget,
) -> Result<u64> {
    let gap = s_ver.get() - s_auth.get();
    if !(gap > 0.0) {
        return Err(domain(
            "verification threshold must exceed authentication threshold",
        ));
    }
    let l = 4.0 * (1.0 / p_rep_budget.get()).ln() / (gap * gap);
    Ok(l.ceil().max(0.0) as u64)
}

/// Natural log of the repudiation probability at signature length `l`.
pub fn ln_repudiation(s_auth: Probability, s_ver: Probability, l: u64) -> f64 {
    let gap = s_ver.get() - s_auth.get();
    -gap * gap * l as f64 / 4.0
}

/// Honest-abort and forging probabilities with their natural logs, which
/// stay meaningful far below the f64 range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbortForge {
    pub p_hab: Probability,
    pub p_for: Probability,
    pub ln_p_hab: f64,
    pub ln_p_for: f64,
}

pub fn abort_and_forge(
    e_sig_upper: Probability,
    s_auth: Probability,
    s_ver: Probability,
    p_e: Probability,
    l: u64,
) -> Result<AbortForge> {
    let (e, a, v, p) = (e_sig_upper.get(), s_auth.get(), s_ver.get(), p_e.get());
    if !(e <= a && a <= v && v <= p) {
        return Err(domain(format!(
            "threshold ordering violated: {e} <= {a} <= {v} <= {p} does not hold"
        )));
    }
    let ln_hab = hoeffding_log_bound(a - e, l)?;
    let ln_for = hoeffding_log_bound(p - v, l)?;
    Ok(AbortForge {
        p_hab: Probability::saturating(ln_hab.exp()),
        p_for: Probability::saturating(ln_for.exp()),
        ln_p_hab: ln_hab,
        ln_p_for: ln_for,
    })
}

/// Average time spent per signature: `total · duty / n`.
pub fn timing_report(total_time_s: f64, duty_fraction: f64, n_signatures: u64) -> Result<f64> {
    if n_signatures == 0 {
        return Err(Error::Insufficient("no signatures to time".into()));
    }
    if !(total_time_s >= 0.0) || !(duty_fraction > 0.0 && duty_fraction <= 1.0) {
        return Err(domain("invalid total time or duty fraction"));
    }
    Ok(total_time_s * duty_fraction / n_signatures as f64)
}

/// Number of disjoint signature blocks left after the test set.
pub fn block_count(pool_len: u64, c_test: u64, c_sig: u64) -> Result<u64> {
    if c_sig == 0 {
        return Err(domain("empty signature block"));
    }
    if pool_len < c_test + c_sig {
        return Err(Error::Insufficient(format!(
            "pool of {pool_len} bits cannot hold a {c_test}-bit test set and a {c_sig}-bit block"
        )));
    }
    Ok((pool_len - c_test) / c_sig)
}

/// Everything the distillation step needs about one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QdsInputs {
    pub s1_sig_lower: f64,
    pub eph_sig_upper: Probability,
    pub e_test: Probability,
    /// Z-basis bits available for test set and blocks.
    pub pool_len: u64,
    /// Acquisition time the pool was collected over.
    pub total_time_s: f64,
    /// Share of the acquisition time spent on this link.
    pub duty_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdsReport {
    pub params: QdsParams,
    pub inputs: QdsInputs,
    pub p_e: Probability,
    pub e_test: Probability,
    pub e_sig_upper: Probability,
    pub s_auth: Probability,
    pub s_ver: Probability,
    pub l_sig: u64,
    pub p_rep: Probability,
    pub p_hab: Probability,
    pub p_for: Probability,
    pub ln_p_rep: f64,
    pub ln_p_hab: f64,
    pub ln_p_for: f64,
    pub n_signatures: u64,
    pub avg_time_per_signature_s: f64,
    /// Estimation budget: test-set sampling plus the decoy estimate.
    pub epsilon_spent: f64,
    /// `p_rep + p_hab + p_for + epsilon_spent`.
    pub total_failure: f64,
}

impl QdsReport {
    /// `e_test ≤ E_sig < s_auth < s_ver < p_E` and the failure total within
    /// budget.
    pub fn ordering_holds(&self) -> bool {
        self.e_test <= self.e_sig_upper
            && self.e_sig_upper < self.s_auth
            && self.s_auth < self.s_ver
            && self.s_ver < self.p_e
            && self.l_sig <= self.params.c_sig
            && self.total_failure <= self.params.p_fail_total.get()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QdsOutcome {
    Secure(Box<QdsReport>),
    Insecure { reason: String },
}

impl QdsOutcome {
    pub fn report(&self) -> Option<&QdsReport> {
        match self {
            QdsOutcome::Secure(r) => Some(r),
            QdsOutcome::Insecure { .. } => None,
        }
    }

    pub fn is_secure(&self) -> bool {
        matches!(self, QdsOutcome::Secure(_))
    }
}

/// Full distillation for one link. Domain-level failures to produce a
/// positive signature rate are reported as [`QdsOutcome::Insecure`] rather
/// than errors.
pub fn distil(inputs: &QdsInputs, params: &QdsParams) -> Result<QdsOutcome> {
    params.validate()?;
    let insecure = |reason: String| Ok(QdsOutcome::Insecure { reason });
    let n_signatures = match block_count(inputs.pool_len, params.c_test, params.c_sig) {
        Ok(n) => n,
        Err(e) => return insecure(e.to_string()),
    };
    if inputs.s1_sig_lower < 1.0 || inputs.eph_sig_upper.get() >= 0.5 {
        return insecure("no single-photon guarantee on the signature block".into());
    }
    let p_e = eve_error_floor(inputs.s1_sig_lower, params.c_sig, inputs.eph_sig_upper)?;
    let e_sig = qber_upper(inputs.e_test, params.c_test, params.c_sig, params.eps_h)?;
    let (s_auth, s_ver) = match thresholds_with(e_sig, p_e, params.thresholds) {
        Ok(t) => t,
        Err(e) => return insecure(e.to_string()),
    };
    let l_sig = signature_length(s_auth, s_ver, params.p_rep_budget)?;
    if l_sig > params.c_sig {
        return insecure(format!(
            "signature length {l_sig} exceeds the {}-bit block",
            params.c_sig
        ));
    }
    let af = abort_and_forge(e_sig, s_auth, s_ver, p_e, l_sig)?;
    let ln_rep = ln_repudiation(s_auth, s_ver, l_sig);
    let p_rep = ln_rep.exp();
    let epsilon_spent = params.eps_h.get() + params.eps_decoy.get();
    let total_failure = p_rep + af.p_hab.get() + af.p_for.get() + epsilon_spent;
    let avg = timing_report(inputs.total_time_s, inputs.duty_fraction, n_signatures)?;
    Ok(QdsOutcome::Secure(Box::new(QdsReport {
        params: *params,
        inputs: *inputs,
        p_e,
        e_test: inputs.e_test,
        e_sig_upper: e_sig,
        s_auth,
        s_ver,
        l_sig,
        p_rep: Probability::saturating(p_rep),
        p_hab: af.p_hab,
        p_for: af.p_for,
        ln_p_rep: ln_rep,
        ln_p_hab: af.ln_p_hab,
        ln_p_for: af.ln_p_for,
        n_signatures,
        avg_time_per_signature_s: avg,
        epsilon_spent,
        total_failure,
    })))
}

/// Restricts pool-level decoy bounds to one signature block and builds the
/// distillation inputs.
pub fn block_inputs(
    pool_bounds: &DecoyBounds,
    e_test: Probability,
    pool_len: u64,
    params: &QdsParams,
    total_time_s: f64,
    duty_fraction: f64,
) -> Result<QdsInputs> {
    if params.c_sig > pool_len {
        return Err(Error::Insufficient(format!(
            "pool of {pool_len} bits is smaller than one block"
        )));
    }
    // The pool estimate took half of the decoy share; each of the two
    // block corrections takes a quarter.
    let eps = params.eps_decoy.split(4);
    let block = restrict_to_block(pool_bounds, params.c_sig, pool_len, eps)?;
    Ok(QdsInputs {
        s1_sig_lower: block.s1_lower,
        eph_sig_upper: block.eph_upper,
        e_test,
        pool_len,
        total_time_s,
        duty_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64) -> Probability {
        Probability::new(x).unwrap()
    }

    #[test]
    fn eve_floor_published_values() {
        let mdi = eve_error_floor(666_345.0, 2_500_000, p(0.053)).unwrap();
        assert!((mdi.get() - 0.0286).abs() < 5e-4, "{mdi:?}");
        let qkd = eve_error_floor(86_563.0, 150_000, p(0.0237)).unwrap();
        assert!((qkd.get() - 0.105).abs() < 1e-3, "{qkd:?}");
        assert_eq!(eve_error_floor(0.0, 10, p(0.1)).unwrap().get(), 0.0);
        assert!(eve_error_floor(11.0, 10, p(0.1)).is_err());
    }

    #[test]
    fn qber_upper_published_values() {
        let eps = FailureBudget::new(2e-11).unwrap();
        let mdi = qber_upper(p(0.005), 1_714_426, 2_500_000, eps).unwrap();
        assert!((mdi.get() - 0.0085).abs() < 1e-4);
        let qkd = qber_upper(p(0.0017), 46_979_354, 150_000, eps).unwrap();
        assert!((qkd.get() - 0.0108).abs() < 1e-4);
        let unit = qber_upper(p(0.02), 10, 10, FailureBudget::new(1.0).unwrap()).unwrap();
        assert_eq!(unit.get(), 0.02);
    }

    #[test]
    fn thirds_rule() {
        let (a, v) = thresholds(p(0.0085), p(0.0286)).unwrap();
        assert!((a.get() - 0.0152).abs() < 1e-4 && (v.get() - 0.0219).abs() < 1e-4);
        let (a, v) = thresholds(p(0.0108), p(0.105)).unwrap();
        assert!((a.get() - 0.0422).abs() < 3e-4 && (v.get() - 0.0736).abs() < 3e-4);
        assert!(matches!(
            thresholds(p(0.1), p(0.1)),
            Err(Error::Insecure(_))
        ));
    }

    #[test]
    fn signature_lengths() {
        let budget = FailureBudget::new(0.5e-10).unwrap();
        let l = signature_length(p(0.0152), p(0.0219), budget).unwrap() as f64;
        assert!((l / 2.11e6 - 1.0).abs() < 0.02, "{l}");
        let l = signature_length(p(0.0422), p(0.0736), budget).unwrap();
        assert!((l as f64 - 96_200.0).abs() < 200.0, "{l}");
        let one = FailureBudget::new(1.0).unwrap();
        assert_eq!(signature_length(p(0.01), p(0.02), one).unwrap(), 0);
        assert!(signature_length(p(0.02), p(0.02), budget).is_err());
    }

    #[test]
    fn gap_zero_probability_one() {
        let af = abort_and_forge(p(0.01), p(0.01), p(0.02), p(0.02), 1000).unwrap();
        assert_eq!(af.p_hab.get(), 1.0);
        assert_eq!(af.p_for.get(), 1.0);
    }

    #[test]
    fn doubling_length_squares() {
        let a = abort_and_forge(p(0.0), p(0.01), p(0.02), p(0.03), 1000).unwrap();
        let b = abort_and_forge(p(0.0), p(0.01), p(0.02), p(0.03), 2000).unwrap();
        assert!((b.ln_p_hab - 2.0 * a.ln_p_hab).abs() < 1e-12);
        assert!((b.p_hab.get() - a.p_hab.get().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn timing() {
        let t = timing_report(90_000.0, 500.0 / 502.0, 1974).unwrap();
        assert!((t - 45.41).abs() < 0.01);
        assert_eq!(timing_report(12.0, 1.0, 1).unwrap(), 12.0);
        assert!(timing_report(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn published_mdi_block_is_secure() {
        let inputs = QdsInputs {
            s1_sig_lower: 666_345.0,
            eph_sig_upper: p(0.053),
            e_test: p(0.005),
            pool_len: 4_936_714_426,
            total_time_s: 90_000.0,
            duty_fraction: 500.0 / 502.0,
        };
        let outcome = distil(&inputs, &QdsParams::mdi_default()).unwrap();
        let r = outcome.report().expect("secure");
        assert!(r.ordering_holds(), "{r:?}");
        assert_eq!(r.n_signatures, 1974);
        assert!(r.ln_p_hab < -150.0 && r.ln_p_for < -150.0);
    }

    #[test]
    fn hopeless_block_is_insecure() {
        let inputs = QdsInputs {
            s1_sig_lower: 10_000.0,
            eph_sig_upper: p(0.2),
            e_test: p(0.05),
            pool_len: 10_000_000,
            total_time_s: 1.0,
            duty_fraction: 1.0,
        };
        assert!(!distil(&inputs, &QdsParams::mdi_default())
            .unwrap()
            .is_secure());
    }
}
