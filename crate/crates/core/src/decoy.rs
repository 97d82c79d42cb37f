//! Decoy-state bounds on single-photon detections and phase errors.
//!
//! Every X-basis gain and error gain is widened to a two-sided confidence
//! interval from Hoeffding's inequality in its relative-entropy form, then
//! two linear programs bracket the photon-number resolved yields: one
//! minimises the single-photon yield, the other maximises the
//! single-photon error yield. The X-basis phase-error bound is carried over
//! to the Z-basis signal detections with a sampling-without-replacement
//! correction.

use serde::{Deserialize, Serialize};

use crate::channel::IntensitySet;
use crate::counts::{Basis, CountRecord, CountTable, Intensity, Label, Mode};
use crate::error::{domain, Error, Result};
use crate::mathkit::concentration::serfling_sample_deviation;
use crate::mathkit::{
    hoeffding_kl_interval, poisson_pmf, poisson_tail, serfling_deviation, Constraint,
    FailureBudget, LinearProgram, LpError, Probability, Relation, Sense,
};

/// Photon-number cutoff of the decoy linear programs.
pub const LP_N_CUT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    /// Lower bound on single-photon (pair) detections in the Z-basis signal.
    pub s1_lower: f64,
    /// Upper bound on their phase-error rate.
    pub eph_upper: Probability,
    pub y1_lower: Probability,
    /// Single-photon error-rate bound in X, before the transfer to Z.
    pub e1_x_upper: Probability,
    pub epsilon_spent: FailureBudget,
    pub mode: Mode,
    /// Z-basis signal detections the bounds refer to.
    pub z_detected: u64,
}

/// Two-sided Hoeffding interval `p̂ ∓ sqrt(ln(2/eps) / 2n)` for the
/// detection probability of `record`.
///
/// `eps` is a plain positive number so that degenerate budgets (`eps ≥ 2`)
/// collapse the interval to the point estimate.
///
/// [`estimate_bounds`] uses the relative-entropy form instead, which is
/// never wider and stays useful for gains far below `1/sqrt(n)`.
pub fn widen_counts(record: &CountRecord, eps: f64) -> Result<(Probability, Probability)> {
    widen_rate(record.detected, record.sent, eps)
}

/// Same interval for an arbitrary `successes / trials` frequency.
pub fn widen_rate(successes: u64, trials: u64, eps: f64) -> Result<(Probability, Probability)> {
    if trials == 0 {
        return Err(domain("cannot widen a rate over zero trials"));
    }
    if successes > trials {
        return Err(domain(format!("{successes} successes in {trials} trials")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("widening budget {eps} must be positive")));
    }
    let p = successes as f64 / trials as f64;
    let half = ((2.0 / eps).ln().max(0.0) / (2.0 * trials as f64)).sqrt();
    Ok((
        Probability::saturating(p - half),
        Probability::saturating(p + half),
    ))
}

/// One photon-number variable of the linear programs: `n` (QKD) or `(n, m)`.
type Var = (usize, usize);

fn lp_variables(mode: Mode) -> Vec<Var> {
    match mode {
        Mode::Qkd => (0..=LP_N_CUT).map(|n| (n, 0)).collect(),
        Mode::Mdi => (0..=LP_N_CUT)
            .flat_map(|n| (0..=LP_N_CUT - n).map(move |m| (n, m)))
            .collect(),
    }
}

fn is_vacuum(mode: Mode, v: Var) -> bool {
    match mode {
        Mode::Qkd => v.0 == 0,
        Mode::Mdi => v.0 == 0 || v.1 == 0,
    }
}

fn single_var(mode: Mode) -> Var {
    match mode {
        Mode::Qkd => (1, 0),
        Mode::Mdi => (1, 1),
    }
}

/// A widened X-basis observation: photon-number weights plus intervals on
/// the gain and the error gain.
struct Observation {
    weights: Vec<f64>,
    tail: f64,
    gain: (f64, f64),
    error_gain: (f64, f64),
    sent: u64,
    single_weight: f64,
}

fn weights(mode: Mode, vars: &[Var], mu: f64, nu: f64) -> Result<(Vec<f64>, f64)> {
    let pa: Vec<f64> = (0..=LP_N_CUT)
        .map(|n| poisson_pmf(mu, n as u64).map(Probability::get))
        .collect::<Result<_>>()?;
    match mode {
        Mode::Qkd => Ok((
            vars.iter().map(|&(n, _)| pa[n]).collect(),
            poisson_tail(mu, LP_N_CUT as u64)?,
        )),
        Mode::Mdi => {
            let pb: Vec<f64> = (0..=LP_N_CUT)
                .map(|m| poisson_pmf(nu, m as u64).map(Probability::get))
                .collect::<Result<_>>()?;
            // n + m of two independent Poisson variables is Poisson(mu + nu).
            Ok((
                vars.iter().map(|&(n, m)| pa[n] * pb[m]).collect(),
                poisson_tail(mu + nu, LP_N_CUT as u64)?,
            ))
        }
    }
}

fn x_entries(mode: Mode) -> Vec<Intensity> {
    match mode {
        Mode::Qkd => Label::DECOYS
            .iter()
            .map(|&l| Intensity::Single(l))
            .collect(),
        Mode::Mdi => Label::DECOYS
            .iter()
            .flat_map(|&a| Label::DECOYS.iter().map(move |&b| Intensity::Pair(a, b)))
            .collect(),
    }
}

/// Number of budget pieces `estimate_bounds` spends for `mode`.
pub fn budget_pieces(mode: Mode) -> usize {
    2 * x_entries(mode).len() + 1
}

fn push_interval(
    constraints: &mut Vec<Constraint>,
    coeffs: Vec<f64>,
    lower: f64,
    upper: f64,
    scale: f64,
) {
    if lower > 0.0 {
        constraints.push(Constraint::new(coeffs.clone(), Relation::Ge, lower / scale));
    }
    constraints.push(Constraint::new(coeffs, Relation::Le, upper / scale));
}

fn inconsistent(e: LpError) -> Error {
    match e {
        LpError::Infeasible => {
            Error::InconsistentCounts("no non-negative yields reproduce the widened gains".into())
        }
        other => Error::Lp(other),
    }
}

/// Decoy-state bounds from a count table.
///
/// The budget `eps_total` is split evenly over every widened X-basis
/// quantity plus the X→Z sampling correction; `epsilon_spent` reports the
/// total.
pub fn estimate_bounds(
    table: &CountTable,
    intensities: &IntensitySet,
    eps_total: FailureBudget,
    mode: Mode,
) -> Result<DecoyBounds> {
    if table.link.mode() != mode {
        return Err(domain(format!(
            "table for link {} cannot be analysed in {mode} mode",
            table.link
        )));
    }
    intensities.validate()?;
    let entries = x_entries(mode);
    let signal = *table.signal()?;
    let piece = eps_total.split(budget_pieces(mode));

    let vars = lp_variables(mode);
    let mut observations = Vec::with_capacity(entries.len());
    for intensity in &entries {
        let rec = table.require(*intensity, Basis::X)?;
        let (mu, nu) = intensities.means(*intensity);
        let (w, tail) = weights(mode, &vars, mu, nu.unwrap_or(0.0))?;
        let single_weight = w[vars.iter().position(|&v| v == single_var(mode)).unwrap()];
        if rec.sent == 0 {
            return Err(domain(format!("no pulses sent for ({intensity}, X)")));
        }
        let (gl, gu) = hoeffding_kl_interval(rec.detected, rec.sent, piece.get())?;
        let (el, eu) = hoeffding_kl_interval(rec.errors, rec.sent, piece.get())?;
        observations.push(Observation {
            weights: w,
            tail,
            gain: (gl, gu),
            error_gain: (el, eu),
            sent: rec.sent,
            single_weight,
        });
    }

    // Work in units of the largest observed gain, and measure every yield
    // variable in units of its largest mixture weight, so that the simplex
    // sees rows and columns of order one even for high photon numbers.
    let scale = observations
        .iter()
        .map(|o| o.gain.1)
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let k = vars.len();
    let y1 = vars.iter().position(|&v| v == single_var(mode)).unwrap();
    let col: Vec<f64> = (0..k)
        .map(|j| {
            let m = observations
                .iter()
                .map(|o| o.weights[j])
                .fold(0.0f64, f64::max);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        })
        .collect();
    let scaled = |w: &[f64]| -> Vec<f64> { w.iter().zip(&col).map(|(a, c)| a / c).collect() };
    let var_bounds: Vec<(f64, f64)> = col.iter().map(|c| (0.0, c / scale)).collect();

    let mut y_constraints = Vec::new();
    for o in &observations {
        push_interval(
            &mut y_constraints,
            scaled(&o.weights),
            o.gain.0 - o.tail,
            o.gain.1,
            scale,
        );
    }
    let mut objective = vec![0.0; k];
    objective[y1] = 1.0;
    let y_lp = LinearProgram {
        objective,
        sense: Sense::Minimize,
        constraints: y_constraints.clone(),
        bounds: var_bounds.clone(),
    };
    let y1_lower =
        (y_lp.optimum().map_err(inconsistent)?.optimum * scale / col[y1]).clamp(0.0, 1.0);

    // Joint program over yields Y and error yields T = eY, with T ≤ Y and
    // vacuum contributions erring at exactly one half. Both halves share
    // the column units, so the coupling rows keep unit coefficients.
    let widen = |c: &Constraint| {
        let mut coeffs = c.coeffs.clone();
        coeffs.extend(std::iter::repeat_n(0.0, k));
        Constraint::new(coeffs, c.relation, c.rhs)
    };
    let mut constraints: Vec<Constraint> = y_constraints.iter().map(widen).collect();
    for o in &observations {
        let mut coeffs = vec![0.0; k];
        coeffs.extend(scaled(&o.weights));
        push_interval(
            &mut constraints,
            coeffs,
            o.error_gain.0 - o.tail,
            o.error_gain.1,
            scale,
        );
    }
    for (j, &v) in vars.iter().enumerate() {
        let mut coeffs = vec![0.0; 2 * k];
        coeffs[k + j] = 1.0;
        if is_vacuum(mode, v) {
            coeffs[j] = -0.5;
            constraints.push(Constraint::new(coeffs, Relation::Eq, 0.0));
        } else {
            coeffs[j] = -1.0;
            constraints.push(Constraint::new(coeffs, Relation::Le, 0.0));
        }
    }
    let mut objective = vec![0.0; 2 * k];
    objective[k + y1] = 1.0;
    let t_lp = LinearProgram {
        objective,
        sense: Sense::Maximize,
        constraints,
        bounds: var_bounds.iter().chain(&var_bounds).copied().collect(),
    };
    let t1_upper = (t_lp.optimum().map_err(inconsistent)?.optimum * scale / col[y1]).max(0.0);
    let e1_x = if y1_lower > 0.0 {
        (t1_upper / y1_lower).min(0.5)
    } else {
        0.5
    };

    let z_weight = {
        let (mu, nu) = intensities.means(table.signal_key());
        let p1 = poisson_pmf(mu, 1)?.get();
        match nu {
            Some(nu) => p1 * poisson_pmf(nu, 1)?.get(),
            None => p1,
        }
    };
    let s1_lower = (signal.sent as f64 * z_weight * y1_lower).min(signal.detected as f64);
    let s1_x: f64 = observations
        .iter()
        .map(|o| o.sent as f64 * o.single_weight * y1_lower)
        .sum();

    let eph = if s1_lower >= 1.0 && s1_x >= 1.0 && e1_x < 0.5 {
        let dev = serfling_deviation(s1_lower.floor() as u64, s1_x.floor() as u64, piece)?;
        (e1_x + dev).min(0.5)
    } else {
        0.5
    };

    Ok(DecoyBounds {
        s1_lower,
        eph_upper: Probability::saturating(eph),
        y1_lower: Probability::saturating(y1_lower),
        e1_x_upper: Probability::saturating(e1_x),
        epsilon_spent: eps_total,
        mode,
        z_detected: signal.detected,
    })
}

/// Bounds for a random block of `block_size` bits drawn without replacement
/// from a pool of `z_total` Z-basis detections.
///
/// Two sampling deviations are taken at `eps` each (the single-photon share
/// of the block and the phase-error rate inside it), so `2·eps` is added to
/// the spent budget.
pub fn restrict_to_block(
    bounds: &DecoyBounds,
    block_size: u64,
    z_total: u64,
    eps: FailureBudget,
) -> Result<DecoyBounds> {
    if block_size == 0 || block_size > z_total {
        return Err(domain(format!(
            "block of {block_size} bits does not fit a pool of {z_total}"
        )));
    }
    if bounds.s1_lower > z_total as f64 {
        return Err(domain("single-photon bound exceeds the pool"));
    }
    let share = bounds.s1_lower / z_total as f64;
    let t = serfling_sample_deviation(block_size, z_total, eps)?;
    let s1_block = (block_size as f64 * (share - t)).max(0.0);
    let (s1_block, eph) = if s1_block >= 1.0 {
        let pool = (bounds.s1_lower.floor() as u64).max(1);
        let n = (s1_block.floor() as u64).min(pool);
        let dev = serfling_sample_deviation(n, pool, eps)?;
        (s1_block, (bounds.eph_upper.get() + dev).min(0.5))
    } else {
        (0.0, 0.5)
    };
    Ok(DecoyBounds {
        s1_lower: s1_block,
        eph_upper: Probability::saturating(eph),
        epsilon_spent: FailureBudget::new((bounds.epsilon_spent.get() + 2.0 * eps.get()).min(1.0))?,
        z_detected: block_size,
        ..*bounds
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{
        expected_table, qkd_yield_model, synthesize_table, ChannelParams, Synthesis,
    };
    use crate::counts::Link;

    fn eps(e: f64) -> FailureBudget {
        FailureBudget::new(e).unwrap()
    }

    #[test]
    fn hoeffding_interval() {
        let rec = CountRecord::new(1_000_000, 10_000, 0).unwrap();
        let (lo, hi) = widen_counts(&rec, 1e-10).unwrap();
        let half = ((2e10f64).ln() / 2e6).sqrt();
        assert!((lo.get() - (0.01 - half)).abs() < 1e-15);
        assert!((hi.get() - (0.01 + half)).abs() < 1e-15);
        assert!((half - 0.003444).abs() < 1e-6);
    }

    #[test]
    fn degenerate_budget_collapses() {
        let rec = CountRecord::new(100, 7, 0).unwrap();
        let (lo, hi) = widen_counts(&rec, 2.0).unwrap();
        assert_eq!((lo.get(), hi.get()), (0.07, 0.07));
    }

    #[test]
    fn zero_detections_clamp() {
        let rec = CountRecord::new(100, 0, 0).unwrap();
        assert_eq!(widen_counts(&rec, 0.1).unwrap().0.get(), 0.0);
        assert!(widen_counts(&CountRecord::default(), 0.1).is_err());
    }

    fn defaults() -> IntensitySet {
        IntensitySet::default()
    }

    #[test]
    fn noiseless_qkd_bracket() {
        let params = ChannelParams {
            distance_km: 25.0,
            ..ChannelParams::default()
        };
        let model = qkd_yield_model(&params).unwrap();
        // An astronomically large table makes the widening negligible.
        let syn = Synthesis {
            pulses: 1_000_000_000_000_000,
            sifting: 1.0,
        };
        let table = expected_table(&model, &defaults(), Link::AC, syn).unwrap();
        let b = estimate_bounds(&table, &defaults(), eps(1e-10), Mode::Qkd).unwrap();
        let truth = model.single_photon_yield();
        assert!(b.y1_lower.get() <= truth * (1.0 + 1e-9));
        assert!(
            b.y1_lower.get() > 0.98 * truth,
            "{} vs {truth}",
            b.y1_lower.get()
        );
        assert!(b.e1_x_upper.get() >= model.single_photon_error(Basis::X) * (1.0 - 1e-6));
        assert!(b.s1_lower <= b.z_detected as f64);
    }

    #[test]
    fn all_dark_decoys_give_zero() {
        let mut t = CountTable::new(Link::AC);
        t.record(
            Intensity::Single(Label::S),
            Basis::Z,
            CountRecord::new(1000, 10, 1).unwrap(),
        )
        .unwrap();
        for l in Label::DECOYS {
            t.record(
                Intensity::Single(l),
                Basis::X,
                CountRecord::new(1000, 0, 0).unwrap(),
            )
            .unwrap();
        }
        let b = estimate_bounds(&t, &defaults(), eps(1e-10), Mode::Qkd).unwrap();
        assert_eq!(b.y1_lower.get(), 0.0);
        assert_eq!(b.s1_lower, 0.0);
        assert_eq!(b.eph_upper.get(), 0.5);
    }

    #[test]
    fn missing_entry_is_reported() {
        let mut t = CountTable::new(Link::AC);
        t.record(
            Intensity::Single(Label::S),
            Basis::Z,
            CountRecord::new(10, 1, 0).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            estimate_bounds(&t, &defaults(), eps(1e-10), Mode::Qkd),
            Err(Error::MissingEntry(_))
        ));
    }

    #[test]
    fn impossible_counts_are_inconsistent() {
        // The vacuum decoy clicks far more often than the brighter ones.
        let mut t = CountTable::new(Link::AC);
        let big = 1_000_000_000;
        t.record(
            Intensity::Single(Label::S),
            Basis::Z,
            CountRecord::new(big, 1000, 0).unwrap(),
        )
        .unwrap();
        t.record(
            Intensity::Single(Label::U),
            Basis::X,
            CountRecord::new(big, 0, 0).unwrap(),
        )
        .unwrap();
        t.record(
            Intensity::Single(Label::V),
            Basis::X,
            CountRecord::new(big, 0, 0).unwrap(),
        )
        .unwrap();
        t.record(
            Intensity::Single(Label::W),
            Basis::X,
            CountRecord::new(big, big / 2, 0).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            estimate_bounds(&t, &defaults(), eps(1e-10), Mode::Qkd),
            Err(Error::InconsistentCounts(_))
        ));
    }

    #[test]
    fn deterministic() {
        let model = qkd_yield_model(&ChannelParams::default().at_distance(10.0)).unwrap();
        let syn = Synthesis {
            pulses: 100_000_000,
            sifting: 0.5,
        };
        let t = synthesize_table(&model, &defaults(), Link::BC, syn, 5).unwrap();
        let a = estimate_bounds(&t, &defaults(), eps(1e-10), Mode::Qkd).unwrap();
        let b = estimate_bounds(&t, &defaults(), eps(1e-10), Mode::Qkd).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.epsilon_spent.get(), 1e-10);
    }

    fn sample_bounds() -> DecoyBounds {
        DecoyBounds {
            s1_lower: 500_000.0,
            eph_upper: Probability::new(0.05).unwrap(),
            y1_lower: Probability::new(0.01).unwrap(),
            e1_x_upper: Probability::new(0.04).unwrap(),
            epsilon_spent: eps(1e-11),
            mode: Mode::Mdi,
            z_detected: 2_000_000,
        }
    }

    #[test]
    fn whole_pool_block_is_unchanged() {
        let b = sample_bounds();
        let r = restrict_to_block(&b, 2_000_000, 2_000_000, eps(1e-11)).unwrap();
        assert_eq!(r.s1_lower, b.s1_lower);
        assert_eq!(r.eph_upper, b.eph_upper);
    }

    #[test]
    fn unit_budget_is_proportional() {
        let b = sample_bounds();
        let r = restrict_to_block(&b, 200_000, 2_000_000, eps(1.0)).unwrap();
        assert!((r.s1_lower - 50_000.0).abs() < 1e-6);
        assert_eq!(r.eph_upper, b.eph_upper);
    }

    #[test]
    fn oversized_block_rejected() {
        assert!(restrict_to_block(&sample_bounds(), 3_000_000, 2_000_000, eps(1e-11)).is_err());
    }
}
