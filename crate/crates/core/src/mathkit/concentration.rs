//! Tail bounds for sampling with and without replacement.

use super::{FailureBudget, Probability};
use crate::error::{domain, Result};

/// Additive deviation between the error rate observed on a random test
/// sample of `c_test` bits and the rate on the `c_sig` unobserved bits drawn
/// from the same population:
///
/// `sqrt( (c_sig+1)(c_sig+c_test) ln(1/eps) / (2 c_test c_sig²) )`
pub fn serfling_deviation(c_sig: u64, c_test: u64, eps: FailureBudget) -> Result<f64> {
    if c_sig == 0 || c_test == 0 {
        return Err(domain(format!(
            "serfling deviation needs non-empty samples (c_sig={c_sig}, c_test={c_test})"
        )));
    }
    let (s, t) = (c_sig as f64, c_test as f64);
    let ln_inv = (1.0 / eps.get()).ln();
    Ok(((s + 1.0) * (s + t) * ln_inv / (2.0 * t * s * s)).sqrt())
}

/// One-sided deviation of the mean of `n` draws without replacement from a
/// population of `population` values in `[0, 1]`, at failure probability
/// `eps`. Zero when the sample is the whole population.
pub fn serfling_sample_deviation(n: u64, population: u64, eps: FailureBudget) -> Result<f64> {
    if n == 0 || n > population {
        return Err(domain(format!(
            "sample size {n} must lie in 1..={population}"
        )));
    }
    if n == population {
        return Ok(0.0);
    }
    let (n, pop) = (n as f64, population as f64);
    let fpc = 1.0 - (n - 1.0) / pop;
    Ok(((1.0 / eps.get()).ln() * fpc / (2.0 * n)).sqrt())
}

/// Natural log of the Hoeffding tail `exp(-2 δ² n)`.
pub fn hoeffding_log_bound(delta: f64, n: u64) -> Result<f64> {
    if delta.is_nan() || delta < 0.0 {
        return Err(domain(format!("negative deviation {delta}")));
    }
    Ok(-2.0 * delta * delta * n as f64)
}

/// `exp(-2 δ² n)` clamped to `[0, 1]`. Values below the f64 range underflow
/// to zero; use [`hoeffding_log_bound`] to keep the magnitude.
pub fn hoeffding_exponent_bound(delta: f64, n: u64) -> Result<Probability> {
    Ok(Probability::saturating(
        hoeffding_log_bound(delta, n)?.exp(),
    ))
}

/// Relative entropy `D(a ‖ b)` between Bernoulli distributions, in nats.
pub fn bernoulli_kl(a: f64, b: f64) -> f64 {
    // 0·ln(0/y) = 0; x·ln(x/0) = ∞.
    let term = |x: f64, y: f64, ln_ratio: f64| {
        if x == 0.0 {
            0.0
        } else if y == 0.0 {
            f64::INFINITY
        } else {
            x * ln_ratio
        }
    };
    term(a, b, (a / b).ln()) + term(1.0 - a, 1.0 - b, (-a).ln_1p() - (-b).ln_1p())
}

/// Two-sided confidence interval for a binomial rate from `k` successes in
/// `n` trials: every `p` with `n·D(k/n ‖ p) ≤ ln(2/eps)`.
///
/// Each side follows from Hoeffding's tail in its relative-entropy form,
/// `P(p̂ ≥ p + t) ≤ exp(-n·D(p + t ‖ p))`, at failure `eps/2`. The familiar
/// `sqrt(ln(2/eps) / 2n)` interval is its quadratic relaxation, so this one
/// is never wider, and it shrinks like `sqrt(p/n)` for small rates.
pub fn hoeffding_kl_interval(k: u64, n: u64, eps: f64) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(domain(format!("{k} successes in {n} trials")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("interval budget {eps} must be positive")));
    }
    let p = k as f64 / n as f64;
    let level = (2.0 / eps).ln() / n as f64;
    if level <= 0.0 {
        return Ok((p, p));
    }
    let outside = |q: f64| bernoulli_kl(p, q) > level;
    let lower = if k == 0 {
        0.0
    } else {
        // D(p ‖ q) falls as q rises towards p.
        let (mut lo, mut hi) = (0.0, p);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if outside(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let upper = if k == n {
        1.0
    } else {
        let (mut lo, mut hi) = (p, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if outside(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok((lower, upper))
}
