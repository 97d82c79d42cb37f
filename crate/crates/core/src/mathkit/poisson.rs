use statrs::function::factorial::ln_factorial;

use super::Probability;
use crate::error::{domain, Result};

/// `ln(e^-μ μⁿ / n!)`; `-inf` for impossible outcomes.
pub fn ln_poisson_pmf(mu: f64, n: u64) -> Result<f64> {
    if mu.is_nan() || mu < 0.0 {
        return Err(domain(format!("mean photon number {mu} is negative")));
    }
    if mu == 0.0 {
        return Ok(if n == 0 { 0.0 } else { f64::NEG_INFINITY });
    }
    Ok(-mu + n as f64 * mu.ln() - ln_factorial(n))
}

/// Poisson photon-number probability of a phase-randomised coherent pulse.
pub fn poisson_pmf(mu: f64, n: u64) -> Result<Probability> {
    Ok(Probability::saturating(ln_poisson_pmf(mu, n)?.exp()))
}

/// Probability mass strictly above `n_cut`.
pub fn poisson_tail(mu: f64, n_cut: u64) -> Result<f64> {
    // 1 - head loses all precision once the tail is below ~1e-16, so sum the
    // tail terms directly.
    let mut tail = 0.0;
    let mut n = n_cut + 1;
    loop {
        let term = poisson_pmf(mu, n)?.get();
        tail += term;
        if n as f64 > mu && (term < 1e-300 || term < tail * 1e-17) {
            break;
        }
        n += 1;
    }
    Ok(tail.clamp(0.0, 1.0))
}
