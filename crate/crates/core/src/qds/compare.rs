//! Signatures per acquisition: many blocks from one estimation versus one
//! block per acquisition.

use serde::{Deserialize, Serialize};

use crate::channel::IntensitySet;
use crate::counts::{CountTable, Mode};
use crate::decoy::estimate_bounds;
use crate::error::{domain, Result};
use crate::mathkit::Probability;
use crate::qds::distil::{block_inputs, distil, QdsOutcome, QdsParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolYield {
    pub pool_len: u64,
    pub c_test: u64,
    /// Smallest block size that passes every security check, if any.
    pub c_sig: Option<u64>,
    pub n_signatures: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub multi_block: PoolYield,
    /// Acquisitions the baseline splits the data into, one signature each.
    pub baseline_acquisitions: u64,
    pub baseline_signatures: u64,
    /// `multi / baseline`; infinite when the baseline yields nothing.
    pub ratio: f64,
}

/// Pool length, test-set size and a check of whether a block size is secure.
type SecureAt<F> = Option<(u64, u64, F)>;

fn secure_at(
    table: &CountTable,
    intensities: &IntensitySet,
    template: &QdsParams,
    test_fraction: f64,
    mode: Mode,
) -> Result<SecureAt<impl Fn(u64) -> Result<bool>>> {
    let signal = *table.signal()?;
    let pool_len = signal.detected;
    let c_test = (test_fraction * pool_len as f64).floor() as u64;
    if c_test == 0 || pool_len <= c_test {
        return Ok(None);
    }
    // The pool estimate takes half of the decoy share, the block restriction
    // the other half.
    let bounds = estimate_bounds(table, intensities, template.eps_decoy.split(2), mode)?;
    let e_test = Probability::saturating(signal.qber());
    let template = *template;
    let check = move |c_sig: u64| -> Result<bool> {
        let params = QdsParams {
            c_sig,
            c_test,
            ..template
        };
        let inputs = block_inputs(&bounds, e_test, pool_len, &params, 1.0, 1.0)?;
        Ok(matches!(distil(&inputs, &params)?, QdsOutcome::Secure(_)))
    };
    Ok(Some((pool_len, c_test, check)))
}

/// Smallest secure block size and resulting signature count for one pool.
pub fn pool_yield(
    table: &CountTable,
    intensities: &IntensitySet,
    template: &QdsParams,
    test_fraction: f64,
    mode: Mode,
) -> Result<PoolYield> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(domain(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let pool_len = table.signal()?.detected;
    let Some((pool_len, c_test, check)) =
        secure_at(table, intensities, template, test_fraction, mode)?
    else {
        return Ok(PoolYield {
            pool_len,
            c_test: 0,
            c_sig: None,
            n_signatures: 0,
        });
    };
    let max = pool_len - c_test;
    if !check(max)? {
        return Ok(PoolYield {
            pool_len,
            c_test,
            c_sig: None,
            n_signatures: 0,
        });
    }
    // Security is monotone in the block size over the range of interest:
    // bisect for the smallest secure size.
    let (mut lo, mut hi) = (0u64, max);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if check(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(PoolYield {
        pool_len,
        c_test,
        c_sig: Some(hi),
        n_signatures: max / hi,
    })
}

/// Signature parameters straight from a link's count table. The Z-basis
/// signal detections form the pool, a `test_fraction` share of it is
/// disclosed, and the block size is `c_sig` or else the smallest secure one.
pub fn distil_table(
    table: &CountTable,
    intensities: &IntensitySet,
    budgets: &QdsParams,
    test_fraction: f64,
    c_sig: Option<u64>,
    total_time_s: f64,
    duty_fraction: f64,
) -> Result<QdsOutcome> {
    let insecure = |reason: String| Ok(QdsOutcome::Insecure { reason });
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(domain(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mode = table.link.mode();
    let signal = match table.signal() {
        Ok(s) if s.detected > 0 => *s,
        _ => return insecure("no signal detections".into()),
    };
    let pool_len = signal.detected;
    let c_test = (test_fraction * pool_len as f64).floor() as u64;
    let c_sig = match c_sig {
        Some(c) => c,
        None => match pool_yield(table, intensities, budgets, test_fraction, mode) {
            Ok(PoolYield { c_sig: Some(c), .. }) => c,
            Ok(_) => return insecure("no block size gives a secure signature".into()),
            Err(e) => return insecure(e.to_string()),
        },
    };
    if c_test == 0 || c_sig == 0 || c_sig + c_test > pool_len {
        return insecure(format!(
            "pool of {pool_len} bits cannot hold a {c_test}-bit test set and a {c_sig}-bit block"
        ));
    }
    let params = QdsParams {
        c_sig,
        c_test,
        ..*budgets
    };
    let bounds = match estimate_bounds(table, intensities, params.eps_decoy.split(2), mode) {
        Ok(b) => b,
        Err(e) => return insecure(e.to_string()),
    };
    let e_test = Probability::saturating(signal.qber());
    let inputs = block_inputs(
        &bounds,
        e_test,
        pool_len,
        &params,
        total_time_s,
        duty_fraction,
    )?;
    distil(&inputs, &params)
}

/// Multi-block signatures versus the best equal split of the same data into
/// acquisitions that each yield a single signature. Both sides use the
/// per-signature budgets of `template`.
pub fn compare_protocols(
    table: &CountTable,
    intensities: &IntensitySet,
    template: &QdsParams,
    test_fraction: f64,
    mode: Mode,
) -> Result<Comparison> {
    let multi = pool_yield(table, intensities, template, test_fraction, mode)?;
    let secure_split = |k: u64| -> Result<bool> {
        let part = table.divided(k);
        if part.signal()?.detected == 0 {
            return Ok(false);
        }
        Ok(pool_yield(&part, intensities, template, test_fraction, mode)?.n_signatures >= 1)
    };
    let baseline = if multi.n_signatures == 0 {
        0
    } else {
        // Largest k such that a 1/k share still signs; grow then bisect.
        let mut lo = 1u64;
        let mut hi = 2u64;
        while secure_split(hi)? {
            lo = hi;
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if secure_split(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let ratio = if baseline == 0 {
        f64::INFINITY
    } else {
        multi.n_signatures as f64 / baseline as f64
    };
    Ok(Comparison {
        multi_block: multi,
        baseline_acquisitions: baseline,
        baseline_signatures: baseline,
        ratio,
    })
}
