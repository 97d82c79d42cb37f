use super::Probability;
use crate::error::{domain, Result};

/// Binary Shannon entropy in bits, with `0·log 0 = 0`.
pub fn binary_entropy(p: Probability) -> f64 {
    let p = p.get();
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Unique `p ∈ [0, 1/2]` with `binary_entropy(p) = y`.
///
/// Fixed-length bisection on the monotone branch, so the result is
/// bit-reproducible and accurate far beyond 1e-9.
pub fn inv_binary_entropy(y: f64) -> Result<Probability> {
    if !(0.0..=1.0).contains(&y) {
        return Err(domain(format!("entropy value {y} outside [0, 1]")));
    }
    if y == 0.0 {
        return Ok(Probability::ZERO);
    }
    if y == 1.0 {
        return Ok(Probability::HALF);
    }
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if binary_entropy(Probability::saturating(mid)) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Probability::saturating(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn h(p: f64) -> f64 {
        binary_entropy(Probability::new(p).unwrap())
    }

    #[test]
    fn endpoints() {
        assert_eq!(h(0.5), 1.0);
        assert_eq!(h(0.0), 0.0);
        assert_eq!(h(1.0), 0.0);
    }

    #[test]
    fn phase_error_value() {
        // -0.053·log2(0.053) - 0.947·log2(0.947)
        assert!((h(0.053) - 0.2990).abs() < 1e-4);
    }

    #[test]
    fn inverse_endpoints() {
        assert_eq!(inv_binary_entropy(1.0).unwrap().get(), 0.5);
        assert_eq!(inv_binary_entropy(0.0).unwrap().get(), 0.0);
        assert!(inv_binary_entropy(1.01).is_err());
        assert!(inv_binary_entropy(-0.01).is_err());
    }

    #[test]
    fn inverse_eve_floor_value() {
        let p = inv_binary_entropy(0.18685).unwrap().get();
        assert!((p - 0.0286).abs() < 5e-4, "{p}");
    }

    proptest! {
        #[test]
        fn symmetric(p in 0.0f64..=1.0) {
            prop_assert!((h(p) - h(1.0 - p)).abs() < 1e-12);
        }

        #[test]
        fn round_trip(y in 0.0f64..=1.0) {
            let p = inv_binary_entropy(y).unwrap().get();
            prop_assert!((0.0..=0.5).contains(&p));
            prop_assert!((h(p) - y).abs() < 1e-8);
        }
    }
}
