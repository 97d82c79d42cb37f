//! Decoy-state bounds against the ground truth of the model that generated
//! the counts.

use mdiqds::channel::{
    expected_table, mdi_yield_model_with, qkd_yield_model, synthesize_table, ChannelParams,
    IntensitySet, MdiOptions, Synthesis, YieldModel, DEFAULT_N_CUT,
};
use mdiqds::counts::{Basis, CountTable, Link, Mode};
use mdiqds::decoy::{estimate_bounds, DecoyBounds};
use mdiqds::mathkit::{FailureBudget, Probability};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A randomly drawn small instance: link model, intensities and pulse count.
struct Instance {
    model: YieldModel,
    intensities: IntensitySet,
    link: Link,
    pulses: u64,
}

fn instance(mode: Mode, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arm = ChannelParams {
        distance_km: rng.random_range(0.0..40.0),
        dark_count_prob: Probability::new(10f64.powf(rng.random_range(-7.0..-5.0))).unwrap(),
        misalignment: Probability::new(rng.random_range(0.0..0.03)).unwrap(),
        detector_efficiency: Probability::new(rng.random_range(0.1..0.9)).unwrap(),
        ..ChannelParams::default()
    };
    let s = rng.random_range(0.4..0.8);
    let u = rng.random_range(0.15..0.35);
    let intensities = IntensitySet {
        s,
        u,
        v: rng.random_range(0.01..0.1),
        w: 0.0,
        z_basis_prob: rng.random_range(0.5..0.9),
    };
    let (model, link) = match mode {
        Mode::Qkd => (qkd_yield_model(&arm).unwrap(), Link::AC),
        Mode::Mdi => (
            mdi_yield_model_with(&arm, &arm, &MdiOptions::default(), DEFAULT_N_CUT).unwrap(),
            Link::AB,
        ),
    };
    let pulses = 10f64.powf(rng.random_range(8.0..10.0)) as u64;
    Instance {
        model,
        intensities,
        link,
        pulses,
    }
}

fn table(inst: &Instance, seed: u64) -> CountTable {
    let synthesis = Synthesis {
        pulses: inst.pulses,
        sifting: 1.0,
    };
    synthesize_table(&inst.model, &inst.intensities, inst.link, synthesis, seed).unwrap()
}

/// Whether the bounds bracket the truth. An estimate that finds the
/// widened counts inconsistent also counts as a miss.
fn brackets(inst: &Instance, bounds: Option<DecoyBounds>) -> bool {
    let Some(b) = bounds else {
        return false;
    };
    let y1 = inst.model.single_photon_yield();
    let e1 = inst.model.single_photon_error(Basis::X);
    b.y1_lower.get() <= y1 && b.e1_x_upper.get() >= e1 && b.eph_upper.get() >= e1
}

/// Misses over `trials` synthesized tables, at total budget `eps`.
fn misses(mode: Mode, trials: u64, eps: f64, seed: u64) -> u64 {
    let eps = FailureBudget::new(eps).unwrap();
    (0..trials)
        .filter(|&i| {
            let inst = instance(mode, seed.wrapping_add(i));
            let t = table(&inst, i);
            let b = estimate_bounds(&t, &inst.intensities, eps, mode).ok();
            !brackets(&inst, b)
        })
        .count() as u64
}

/// Largest miss count consistent with a per-trial failure probability of
/// at most `eps`, at three standard deviations.
fn allowed(trials: u64, eps: f64) -> f64 {
    let mean = trials as f64 * eps;
    mean + 3.0 * (mean * (1.0 - eps)).sqrt()
}

#[test]
fn qkd_bounds_bracket_the_truth() {
    for (eps, trials) in [(1e-10, 4000), (0.3, 1000)] {
        let m = misses(Mode::Qkd, trials, eps, 1_000);
        println!("QKD eps {eps}: {m} misses in {trials}");
        assert!(m as f64 <= allowed(trials, eps), "eps {eps}: {m} misses");
    }
}

#[test]
fn mdi_bounds_bracket_the_truth() {
    for (eps, trials) in [(1e-10, 1500), (0.3, 500)] {
        let m = misses(Mode::Mdi, trials, eps, 50_000);
        println!("MDI eps {eps}: {m} misses in {trials}");
        assert!(m as f64 <= allowed(trials, eps), "eps {eps}: {m} misses");
    }
}

#[test]
fn noiseless_tables_bracket_tightly() {
    // Expected counts with a large pulse budget: the bounds should close in
    // on the truth, not merely contain it.
    for mode in [Mode::Qkd, Mode::Mdi] {
        let inst = instance(mode, 7);
        let synthesis = Synthesis {
            pulses: 1_000_000_000_000_000,
            sifting: 1.0,
        };
        let t = expected_table(&inst.model, &inst.intensities, inst.link, synthesis).unwrap();
        let b = estimate_bounds(
            &t,
            &inst.intensities,
            FailureBudget::new(1e-10).unwrap(),
            mode,
        )
        .unwrap();
        assert!(brackets(&inst, Some(b)));
        let y1 = inst.model.single_photon_yield();
        assert!(
            b.y1_lower.get() > 0.5 * y1,
            "{mode}: {} vs {y1}",
            b.y1_lower.get()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn more_pulses_never_loosen(seed in 0u64..1_000, qkd in any::<bool>(), factor in 2u64..20) {
        let mode = if qkd { Mode::Qkd } else { Mode::Mdi };
        let inst = instance(mode, seed);
        let synthesis = Synthesis { pulses: inst.pulses, sifting: 1.0 };
        let t = expected_table(&inst.model, &inst.intensities, inst.link, synthesis).unwrap();
        let eps = FailureBudget::new(1e-10).unwrap();
        let small = estimate_bounds(&t, &inst.intensities, eps, mode).unwrap();
        let big = estimate_bounds(&t.scaled(factor), &inst.intensities, eps, mode).unwrap();
        let tol = 1e-9;
        prop_assert!(big.y1_lower.get() >= small.y1_lower.get() * (1.0 - tol) - 1e-15);
        prop_assert!(big.e1_x_upper.get() <= small.e1_x_upper.get() * (1.0 + tol) + 1e-15);
    }

    #[test]
    fn identical_tables_give_identical_bounds(seed in 0u64..1_000, qkd in any::<bool>()) {
        let mode = if qkd { Mode::Qkd } else { Mode::Mdi };
        let inst = instance(mode, seed);
        let t = table(&inst, seed);
        let copy = CountTable::from_json(&t.to_json().unwrap()).unwrap();
        let eps = FailureBudget::new(1e-10).unwrap();
        let a = estimate_bounds(&t, &inst.intensities, eps, mode);
        let b = estimate_bounds(&copy, &inst.intensities, eps, mode);
        prop_assert_eq!(a, b);
    }
}
