//! The simplex solver against brute-force vertex enumeration.
//!
//! Every program here has finite bounds on all variables, so a feasible one
//! attains its optimum at a vertex: a feasible point where `n` linearly
//! independent constraints or bounds are tight.

use mdiqds::mathkit::{Constraint, LinearProgram, LpError, Relation, Sense};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const FEAS: f64 = 1e-9;

fn feasible(lp: &LinearProgram, x: &[f64], tol: f64) -> bool {
    let bounds_ok = lp
        .bounds
        .iter()
        .zip(x)
        .all(|(&(lo, hi), &v)| v >= lo - tol && v <= hi + tol);
    bounds_ok
        && lp.constraints.iter().all(|c| {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let scale = tol * (1.0 + c.rhs.abs());
            match c.relation {
                Relation::Le => lhs <= c.rhs + scale,
                Relation::Ge => lhs >= c.rhs - scale,
                Relation::Eq => (lhs - c.rhs).abs() <= scale,
            }
        })
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Best objective over all feasible vertices, or `None` if there are none.
fn brute_force(lp: &LinearProgram) -> Option<f64> {
    let n = lp.objective.len();
    let mut planes: Vec<(Vec<f64>, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coeffs.clone(), c.rhs))
        .collect();
    for (i, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        planes.push((e.clone(), lo));
        planes.push((e, hi));
    }
    let mut best: Option<f64> = None;
    for pick in combinations(planes.len(), n) {
        let a = DMatrix::from_fn(n, n, |r, c| planes[pick[r]].0[c]);
        let b = DVector::from_iterator(n, pick.iter().map(|&r| planes[r].1));
        let Some(x) = a.lu().solve(&b) else {
            continue;
        };
        let x: Vec<f64> = x.iter().copied().collect();
        if !x.iter().all(|v| v.is_finite()) || !feasible(lp, &x, FEAS) {
            continue;
        }
        let value: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        best = Some(match (best, lp.sense) {
            (None, _) => value,
            (Some(b), Sense::Minimize) => b.min(value),
            (Some(b), Sense::Maximize) => b.max(value),
        });
    }
    best
}

fn check(lp: &LinearProgram) -> Result<(), TestCaseError> {
    let truth = brute_force(lp);
    match (lp.optimum(), truth) {
        (Ok(sol), Some(best)) => {
            prop_assert!(
                (sol.optimum - best).abs() <= 1e-7 * (1.0 + best.abs()),
                "solver {} vs vertices {best}",
                sol.optimum
            );
            prop_assert!(feasible(lp, &sol.assignment, 1e-7), "{:?}", sol.assignment);
        }
        (Err(LpError::Infeasible), None) => {}
        (got, want) => prop_assert!(false, "solver {got:?}, vertices {want:?}"),
    }
    Ok(())
}

fn relation() -> impl Strategy<Value = Relation> {
    prop_oneof![Just(Relation::Le), Just(Relation::Ge), Just(Relation::Eq)]
}

fn small_lp() -> impl Strategy<Value = LinearProgram> {
    (1usize..=4, 0usize..=5).prop_flat_map(|(n, m)| {
        let coeff = -4i32..=4;
        let row = (
            prop::collection::vec(coeff.clone(), n),
            relation(),
            -10i32..=20,
        );
        let bound = (-2i32..=3, 1i32..=8);
        (
            prop::collection::vec(-5i32..=5, n),
            prop::bool::ANY,
            prop::collection::vec(row, m),
            prop::collection::vec(bound, n),
        )
            .prop_map(|(obj, maximize, rows, bounds)| LinearProgram {
                objective: obj.into_iter().map(f64::from).collect(),
                sense: if maximize {
                    Sense::Maximize
                } else {
                    Sense::Minimize
                },
                constraints: rows
                    .into_iter()
                    .map(|(c, r, b)| {
                        Constraint::new(c.into_iter().map(f64::from).collect(), r, f64::from(b))
                    })
                    .collect(),
                bounds: bounds
                    .into_iter()
                    .map(|(lo, w)| (f64::from(lo), f64::from(lo + w)))
                    .collect(),
            })
    })
}

fn poisson(mu: f64, n: usize) -> f64 {
    (-mu + n as f64 * mu.ln() - (1..=n).map(|k| (k as f64).ln()).sum::<f64>()).exp()
}

/// Decoy-shaped programs: photon-number yields in `[0, 1]` observed through
/// Poisson mixtures at several intensities, each gain known to an interval
/// around the truth.
fn decoy_lp() -> impl Strategy<Value = (LinearProgram, Vec<f64>)> {
    (
        prop::collection::vec(0.0f64..1.0, 5),
        prop::collection::vec(0.01f64..0.8, 2..=4),
        1e-4f64..0.05,
        prop::bool::ANY,
    )
        .prop_map(|(truth, mus, slack, maximize)| {
            let n = truth.len();
            let mut constraints = Vec::new();
            for &mu in &mus {
                let w: Vec<f64> = (0..n).map(|k| poisson(mu, k)).collect();
                let gain: f64 = w.iter().zip(&truth).map(|(a, b)| a * b).sum();
                // The truncated tail can add up to its weight.
                let tail = 1.0 - w.iter().sum::<f64>();
                constraints.push(Constraint::new(
                    w.clone(),
                    Relation::Ge,
                    gain - slack - tail,
                ));
                constraints.push(Constraint::new(w, Relation::Le, gain + slack));
            }
            let mut objective = vec![0.0; n];
            objective[1] = 1.0;
            let lp = LinearProgram {
                objective,
                sense: if maximize {
                    Sense::Maximize
                } else {
                    Sense::Minimize
                },
                constraints,
                bounds: vec![(0.0, 1.0); n],
            };
            (lp, truth)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2048))]

    #[test]
    fn small_programs_match_vertex_enumeration(lp in small_lp()) {
        check(&lp)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decoy_programs_match_and_bracket_the_truth((lp, truth) in decoy_lp()) {
        check(&lp)?;
        let sol = lp.optimum().unwrap();
        match lp.sense {
            Sense::Minimize => prop_assert!(sol.optimum <= truth[1] + 1e-9),
            Sense::Maximize => prop_assert!(sol.optimum >= truth[1] - 1e-9),
        }
    }
}

#[test]
fn degenerate_corner_with_many_tight_rows() {
    // Six constraints all tight at the optimum (1, 1).
    let rows = [
        ([1.0, 1.0], 2.0),
        ([2.0, 1.0], 3.0),
        ([1.0, 2.0], 3.0),
        ([3.0, 1.0], 4.0),
        ([1.0, 3.0], 4.0),
        ([1.0, 0.0], 1.0),
    ];
    let lp = LinearProgram {
        objective: vec![1.0, 1.0],
        sense: Sense::Maximize,
        constraints: rows
            .iter()
            .map(|(a, b)| Constraint::new(a.to_vec(), Relation::Le, *b))
            .collect(),
        bounds: vec![(0.0, 5.0); 2],
    };
    let sol = lp.optimum().unwrap();
    assert!((sol.optimum - 2.0).abs() < 1e-12);
    assert_eq!(brute_force(&lp), Some(2.0));
}
