mod support;

use std::collections::HashSet;

use concept_bridge::features::{FeatureMatrix, SMode};
use concept_bridge::sharedness::{
    comparative_sharedness, generalized_cs, overlap_count, top_activating_samples, top_fraction,
};
use concept_bridge::stats::{fisher_max_tail_log10, normal_tail_log10, SignificanceQuery};
use proptest::prelude::*;
use rand::Rng;
use support::{gaussian, null_max_correlation, rng};

#[test]
fn singleton_groups_reduce_to_pairwise() {
    let mut r = rng(1);
    for _ in 0..10_000 {
        let s: f64 = r.random_range(-5.0..5.0);
        let a: f64 = r.random_range(-1.0..1.0);
        let b: f64 = r.random_range(-1.0..1.0);
        let pairwise = comparative_sharedness(&[s], &[a], &[b]).unwrap()[0];
        let grouped = generalized_cs(&[s], &[&[a]], &[&[b]]).unwrap()[0];
        assert!((pairwise - grouped).abs() < 1e-9);
    }
}

#[test]
fn top_samples_match_full_sort() {
    let mut r = rng(2);
    let data = gaussian(200, 3, &mut r);
    let fm = FeatureMatrix::from_matrix(data.clone(), "m", 0, SMode::Raw).unwrap();
    for j in 0..3 {
        let mut order: Vec<usize> = (0..200).collect();
        order.sort_by(|&a, &b| data.get(b, j).total_cmp(&data.get(a, j)).then(a.cmp(&b)));
        assert_eq!(top_activating_samples(&fm, j, 17).unwrap(), order[..17]);
        assert_eq!(top_activating_samples(&fm, j, 200).unwrap(), order);
    }
}

#[test]
fn normal_tail_matches_high_precision_values() {
    // log10(1 - Phi(z)) from mpmath at 50 digits
    let reference = [
        (0.0, -std::f64::consts::LOG10_2),
        (1.0, -0.79954554149197),
        (2.0, -1.64301608014094),
        (4.0, -4.49933490755648),
        (8.0, -15.20614255101715),
        (16.0, -57.19458380689701),
        (31.0, -210.56940093220394),
        (40.0, -349.43700645934584),
    ];
    for (z, want) in reference {
        let got = normal_tail_log10(z);
        assert!((got - want).abs() < 1e-3, "z={z}: {got} vs {want}");
        if z <= 8.0 {
            assert!((got - want).abs() < 1e-10 * want.abs(), "z={z}");
        }
    }
}

#[test]
fn fisher_tail_agrees_with_simulation() {
    let q = SignificanceQuery::new(0.2, 50, 200).unwrap();
    let p = 10f64.powf(fisher_max_tail_log10(&q));
    let trials = 2000;
    let mut r = rng(3);
    let hits = (0..trials).filter(|_| null_max_correlation(50, 200, &mut r) > 0.2).count();
    let est = hits as f64 / trials as f64;
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    assert!((est - p).abs() < 3.0 * se, "simulated {est}, predicted {p}, se {se}");
}

proptest! {
    #[test]
    fn fisher_tail_monotonicity(x in 0.01f64..0.9, n in 1u64..10_000, l in 10u64..100_000) {
        let at = |x, n, l| fisher_max_tail_log10(&SignificanceQuery::new(x, n, l).unwrap());
        let base = at(x, n, l);
        prop_assert!(at(x + 0.05, n, l) <= base);
        prop_assert!(at(x, n + 100, l) >= base);
        prop_assert!(at(x, n, l + 100) <= base);
    }

    #[test]
    fn positive_rescaling_keeps_ranking(
        delta_inputs in proptest::collection::vec((0.0f64..3.0, -1.0f64..1.0, -1.0f64..1.0), 1..200),
        c in 0.01f64..100.0,
        fraction in 0.01f64..1.0,
    ) {
        let s: Vec<f64> = delta_inputs.iter().map(|t| t.0).collect();
        let a: Vec<f64> = delta_inputs.iter().map(|t| t.1).collect();
        let b: Vec<f64> = delta_inputs.iter().map(|t| t.2).collect();
        let scaled: Vec<f64> = s.iter().map(|v| v * c).collect();
        let d1 = comparative_sharedness(&s, &a, &b).unwrap();
        let d2 = comparative_sharedness(&scaled, &a, &b).unwrap();
        // Distinct deltas only; exact ties may reorder after rounding.
        let distinct: HashSet<u64> = d1.iter().map(|v| v.to_bits()).collect();
        if distinct.len() == d1.len() && d1.iter().all(|v| *v != 0.0) {
            prop_assert_eq!(top_fraction(&d1, fraction).unwrap(), top_fraction(&d2, fraction).unwrap());
        }
    }

    #[test]
    fn raising_h_never_raises_delta(
        s in 0.0f64..4.0, g in -1.0f64..1.0, h1 in -1.0f64..1.0, h2 in -1.0f64..1.0, bump in 0.0f64..0.5,
    ) {
        let before = generalized_cs(&[s], &[&[g]], &[&[h1], &[h2]]).unwrap()[0];
        let raised = (h1 + bump).min(1.0);
        let after = generalized_cs(&[s], &[&[g]], &[&[raised], &[h2]]).unwrap()[0];
        // Raising a correlation raises its square only on the positive side.
        if h1 >= 0.0 {
            prop_assert!(after <= before + 1e-12);
        }
    }

    #[test]
    fn overlap_matches_brute_force(a in proptest::collection::vec(0usize..50, 0..30), b in proptest::collection::vec(0usize..50, 0..30)) {
        let a: Vec<usize> = a.into_iter().collect::<HashSet<_>>().into_iter().collect();
        let b: Vec<usize> = b.into_iter().collect::<HashSet<_>>().into_iter().collect();
        let brute = a.iter().filter(|x| b.contains(x)).count();
        prop_assert_eq!(overlap_count(&a, &b), brute);
    }
}
