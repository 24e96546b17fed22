mod support;

use concept_bridge::features::{FeatureMatrix, SMode};
use concept_bridge::linalg::{DenseMatrix, TileConfig};
use concept_bridge::similarity::{concat_layers, layerwise_grid, mppc_pair, MppcResult};
use concept_bridge::stats::shuffle_baseline;
use concept_bridge::Error;
use proptest::prelude::*;
use rand::Rng;
use support::{gaussian, naive_correlation, rng};

fn features(data: DenseMatrix, layer: u32) -> FeatureMatrix {
    FeatureMatrix::from_matrix(data, "m", layer, SMode::Relu).unwrap()
}

fn positive(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut r = rng(seed);
    let data = (0..rows * cols).map(|_| r.random_range(0.01f32..2.0)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

fn pair(a: &DenseMatrix, b: &DenseMatrix) -> MppcResult {
    mppc_pair(&features(a.clone(), 0), &features(b.clone(), 1), &TileConfig::default()).unwrap()
}

fn map_columns(m: &DenseMatrix, f: impl Fn(usize, f32) -> f32) -> DenseMatrix {
    let cols = m.cols();
    let data = m.as_slice().iter().enumerate().map(|(i, &v)| f(i % cols, v)).collect();
    DenseMatrix::from_vec(m.rows(), cols, data).unwrap()
}

#[test]
fn rho_matches_naive_row_max() {
    let a = positive(80, 6, 1);
    let b = positive(80, 9, 2);
    let r = pair(&a, &b);
    let oracle = naive_correlation(&a, &b);
    for i in 0..6 {
        let row = &oracle[i * 9..(i + 1) * 9];
        let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((r.rho[i] - best).abs() < 1e-5);
        assert!((row[r.argmax[i]] - best).abs() < 1e-5);
    }
}

#[test]
fn self_similarity() {
    let a = positive(50, 12, 3);
    let r = pair(&a, &a);
    assert!((r.mppc - 1.0).abs() < 1e-6 && (r.wmppc - 1.0).abs() < 1e-6);
    assert_eq!(r.argmax, (0..12).collect::<Vec<_>>());
}

#[test]
fn scale_invariance_and_sign_flip() {
    let a = positive(60, 4, 4);
    let b = positive(60, 5, 5);
    let base = pair(&a, &b);
    let scaled = pair(&a, &map_columns(&b, |_, v| v * 3.5));
    for (x, y) in base.rho.iter().zip(&scaled.rho) {
        assert!((x - y).abs() < 1e-6);
    }
    let flipped = pair(&a, &map_columns(&b, |_, v| -v));
    let c = naive_correlation(&a, &b);
    for i in 0..4 {
        let min = c[i * 5..(i + 1) * 5].iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((flipped.rho[i] + min).abs() < 1e-5);
    }
}

#[test]
fn grid_cells_equal_pairs_bitwise() {
    let src: Vec<_> = (0..3).map(|l| features(positive(40, 8, 10 + l as u64), l)).collect();
    let tgt: Vec<_> = (0..2).map(|l| features(positive(40, 6, 20 + l as u64), l)).collect();
    let cfg = TileConfig::default();
    let grid = layerwise_grid(&src, &tgt, &cfg).unwrap();
    for (a, s) in src.iter().enumerate() {
        for (b, t) in tgt.iter().enumerate() {
            assert_eq!(grid.get(a, b).to_bits(), mppc_pair(s, t, &cfg).unwrap().wmppc.to_bits());
        }
    }
    let single = layerwise_grid(&src[..1], &src[..1], &cfg).unwrap();
    assert!((single.values[0] - 1.0).abs() < 1e-6);
}

#[test]
fn grid_errors_name_the_cell() {
    let src = vec![features(positive(10, 3, 1), 4)];
    let tgt = vec![features(positive(10, 3, 2), 0), features(positive(11, 3, 3), 7)];
    match layerwise_grid(&src, &tgt, &TileConfig::default()) {
        Err(Error::GridCell {
            src_layer: 4,
            tgt_layer: 7,
            ..
        }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn concatenated_rho_is_max_over_layers() {
    let layers: Vec<_> = (0..3).map(|l| features(positive(70, 5, 40 + l as u64), l)).collect();
    let all = concat_layers(&layers).unwrap();
    let src = features(positive(70, 4, 50), 9);
    let cfg = TileConfig::default();
    let joint = mppc_pair(&src, &all, &cfg).unwrap();
    let per_layer: Vec<_> = layers.iter().map(|l| mppc_pair(&src, l, &cfg).unwrap()).collect();
    for i in 0..4 {
        let best = per_layer.iter().map(|r| r.rho[i]).fold(f64::NEG_INFINITY, f64::max);
        assert!((joint.rho[i] - best).abs() < 1e-6);
    }
    let reverse = mppc_pair(&all, &src, &cfg).unwrap();
    assert_eq!(reverse.rho.len(), 15);
    assert!((reverse.mppc - reverse.rho.iter().sum::<f64>() / 15.0).abs() < 1e-12);
}

#[test]
fn shuffled_random_features_lose_their_match() {
    // Random-projection features of shared Gaussian inputs: the two sides are
    // strongly related until the target is shuffled.
    for seed in 0..10 {
        let mut r = rng(seed);
        let x = gaussian(2000, 64, &mut r);
        let proj = gaussian(64, 512, &mut r);
        let cfg = TileConfig::default();
        let f = concept_bridge::linalg::matmul(&x, &proj, &cfg).unwrap();
        let f = map_columns(&f, |_, v| v.max(0.0));
        let fm = features(f, 0);
        let base = mppc_pair(&fm, &fm, &cfg).unwrap();
        let shuffled = shuffle_baseline(&fm, &fm, seed, &cfg).unwrap();
        assert!(base.wmppc > 0.99);
        assert!(shuffled.wmppc < 0.15, "seed {seed}: {}", shuffled.wmppc);
        assert_eq!(shuffled, shuffle_baseline(&fm, &fm, seed, &cfg).unwrap());
    }
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    proptest::collection::vec(0.01f32..10.0, rows * cols).prop_map(move |v| DenseMatrix::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permuting_targets_permutes_argmax(a in matrix(20, 3), b in matrix(20, 5), seed: u64) {
        let perm = concept_bridge::linalg::seeded_permutation(5, seed).unwrap();
        let pb = DenseMatrix::from_vec(20, 5, (0..20).flat_map(|r| perm.iter().map(|&j| b.get(r, j)).collect::<Vec<_>>()).collect()).unwrap();
        let base = pair(&a, &b);
        let moved = pair(&a, &pb);
        for i in 0..3 {
            prop_assert_eq!(base.rho[i], moved.rho[i]);
            let c = naive_correlation(&a, &b);
            prop_assert!((c[i * 5 + perm[moved.argmax[i]]] - base.rho[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn duplicate_target_column_never_lowers_rho(a in matrix(15, 3), b in matrix(15, 4), col in 0usize..4) {
        let extended = DenseMatrix::hconcat(&[&b, &DenseMatrix::from_vec(15, 1, b.column(col)).unwrap()]).unwrap();
        let base = pair(&a, &b);
        let more = pair(&a, &extended);
        for (x, y) in base.rho.iter().zip(&more.rho) {
            prop_assert!(y >= x);
        }
    }

    #[test]
    fn wmppc_lies_between_extreme_rho(a in matrix(12, 4), b in matrix(12, 3)) {
        let r = pair(&a, &b);
        let lo = r.rho.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = r.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.wmppc >= lo - 1e-12 && r.wmppc <= hi + 1e-12);
        prop_assert!(r.rho.iter().all(|v| v.abs() <= 1.0 + 1e-4));
    }
}
