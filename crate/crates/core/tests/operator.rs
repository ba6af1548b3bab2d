mod common;

use common::*;
use echospot_core::conv::{direct_conv, fft_conv, fft_corr};
use echospot_core::solver::FilterSet;
use echospot_core::{ConvDims, SystemOperator};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fft_conv_matches_direct() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = gaussian(&mut rng, 100);
    let b = gaussian(&mut rng, 37);
    let fast = fft_conv(&a, &b).unwrap();
    let slow = direct_conv(&a, &b);
    assert_eq!(fast.len(), 136);
    let scale =
        a.iter().map(|v| v.abs()).sum::<f64>() * b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in fast.iter().zip(&slow) {
        assert!((x - y).abs() <= 1e-10 * scale);
    }
}

#[test]
fn fft_corr_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = gaussian(&mut rng, 64);
    let b = gaussian(&mut rng, 29);
    let c = fft_corr(&a, &b).unwrap();
    for (i, &v) in c.iter().enumerate() {
        let lag = i as i64 - (b.len() as i64 - 1);
        let direct: f64 = (0..b.len() as i64)
            .filter_map(|n| {
                let j = n + lag;
                (j >= 0 && (j as usize) < a.len()).then(|| a[j as usize] * b[n as usize])
            })
            .sum();
        assert!((v - direct).abs() < 1e-10, "lag {lag}");
    }
}

#[test]
fn autocorr_peaks_at_zero_lag() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let a = gaussian(&mut rng, 50);
    let c = fft_corr(&a, &a).unwrap();
    let peak = c
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |m, (i, &v)| if v > m.1 { (i, v) } else { m })
        .0;
    assert_eq!(peak, 49);
    for i in 0..49 {
        assert!((c[49 - i] - c[49 + i]).abs() < 1e-10);
    }
}

fn small() -> ConvDims {
    ConvDims::new(50, 8, 12, 2, 3).unwrap()
}

#[test]
fn forward_matches_dense_toeplitz() {
    let dims = small();
    let (design, rirs) = random_system(&dims, 1);
    let op = SystemOperator::new(&design, &rirs, dims.filter_len).unwrap();
    let dense = dense_operator(&design, &rirs, &dims);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = gaussian(&mut rng, dims.cols());
    let fast = op.apply(&g).unwrap();
    let slow = &dense * DVector::from_vec(g.clone());
    assert!(rel_err(&fast, slow.as_slice()) <= 1e-9);

    let out = op
        .forward(&FilterSet::from_stacked(&g, &dims).unwrap())
        .unwrap();
    assert_eq!(out.driving.len(), 3);
    assert!(out.driving.iter().all(|s| s.len() == 57));
    assert!(out.receptions.iter().all(|y| y.len() == 68));
    let stacked: Vec<f64> = out.receptions.concat();
    assert_eq!(stacked, fast);
}

#[test]
fn adjoint_matches_dense_transpose() {
    let dims = small();
    let (design, rirs) = random_system(&dims, 3);
    let op = SystemOperator::new(&design, &rirs, dims.filter_len).unwrap();
    let dense = dense_operator(&design, &rirs, &dims);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y = gaussian(&mut rng, dims.rows());
    let fast = op.apply_adjoint(&y).unwrap();
    let slow = dense.transpose() * DVector::from_vec(y);
    assert!(rel_err(&fast, slow.as_slice()) <= 1e-9);
}

#[test]
fn dot_product_test() {
    let dims = small();
    let (design, rirs) = random_system(&dims, 5);
    let op = SystemOperator::new(&design, &rirs, dims.filter_len).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let g = gaussian(&mut rng, dims.cols());
        let y = gaussian(&mut rng, dims.rows());
        let lhs = dot(&op.apply(&g).unwrap(), &y);
        let rhs = dot(&g, &op.apply_adjoint(&y).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
    }
}

#[test]
fn zero_and_delta_cases() {
    let dims = small();
    let (design, rirs) = random_system(&dims, 7);
    let op = SystemOperator::new(&design, &rirs, dims.filter_len).unwrap();
    assert!(op
        .apply(&vec![0.0; dims.cols()])
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));
    assert!(op
        .apply_adjoint(&vec![0.0; dims.rows()])
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));
    let zero = op.forward(&FilterSet::zeros(2, 3, 8).unwrap()).unwrap();
    assert!(zero.driving.iter().flatten().all(|&v| v == 0.0));

    // x̃ = δ, h = δ: reception equals the filter, zero-padded
    let delta = |n: usize| {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        v
    };
    let design = echospot_core::DesignSignalSet::from_signals(
        vec![vec![delta(5)]],
        echospot_core::DesignKind::ChoppedNoise,
    )
    .unwrap();
    let rirs = echospot_core::RirSet::new(vec![vec![delta(3)]], 8000).unwrap();
    let op = SystemOperator::new(&design, &rirs, 4).unwrap();
    let g = vec![0.5, -1.0, 2.0, 0.25];
    let y = op.apply(&g).unwrap();
    assert_eq!(y.len(), 10);
    for (i, v) in y.iter().enumerate() {
        let expect = if i < 4 { g[i] } else { 0.0 };
        assert!((v - expect).abs() < 1e-12);
    }
}

#[test]
fn shape_mismatches_are_dimension_errors() {
    let dims = small();
    let (design, rirs) = random_system(&dims, 8);
    let op = SystemOperator::new(&design, &rirs, dims.filter_len).unwrap();
    assert!(op.apply(&[0.0; 3]).is_err());
    assert!(op.apply_adjoint(&[0.0; 3]).is_err());
    assert!(op.forward(&FilterSet::zeros(2, 3, 9).unwrap()).is_err());
    let narrow = rirs.select_rows([0]).unwrap();
    assert!(SystemOperator::new(&design, &narrow, 8).is_err());
}

#[test]
fn repeated_application_is_bit_identical() {
    let dims = small();
    let (design, rirs) = random_system(&dims, 9);
    let op = SystemOperator::new(&design, &rirs, dims.filter_len).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let g = gaussian(&mut rng, dims.cols());
    assert_eq!(op.apply(&g).unwrap(), op.apply(&g).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_conv_equals_direct(a in prop::collection::vec(-10.0f64..10.0, 1..80),
                              b in prop::collection::vec(-10.0f64..10.0, 1..80)) {
        let fast = fft_conv(&a, &b).unwrap();
        let slow = direct_conv(&a, &b);
        prop_assert_eq!(fast.len(), a.len() + b.len() - 1);
        let scale = a.iter().map(|v| v.abs()).sum::<f64>() * b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in fast.iter().zip(&slow) {
            prop_assert!((x - y).abs() <= 1e-10 * scale.max(1e-300));
        }
    }

    #[test]
    fn forward_is_linear(seed in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let dims = ConvDims::new(20, 5, 7, 2, 2).unwrap();
        let (design, rirs) = random_system(&dims, seed);
        let op = SystemOperator::new(&design, &rirs, dims.filter_len).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let g1 = gaussian(&mut rng, dims.cols());
        let g2 = gaussian(&mut rng, dims.cols());
        let combo: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = op.apply(&combo).unwrap();
        let y1 = op.apply(&g1).unwrap();
        let y2 = op.apply(&g2).unwrap();
        let rhs: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| alpha * a + beta * b).collect();
        prop_assert!(rel_err(&lhs, &rhs) <= 1e-10 || rhs.iter().all(|v| v.abs() < 1e-12));
    }
}
