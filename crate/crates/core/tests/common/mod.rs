#![allow(dead_code)]

use echospot_core::room::RirSet;
use echospot_core::signal::{DesignKind, DesignSignalSet};
use echospot_core::ConvDims;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random design signals and RIRs of the given shape.
pub fn random_system(dims: &ConvDims, seed: u64) -> (DesignSignalSet, RirSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = (0..dims.users)
        .map(|_| {
            (0..dims.loudspeakers)
                .map(|_| gaussian(&mut rng, dims.signal_len))
                .collect()
        })
        .collect();
    let rirs = (0..dims.users)
        .map(|_| {
            (0..dims.loudspeakers)
                .map(|_| gaussian(&mut rng, dims.rir_len))
                .collect()
        })
        .collect();
    (
        DesignSignalSet::from_signals(design, DesignKind::ChoppedNoise).unwrap(),
        RirSet::new(rirs, 16000).unwrap(),
    )
}

/// (len(x) + cols − 1) × cols convolution matrix.
pub fn toeplitz(x: &[f64], cols: usize) -> DMatrix<f64> {
    let rows = x.len() + cols - 1;
    DMatrix::from_fn(rows, cols, |i, j| {
        if i >= j && i - j < x.len() {
            x[i - j]
        } else {
            0.0
        }
    })
}

/// Dense H X̃ assembled block by block from explicit Toeplitz matrices.
pub fn dense_operator(design: &DesignSignalSet, rirs: &RirSet, dims: &ConvDims) -> DMatrix<f64> {
    let rl = dims.reception_len();
    assert!(
        dims.rows() <= 5000,
        "dense oracle is for small systems only"
    );
    let mut a = DMatrix::zeros(dims.rows(), dims.cols());
    for k in 0..dims.users {
        for l in 0..dims.loudspeakers {
            let h = toeplitz(rirs.rir(k, l), dims.driving_len());
            for kp in 0..dims.users {
                let x = toeplitz(design.signal(kp, l), dims.filter_len);
                let block = &h * &x;
                let col = dims.filter_offset(kp, l);
                a.view_mut((k * rl, col), (rl, dims.filter_len))
                    .copy_from(&block);
            }
        }
    }
    a
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
