//! Welch-averaged magnitude-squared coherence between columns of `H X̃`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use realfft::num_complex::Complex64;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::conv::SystemOperator;
use crate::error::{dim, invalid, Result};

/// Spectral estimates of a pair of signals on a common frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WelchPair {
    pub frequencies: Vec<f64>,
    pub auto_z: Vec<f64>,
    pub auto_w: Vec<f64>,
    pub cross: Vec<Complex64>,
    pub segments: usize,
}

impl WelchPair {
    /// γ(f) = |C_zw|² / (A_zz A_ww); bins where either power vanishes get 0.
    pub fn coherence(&self) -> Vec<f64> {
        self.cross
            .iter()
            .zip(self.auto_z.iter().zip(&self.auto_w))
            .map(|(c, (&a, &b))| {
                let d = a * b;
                if d > 0.0 {
                    c.norm_sqr() / d
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Hann-windowed, 50 %-overlap Welch estimates of auto and cross spectra.
pub fn welch_pair(z: &[f64], w: &[f64], segment: usize, sample_rate: u32) -> Result<WelchPair> {
    if z.len() != w.len() {
        return Err(dim("coherence inputs must have equal length"));
    }
    if segment < 2 || segment > z.len() {
        return Err(invalid(format!(
            "Welch segment {segment} must be between 2 and the signal length {}",
            z.len()
        )));
    }
    let hop = segment / 2;
    let window: Vec<f64> = (0..segment)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / segment as f64).cos())
        .collect();
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(segment);
    let bins = segment / 2 + 1;
    let mut auto_z = vec![0.0; bins];
    let mut auto_w = vec![0.0; bins];
    let mut cross = vec![Complex64::new(0.0, 0.0); bins];
    let mut bz = vec![0.0; segment];
    let mut bw = vec![0.0; segment];
    let mut sz = fft.make_output_vec();
    let mut sw = fft.make_output_vec();
    let mut segments = 0;
    let mut start = 0;
    while start + segment <= z.len() {
        for i in 0..segment {
            bz[i] = z[start + i] * window[i];
            bw[i] = w[start + i] * window[i];
        }
        fft.process(&mut bz, &mut sz).expect("plan sizes");
        fft.process(&mut bw, &mut sw).expect("plan sizes");
        for i in 0..bins {
            auto_z[i] += sz[i].norm_sqr();
            auto_w[i] += sw[i].norm_sqr();
            cross[i] += sz[i].conj() * sw[i];
        }
        segments += 1;
        start += hop;
    }
    let df = sample_rate as f64 / segment as f64;
    Ok(WelchPair {
        frequencies: (0..bins).map(|i| i as f64 * df).collect(),
        auto_z,
        auto_w,
        cross,
        segments,
    })
}

pub fn coherence(
    z: &[f64],
    w: &[f64],
    segment: usize,
    sample_rate: u32,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = welch_pair(z, w, segment, sample_rate)?;
    let gamma = p.coherence();
    Ok((p.frequencies, gamma))
}

/// Identifies one column of `H X̃`: design user, loudspeaker block and tap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnId {
    pub user: usize,
    pub loudspeaker: usize,
    pub tap: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    pub frequencies: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
    pub pairs: Vec<(ColumnId, ColumnId)>,
}

impl CoherenceReport {
    /// Mean coherence across pairs and the bins in `[lo, hi]` Hz.
    pub fn band_average(&self, lo: f64, hi: f64) -> f64 {
        let idx: Vec<usize> = self
            .frequencies
            .iter()
            .enumerate()
            .filter(|(_, &f)| f >= lo && f <= hi)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() || self.curves.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .curves
            .iter()
            .map(|c| idx.iter().map(|&i| c[i]).sum::<f64>())
            .sum();
        total / (idx.len() * self.curves.len()) as f64
    }

    /// Pair-averaged curve.
    pub fn mean_curve(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.frequencies.len()];
        for c in &self.curves {
            out.iter_mut().zip(c).for_each(|(o, v)| *o += v);
        }
        let n = self.curves.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// How the two columns of a pair are chosen once their blocks are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSampling {
    /// Both columns share one random user and tap.
    #[default]
    Aligned,
    /// User and tap drawn independently for each column.
    Independent,
}

/// Coherence between `n_pairs` random column pairs taken from different
/// loudspeaker blocks, paired as aligned columns.
pub fn column_coherence(
    op: &SystemOperator,
    n_pairs: usize,
    seed: u64,
    welch_segment: usize,
) -> Result<CoherenceReport> {
    column_coherence_with(op, n_pairs, seed, welch_segment, PairSampling::Aligned)
}

pub fn column_coherence_with(
    op: &SystemOperator,
    n_pairs: usize,
    seed: u64,
    welch_segment: usize,
    sampling: PairSampling,
) -> Result<CoherenceReport> {
    let dims = *op.dims();
    if n_pairs == 0 {
        return Err(invalid("need at least one column pair"));
    }
    if welch_segment < 64 {
        return Err(invalid(format!("Welch segment {welch_segment} < 64")));
    }
    if welch_segment > dims.rows() {
        return Err(invalid(format!(
            "Welch segment {welch_segment} longer than a column ({})",
            dims.rows()
        )));
    }
    if dims.loudspeakers < 2 {
        return Err(invalid("cross-block pairs need at least two loudspeakers"));
    }
    let rate = op.rirs().sample_rate();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, loudspeaker: usize| ColumnId {
        user: rng.random_range(0..dims.users),
        loudspeaker,
        tap: rng.random_range(0..dims.filter_len),
    };
    let mut frequencies = Vec::new();
    let mut curves = Vec::with_capacity(n_pairs);
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let la = rng.random_range(0..dims.loudspeakers);
        let mut lb = rng.random_range(0..dims.loudspeakers - 1);
        if lb >= la {
            lb += 1;
        }
        let a = draw(&mut rng, la);
        let b = match sampling {
            PairSampling::Aligned => ColumnId {
                loudspeaker: lb,
                ..a
            },
            PairSampling::Independent => draw(&mut rng, lb),
        };
        let za = op.column(dims.filter_offset(a.user, a.loudspeaker) + a.tap)?;
        let zb = op.column(dims.filter_offset(b.user, b.loudspeaker) + b.tap)?;
        let (f, gamma) = coherence(&za, &zb, welch_segment, rate)?;
        frequencies = f;
        curves.push(gamma);
        pairs.push((a, b));
    }
    Ok(CoherenceReport {
        frequencies,
        curves,
        pairs,
    })
}
