//! Short-time objective intelligibility.
//!
//! Both signals are brought to 10 kHz, frames that are more than 40 dB below
//! the loudest clean frame are dropped from both, and one-third-octave band
//! envelopes are correlated over 30-frame (384 ms) segments after the
//! degraded envelope is energy-normalized and clipped at −15 dB SDR.

use std::f64::consts::PI;
use std::sync::OnceLock;

use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use super::resample::resample_to;
use crate::error::{dim, Error, Result};
use crate::signal::Waveform;

pub const STOI_RATE: u32 = 10_000;
const FRAME_LEN: usize = 256;
const HOP: usize = FRAME_LEN / 2;
const FFT_LEN: usize = 512;
const NUM_BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEGMENT_FRAMES: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntelligibilityScore {
    pub value: f64,
    pub clean_ref: String,
    pub degraded: String,
}

/// Hann window without its zero endpoints.
fn window() -> &'static [f64] {
    static W: OnceLock<Vec<f64>> = OnceLock::new();
    W.get_or_init(|| {
        (1..=FRAME_LEN)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (FRAME_LEN + 1) as f64).cos())
            .collect()
    })
}

/// Bin ranges [lo, hi) of the one-third-octave bands.
fn band_bins() -> &'static [(usize, usize)] {
    static B: OnceLock<Vec<(usize, usize)>> = OnceLock::new();
    B.get_or_init(|| {
        let bins = FFT_LEN / 2 + 1;
        let df = STOI_RATE as f64 / FFT_LEN as f64;
        let nearest = |f: f64| -> usize {
            (0..bins)
                .min_by(|&a, &b| {
                    let da = (a as f64 * df - f).powi(2);
                    let db = (b as f64 * df - f).powi(2);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap()
        };
        (0..NUM_BANDS)
            .map(|k| {
                let k = k as f64;
                let lo = MIN_FREQ * 2f64.powf((2.0 * k - 1.0) / 6.0);
                let hi = MIN_FREQ * 2f64.powf((2.0 * k + 1.0) / 6.0);
                (nearest(lo), nearest(hi))
            })
            .collect()
    })
}

fn frame_starts(len: usize) -> impl Iterator<Item = usize> {
    (0..len.saturating_sub(FRAME_LEN)).step_by(HOP)
}

/// Drops frames of `x` more than the dynamic range below its loudest frame,
/// and the same frames of `y`, then overlap-adds the survivors.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = window();
    let starts: Vec<usize> = frame_starts(x.len()).collect();
    let energy = |s: usize| -> f64 {
        let e: f64 = (0..FRAME_LEN).map(|i| (w[i] * x[s + i]).powi(2)).sum();
        20.0 * (e.sqrt() + f64::EPSILON).log10()
    };
    let energies: Vec<f64> = starts.iter().map(|&s| energy(s)).collect();
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| max - DYN_RANGE_DB - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    if kept.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let out_len = (kept.len() - 1) * HOP + FRAME_LEN;
    let mut xs = vec![0.0; out_len];
    let mut ys = vec![0.0; out_len];
    for (j, &s) in kept.iter().enumerate() {
        let o = j * HOP;
        for i in 0..FRAME_LEN {
            xs[o + i] += w[i] * x[s + i];
            ys[o + i] += w[i] * y[s + i];
        }
    }
    (xs, ys)
}

/// One-third-octave band envelopes, `[band][frame]`.
fn band_envelopes(x: &[f64]) -> Vec<Vec<f64>> {
    let w = window();
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(FFT_LEN);
    let mut buf = vec![0.0; FFT_LEN];
    let mut spec = fft.make_output_vec();
    let bands = band_bins();
    let mut env = vec![Vec::new(); NUM_BANDS];
    for s in frame_starts(x.len()) {
        buf.fill(0.0);
        for i in 0..FRAME_LEN {
            buf[i] = w[i] * x[s + i];
        }
        fft.process(&mut buf, &mut spec).expect("plan sizes");
        for (b, &(lo, hi)) in bands.iter().enumerate() {
            let power: f64 = spec[lo..hi].iter().map(|c| c.norm_sqr()).sum();
            env[b].push(power.sqrt());
        }
    }
    env
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// STOI of `degraded` against `clean`, in [0, 1] for realistic inputs.
pub fn stoi(clean: &Waveform, degraded: &Waveform) -> Result<f64> {
    if clean.sample_rate() != degraded.sample_rate() {
        return Err(dim(format!(
            "sample rates differ: {} vs {}",
            clean.sample_rate(),
            degraded.sample_rate()
        )));
    }
    if clean.sample_rate() < STOI_RATE {
        return Err(Error::Unsupported(format!(
            "sample rate {} Hz is below {STOI_RATE} Hz",
            clean.sample_rate()
        )));
    }
    if degraded.len() < clean.len() {
        return Err(dim(format!(
            "degraded signal ({}) shorter than clean ({})",
            degraded.len(),
            clean.len()
        )));
    }
    let degraded = degraded.fit_to(clean.len());
    if degraded.samples().iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("degraded signal is silent".into()));
    }
    if clean.samples().iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("clean signal is silent".into()));
    }
    let x = resample_to(clean, STOI_RATE)?;
    let y = resample_to(&degraded, STOI_RATE)?;
    let (x, y) = remove_silent_frames(x.samples(), y.samples());
    let xe = band_envelopes(&x);
    let ye = band_envelopes(&y);
    let frames = xe[0].len();
    if frames < SEGMENT_FRAMES {
        return Err(Error::TooShort(format!(
            "{frames} active frames, need at least {SEGMENT_FRAMES}"
        )));
    }

    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for end in SEGMENT_FRAMES..=frames {
        for b in 0..NUM_BANDS {
            let xs = &xe[b][end - SEGMENT_FRAMES..end];
            let ys = &ye[b][end - SEGMENT_FRAMES..end];
            let alpha = l2(xs) / (l2(ys) + f64::EPSILON);
            let yp: Vec<f64> = ys
                .iter()
                .zip(xs)
                .map(|(&yv, &xv)| (yv * alpha).min(xv * clip))
                .collect();
            let mx = xs.iter().sum::<f64>() / SEGMENT_FRAMES as f64;
            let my = yp.iter().sum::<f64>() / SEGMENT_FRAMES as f64;
            let xc: Vec<f64> = xs.iter().map(|v| v - mx).collect();
            let yc: Vec<f64> = yp.iter().map(|v| v - my).collect();
            let nx = l2(&xc) + f64::EPSILON;
            let ny = l2(&yc) + f64::EPSILON;
            total += xc.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>() / (nx * ny);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// [`stoi`] wrapped with identifiers for reporting.
pub fn stoi_score(
    clean: &Waveform,
    degraded: &Waveform,
    clean_ref: impl Into<String>,
    degraded_ref: impl Into<String>,
) -> Result<IntelligibilityScore> {
    Ok(IntelligibilityScore {
        value: stoi(clean, degraded)?.clamp(0.0, 1.0),
        clean_ref: clean_ref.into(),
        degraded: degraded_ref.into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synth_speech;

    #[test]
    fn band_layout() {
        let bands = band_bins();
        assert_eq!(bands.len(), 15);
        // 150 Hz band lower edge ~133 Hz -> bin 7 at 19.53 Hz spacing
        assert_eq!(bands[0].0, 7);
        assert!(bands
            .windows(2)
            .all(|w| w[0].1 == w[1].0 || w[0].1 + 1 >= w[1].0));
    }

    #[test]
    fn identical_is_one() {
        let x = synth_speech(2.0, 16000, 5).unwrap();
        assert!((stoi(&x, &x).unwrap() - 1.0).abs() < 1e-6);
        let scaled = Waveform::new(x.samples().iter().map(|v| v * 3.7).collect(), 16000).unwrap();
        assert!((stoi(&x, &scaled).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let x = synth_speech(2.0, 16000, 5).unwrap();
        let short = x.fit_to(2000);
        assert!(matches!(stoi(&short, &short), Err(Error::TooShort(_))));
        let low = Waveform::new(vec![0.1; 8000], 8000).unwrap();
        assert!(matches!(stoi(&low, &low), Err(Error::Unsupported(_))));
        let silent = Waveform::zeros(x.len(), 16000).unwrap();
        assert!(matches!(stoi(&x, &silent), Err(Error::Degenerate(_))));
        assert!(matches!(stoi(&x, &x.fit_to(100)), Err(Error::Dimension(_))));
    }
}
