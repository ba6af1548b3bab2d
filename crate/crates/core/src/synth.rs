//! Deterministic speech-like test utterances.
//!
//! A small source-filter synthesizer: a glottal pulse train with a wandering
//! pitch contour drives three cascaded formant resonators, syllables are
//! shaped by smooth envelopes, and some syllables start with a fricative
//! noise burst. The result has the band-envelope modulation structure that
//! intelligibility metrics respond to, without shipping recorded speech.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::signal::Waveform;

/// (F1, F2, F3) in Hz for a handful of vowels.
const VOWELS: [[f64; 3]; 8] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [300.0, 870.0, 2240.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [660.0, 1720.0, 2410.0],
    [440.0, 1020.0, 2240.0],
    [390.0, 1990.0, 2550.0],
];

struct Resonator {
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new() -> Self {
        Self { y1: 0.0, y2: 0.0 }
    }

    fn step(&mut self, x: f64, freq: f64, bandwidth: f64, fs: f64) -> f64 {
        let r = (-PI * bandwidth / fs).exp();
        let b1 = 2.0 * r * (2.0 * PI * freq / fs).cos();
        let b2 = -r * r;
        let y = (1.0 - r) * x + b1 * self.y1 + b2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

struct Syllable {
    start: usize,
    len: usize,
    onset: usize,
    from: [f64; 3],
    to: [f64; 3],
    pitch_bump: f64,
}

/// Synthesizes `duration` seconds of speech-like signal, RMS-normalized to 0.1.
pub fn synth_speech(duration: f64, sample_rate: u32, seed: u64) -> Result<Waveform> {
    if !(duration > 0.0) {
        return Err(invalid("duration must be positive"));
    }
    if sample_rate < 8000 {
        return Err(invalid("speech synthesis needs at least 8 kHz"));
    }
    let fs = sample_rate as f64;
    let total = (duration * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let base_pitch = rng.random_range(95.0..210.0);
    let mut syllables = Vec::new();
    let mut t = rng.random_range(0.02..0.1);
    let mut since_pause = 0;
    while t < duration {
        let len = rng.random_range(0.12..0.32);
        let onset = if rng.random_bool(0.6) {
            rng.random_range(0.03..0.08)
        } else {
            0.0
        };
        let from = VOWELS[rng.random_range(0..VOWELS.len())];
        let to = VOWELS[rng.random_range(0..VOWELS.len())];
        syllables.push(Syllable {
            start: (t * fs) as usize,
            len: ((len + onset) * fs) as usize,
            onset: (onset * fs) as usize,
            from,
            to,
            pitch_bump: rng.random_range(-0.15..0.25),
        });
        t += len + onset + rng.random_range(0.03..0.12);
        since_pause += 1;
        if since_pause >= rng.random_range(5..10) {
            t += rng.random_range(0.15..0.4);
            since_pause = 0;
        }
    }

    let mut out = vec![0.0; total];
    let mut formants = [Resonator::new(), Resonator::new(), Resonator::new()];
    let mut fricative = Resonator::new();
    let mut phase = 0.0;
    for syl in &syllables {
        let fric_centre = rng.random_range(2500.0..5500.0_f64).min(0.45 * fs);
        for i in 0..syl.len {
            let n = syl.start + i;
            if n >= total {
                break;
            }
            let noise: f64 = rng.sample(StandardNormal);
            if i < syl.onset {
                let u = i as f64 / syl.onset as f64;
                let env = (PI * u).sin().powi(2);
                out[n] += 0.6 * env * fricative.step(noise, fric_centre, 1200.0, fs);
                continue;
            }
            let voiced_len = syl.len - syl.onset;
            let u = (i - syl.onset) as f64 / voiced_len as f64;
            let pitch = base_pitch
                * (1.0 + syl.pitch_bump * (PI * u).sin())
                * (1.0 - 0.15 * n as f64 / total as f64);
            phase += pitch / fs;
            // one glottal pulse per period, with a little aspiration noise
            let mut source = 0.05 * noise;
            if phase >= 1.0 {
                phase -= 1.0;
                source += 1.0;
            }
            let mut v = source;
            for (j, res) in formants.iter_mut().enumerate() {
                let f = syl.from[j] + (syl.to[j] - syl.from[j]) * u;
                let bw = 60.0 + 40.0 * j as f64;
                v = res.step(v, f.min(0.45 * fs), bw, fs) * 4.0;
            }
            let attack = (u / 0.12).min(1.0);
            let release = ((1.0 - u) / 0.25).min(1.0);
            let env = (0.5 - 0.5 * (PI * attack).cos()) * (0.5 - 0.5 * (PI * release).cos());
            out[n] += env * v;
        }
    }

    // remove DC, normalize level
    let mean = out.iter().sum::<f64>() / total.max(1) as f64;
    out.iter_mut().for_each(|v| *v -= mean);
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / total.max(1) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.1 / rms);
    }
    Waveform::new(out, sample_rate)
}
