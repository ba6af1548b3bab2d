//! Rational polyphase resampling with a Kaiser-windowed sinc.

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::signal::Waveform;

/// Kaiser β for roughly 80 dB of stopband attenuation.
const KAISER_BETA: f64 = 7.857;
/// Filter half-length in units of max(up, down).
const HALF_LEN_FACTOR: usize = 10;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Resamples by `up / down` (reduced internally).
pub fn resample_poly(x: &[f64], up: usize, down: usize) -> Result<Vec<f64>> {
    if up == 0 || down == 0 {
        return Err(invalid("resampling factors must be positive"));
    }
    let g = gcd(up as u64, down as u64) as usize;
    let (up, down) = (up / g, down / g);
    if up == 1 && down == 1 {
        return Ok(x.to_vec());
    }
    let max = up.max(down);
    let half = HALF_LEN_FACTOR * max;
    let cutoff = 0.5 / max as f64;
    let i0_beta = bessel_i0(KAISER_BETA);
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let t = i as f64 - half as f64;
            let arg = 2.0 * cutoff * t;
            let sinc = if arg == 0.0 {
                1.0
            } else {
                (PI * arg).sin() / (PI * arg)
            };
            let r = t / half as f64;
            let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            up as f64 * 2.0 * cutoff * sinc * window
        })
        .collect();

    let out_len = (x.len() * up).div_ceil(down);
    let mut out = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let t = (j * down) as i64;
        let lo = (t - half as i64).max(0);
        let first = (lo + up as i64 - 1) / up as i64;
        let last = ((t + half as i64) / up as i64).min(x.len() as i64 - 1);
        let mut acc = 0.0;
        let mut i = first;
        while i <= last {
            let offset = t - i * up as i64 + half as i64;
            acc += x[i as usize] * kernel[offset as usize];
            i += 1;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Resamples a waveform to `rate` Hz.
pub fn resample_to(wave: &Waveform, rate: u32) -> Result<Waveform> {
    if wave.sample_rate() == rate {
        return Ok(wave.clone());
    }
    let samples = resample_poly(wave.samples(), rate as usize, wave.sample_rate() as usize)?;
    Waveform::new(samples, rate)
}
