//! Room impulse responses: image-source shoebox simulation, exponential sine
//! sweep measurement, and on-disk RIR grids.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::conv::fft_conv;
use crate::error::{dim, invalid, Error, Result};
use crate::signal::Waveform;
use crate::wav::{read_wav, write_samples};

pub type Position = [f64; 3];

/// Half-width of the fractional-delay kernel; the kernel has 81 taps.
const KERNEL_HALF: i64 = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub room: [f64; 3],
    pub sources: Vec<Position>,
    pub receivers: Vec<Position>,
}

/// K×L impulse responses of common length and sample rate. Row k is a
/// listening point, column ℓ a loudspeaker.
#[derive(Debug, Clone, PartialEq)]
pub struct RirSet {
    rirs: Vec<Vec<Vec<f64>>>,
    sample_rate: u32,
    geometry: Option<Geometry>,
}

impl RirSet {
    /// Builds a set, zero-padding shorter responses to the longest one.
    pub fn new(mut rirs: Vec<Vec<Vec<f64>>>, sample_rate: u32) -> Result<Self> {
        if rirs.is_empty() || rirs[0].is_empty() {
            return Err(dim("RIR set must have at least one row and one column"));
        }
        if sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        let cols = rirs[0].len();
        let len = rirs.iter().flatten().map(Vec::len).max().unwrap_or(0);
        for (k, row) in rirs.iter_mut().enumerate() {
            if row.len() != cols {
                return Err(dim(format!(
                    "row {k} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            for (l, h) in row.iter_mut().enumerate() {
                if h.iter().any(|v| !v.is_finite()) {
                    return Err(invalid(format!("RIR ({k},{l}) has non-finite samples")));
                }
                if h.iter().all(|&v| v == 0.0) {
                    return Err(Error::Degenerate(format!("RIR ({k},{l}) is all zero")));
                }
                h.resize(len, 0.0);
            }
        }
        Ok(Self {
            rirs,
            sample_rate,
            geometry: None,
        })
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = Some(geometry);
        self
    }

    pub fn rows(&self) -> usize {
        self.rirs.len()
    }

    pub fn loudspeakers(&self) -> usize {
        self.rirs[0].len()
    }

    /// Common length P.
    pub fn len(&self) -> usize {
        self.rirs[0][0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn rir(&self, k: usize, l: usize) -> &[f64] {
        &self.rirs[k][l]
    }

    pub fn geometry(&self) -> Option<&Geometry> {
        self.geometry.as_ref()
    }

    /// Rows `range` as a new set (geometry is dropped).
    pub fn select_rows(&self, rows: impl IntoIterator<Item = usize>) -> Result<Self> {
        let rirs: Vec<_> = rows.into_iter().map(|k| self.rirs[k].clone()).collect();
        Self::new(rirs, self.sample_rate)
    }

    /// Rounds every sample to single precision, matching what a float WAV stores.
    pub fn quantized(&self) -> Self {
        let mut out = self.clone();
        out.rirs
            .iter_mut()
            .flatten()
            .flatten()
            .for_each(|v| *v = *v as f32 as f64);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShoeboxSpec {
    /// Room size along x, y, z in metres.
    pub dimensions: [f64; 3],
    /// Energy absorption per wall, ordered x=0, x=Lx, y=0, y=Ly, z=0, z=Lz.
    pub absorption: [f64; 6],
    pub max_order: u32,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
    pub sample_rate: u32,
}

fn default_speed_of_sound() -> f64 {
    343.0
}

impl ShoeboxSpec {
    /// Same absorption on all six walls.
    pub fn uniform(
        dimensions: [f64; 3],
        absorption: f64,
        max_order: u32,
        sample_rate: u32,
    ) -> Self {
        Self {
            dimensions,
            absorption: [absorption; 6],
            max_order,
            speed_of_sound: default_speed_of_sound(),
            sample_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidGeometry(format!(
                "room dimensions must be positive, got {:?}",
                self.dimensions
            )));
        }
        if self.absorption.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(invalid(format!(
                "absorption must lie in (0, 1], got {:?}",
                self.absorption
            )));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(invalid("speed of sound must be positive"));
        }
        if self.sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Position) -> bool {
        p.iter()
            .zip(&self.dimensions)
            .all(|(&x, &d)| x > 0.0 && x < d)
    }

    fn check_inside(&self, p: &Position, what: &str) -> Result<()> {
        if !self.contains(p) {
            return Err(Error::InvalidGeometry(format!(
                "{what} {p:?} is not strictly inside the room {:?}",
                self.dimensions
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Position,
    pub order: u32,
    /// Product of wall reflection coefficients along the path.
    pub reflection_gain: f64,
}

fn reflection_coefficient(absorption: f64) -> f64 {
    (1.0 - absorption).max(0.0).sqrt()
}

/// All image sources of reflection order ≤ `max_order`.
pub fn image_sources(spec: &ShoeboxSpec, source: &Position) -> Vec<ImageSource> {
    let n = spec.max_order as i64;
    let beta: Vec<f64> = spec
        .absorption
        .iter()
        .map(|&a| reflection_coefficient(a))
        .collect();
    // per axis: (coordinate, reflections off the low wall, reflections off the high wall)
    let axis = |ax: usize| -> Vec<(f64, u32, u32)> {
        let mut out = Vec::new();
        for lattice in -n..=n {
            for mirror in 0..2i64 {
                let low = (lattice - mirror).unsigned_abs() as u32;
                let high = lattice.unsigned_abs() as u32;
                if (low + high) as i64 > n {
                    continue;
                }
                let coord = (1 - 2 * mirror) as f64 * source[ax]
                    + 2.0 * lattice as f64 * spec.dimensions[ax];
                out.push((coord, low, high));
            }
        }
        out
    };
    let (xs, ys, zs) = (axis(0), axis(1), axis(2));
    let mut images = Vec::new();
    for &(x, xl, xh) in &xs {
        for &(y, yl, yh) in &ys {
            let partial = xl + xh + yl + yh;
            if partial > spec.max_order {
                continue;
            }
            for &(z, zl, zh) in &zs {
                let order = partial + zl + zh;
                if order > spec.max_order {
                    continue;
                }
                let gain = beta[0].powi(xl as i32)
                    * beta[1].powi(xh as i32)
                    * beta[2].powi(yl as i32)
                    * beta[3].powi(yh as i32)
                    * beta[4].powi(zl as i32)
                    * beta[5].powi(zh as i32);
                images.push(ImageSource {
                    position: [x, y, z],
                    order,
                    reflection_gain: gain,
                });
            }
        }
    }
    images
}

fn distance(a: &Position, b: &Position) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Adds `amplitude` at fractional sample position `delay` using an 81-tap
/// Hann-windowed sinc.
fn add_fractional_impulse(out: &mut [f64], delay: f64, amplitude: f64) {
    let centre = delay.round() as i64;
    let width = (2 * KERNEL_HALF + 1) as f64;
    for n in centre - KERNEL_HALF..=centre + KERNEL_HALF {
        if n < 0 || n as usize >= out.len() {
            continue;
        }
        let t = n as f64 - delay;
        let sinc = if t.abs() < 1e-12 {
            1.0
        } else {
            (PI * t).sin() / (PI * t)
        };
        let window = 0.5 * (1.0 + (2.0 * PI * t / width).cos());
        out[n as usize] += amplitude * sinc * window;
    }
}

/// Image-source impulse response from `source` to `receiver`, `len` samples.
pub fn simulate_shoebox(
    spec: &ShoeboxSpec,
    source: &Position,
    receiver: &Position,
    len: usize,
) -> Result<Waveform> {
    spec.validate()?;
    spec.check_inside(source, "source")?;
    spec.check_inside(receiver, "receiver")?;
    let fs = spec.sample_rate as f64;
    let direct = distance(source, receiver) / spec.speed_of_sound * fs;
    if (len as f64) <= direct.ceil() {
        return Err(invalid(format!(
            "RIR length {len} does not cover the direct-path delay of {direct:.1} samples"
        )));
    }
    let mut out = vec![0.0; len];
    for image in image_sources(spec, source) {
        if image.reflection_gain == 0.0 {
            continue;
        }
        let d = distance(&image.position, receiver);
        let delay = d / spec.speed_of_sound * fs;
        if delay - KERNEL_HALF as f64 >= len as f64 {
            continue;
        }
        add_fractional_impulse(&mut out, delay, image.reflection_gain / (4.0 * PI * d));
    }
    Waveform::new(out, spec.sample_rate)
}

/// Simulates the full receivers × sources grid.
pub fn simulate_grid(
    spec: &ShoeboxSpec,
    sources: &[Position],
    receivers: &[Position],
    len: usize,
) -> Result<RirSet> {
    let rirs = receivers
        .iter()
        .map(|r| {
            sources
                .iter()
                .map(|s| simulate_shoebox(spec, s, r, len).map(Waveform::into_samples))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(
        RirSet::new(rirs, spec.sample_rate)?.with_geometry(Geometry {
            room: spec.dimensions,
            sources: sources.to_vec(),
            receivers: receivers.to_vec(),
        }),
    )
}

/// Receiver positions displaced by isotropic Gaussian jitter (σ in metres),
/// kept at least 1 cm inside the walls.
pub fn jitter_positions(
    spec: &ShoeboxSpec,
    positions: &[Position],
    sigma: f64,
    seed: u64,
) -> Result<Vec<Position>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!(
            "jitter sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(positions.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    Ok(positions
        .iter()
        .map(|p| {
            let mut q = *p;
            for (ax, v) in q.iter_mut().enumerate() {
                *v = (*v + normal.sample(&mut rng)).clamp(0.01, spec.dimensions[ax] - 0.01);
            }
            q
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub f_start: f64,
    pub f_end: f64,
    /// Seconds.
    pub duration: f64,
    pub sample_rate: u32,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.f_start > 0.0 && self.f_start < self.f_end && self.f_end < nyquist) {
            return Err(invalid(format!(
                "sweep band must satisfy 0 < {} < {} < {nyquist}",
                self.f_start, self.f_end
            )));
        }
        if !(self.duration > 0.0) {
            return Err(invalid("sweep duration must be positive"));
        }
        Ok(())
    }

    fn rate_ln(&self) -> f64 {
        (self.f_end / self.f_start).ln()
    }

    /// Instantaneous frequency at time `t` seconds.
    pub fn instantaneous_frequency(&self, t: f64) -> f64 {
        self.f_start * (t * self.rate_ln() / self.duration).exp()
    }

    pub fn len(&self) -> usize {
        (self.duration * self.sample_rate as f64).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub sweep: Waveform,
    pub inverse_filter: Waveform,
}

/// Exponential sine sweep and its amplitude-compensated time reverse,
/// scaled so that the round trip peaks at exactly 1.
pub fn ess_generate(spec: &SweepSpec) -> Result<Sweep> {
    spec.validate()?;
    let len = spec.len();
    if len < 2 {
        return Err(invalid("sweep shorter than two samples"));
    }
    let fs = spec.sample_rate as f64;
    let ln_r = spec.rate_ln();
    let k = 2.0 * PI * spec.f_start * spec.duration / ln_r;
    let sweep: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            (k * ((t * ln_r / spec.duration).exp() - 1.0)).sin()
        })
        .collect();
    // reversed sweep, attenuated by 6 dB/octave toward low frequencies
    let mut inverse: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            sweep[len - 1 - n] * (-t * ln_r / spec.duration).exp()
        })
        .collect();
    let round_trip = fft_conv(&sweep, &inverse)?;
    let peak = round_trip[len - 1];
    inverse.iter_mut().for_each(|v| *v /= peak);
    Ok(Sweep {
        sweep: Waveform::new(sweep, spec.sample_rate)?,
        inverse_filter: Waveform::new(inverse, spec.sample_rate)?,
    })
}

/// Recovers `len` samples of the linear impulse response from a sweep
/// recording.
pub fn ess_deconvolve(
    recording: &Waveform,
    inverse_filter: &Waveform,
    len: usize,
) -> Result<Waveform> {
    if recording.len() < inverse_filter.len() {
        return Err(dim(format!(
            "recording ({} samples) is shorter than the inverse filter ({})",
            recording.len(),
            inverse_filter.len()
        )));
    }
    if recording.sample_rate() != inverse_filter.sample_rate() {
        return Err(dim("recording and inverse filter sample rates differ"));
    }
    if recording.samples().iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate(
            "recording is silent; recovered RIR would be all zero".into(),
        ));
    }
    let full = fft_conv(recording.samples(), inverse_filter.samples())?;
    let start = inverse_filter.len() - 1;
    let mut out: Vec<f64> = full.into_iter().skip(start).take(len).collect();
    out.resize(len, 0.0);
    Waveform::new(out, recording.sample_rate())
}

/// Ideal band-pass: zeroes every FFT bin outside `[lo, hi]` Hz.
pub fn band_limit(x: &[f64], sample_rate: u32, lo: f64, hi: f64) -> Vec<f64> {
    use realfft::RealFftPlanner;
    let n = x.len().next_power_of_two().max(2) * 2;
    let mut planner = RealFftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = vec![0.0; n];
    buf[..x.len()].copy_from_slice(x);
    let mut spec = fwd.make_output_vec();
    fwd.process(&mut buf, &mut spec).expect("plan sizes");
    let df = sample_rate as f64 / n as f64;
    for (i, c) in spec.iter_mut().enumerate() {
        let f = i as f64 * df;
        if f < lo || f > hi {
            *c = realfft::num_complex::Complex64::new(0.0, 0.0);
        }
    }
    spec[0].im = 0.0;
    let last = spec.len() - 1;
    spec[last].im = 0.0;
    inv.process(&mut spec, &mut buf).expect("plan sizes");
    buf.truncate(x.len());
    buf.iter_mut().for_each(|v| *v /= n as f64);
    buf
}

/// Conventional file name of slot (k, ℓ) inside an RIR or filter directory.
pub fn slot_file_name(prefix: &str, k: usize, l: usize) -> String {
    format!("{prefix}_k{k}_l{l}.wav")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridManifest {
    pub rows: usize,
    pub loudspeakers: usize,
    pub length: usize,
    pub sample_rate: u32,
    pub geometry: Option<Geometry>,
}

pub const RIR_MANIFEST: &str = "manifest.toml";

/// Loads a K×L grid of RIR files.
pub fn load_rirs(paths: &[Vec<PathBuf>]) -> Result<RirSet> {
    let mut rate = None;
    let mut rirs = Vec::with_capacity(paths.len());
    for (k, row) in paths.iter().enumerate() {
        let mut out_row = Vec::with_capacity(row.len());
        for (l, path) in row.iter().enumerate() {
            if !path.is_file() {
                return Err(Error::MissingRir {
                    k,
                    l,
                    path: path.display().to_string(),
                });
            }
            let w = read_wav(path)?;
            match rate {
                None => rate = Some(w.sample_rate()),
                Some(r) if r != w.sample_rate() => {
                    return Err(Error::Config(format!(
                        "RIR ({k},{l}) at {} Hz, expected {r} Hz",
                        w.sample_rate()
                    )))
                }
                _ => {}
            }
            out_row.push(w.into_samples());
        }
        rirs.push(out_row);
    }
    RirSet::new(rirs, rate.ok_or_else(|| dim("no RIR files given"))?)
}

pub fn save_rirs(set: &RirSet, paths: &[Vec<PathBuf>]) -> Result<()> {
    if paths.len() != set.rows() || paths.iter().any(|r| r.len() != set.loudspeakers()) {
        return Err(dim("path grid does not match the RIR set shape"));
    }
    for (k, row) in paths.iter().enumerate() {
        for (l, path) in row.iter().enumerate() {
            write_samples(path, set.rir(k, l), set.sample_rate())?;
        }
    }
    Ok(())
}

fn grid_paths(dir: &Path, prefix: &str, rows: usize, cols: usize) -> Vec<Vec<PathBuf>> {
    (0..rows)
        .map(|k| {
            (0..cols)
                .map(|l| dir.join(slot_file_name(prefix, k, l)))
                .collect()
        })
        .collect()
}

/// Writes `rir_k{k}_l{l}.wav` files plus a manifest into `dir`.
pub fn save_rir_dir(set: &RirSet, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_rirs(set, &grid_paths(dir, "rir", set.rows(), set.loudspeakers()))?;
    let manifest = GridManifest {
        rows: set.rows(),
        loudspeakers: set.loudspeakers(),
        length: set.len(),
        sample_rate: set.sample_rate(),
        geometry: set.geometry.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(dir.join(RIR_MANIFEST), text)?;
    Ok(())
}

/// Reads a directory written by [`save_rir_dir`].
pub fn load_rir_dir(dir: &Path) -> Result<RirSet> {
    let text = std::fs::read_to_string(dir.join(RIR_MANIFEST))?;
    let manifest: GridManifest = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let set = load_rirs(&grid_paths(
        dir,
        "rir",
        manifest.rows,
        manifest.loudspeakers,
    ))?;
    if set.sample_rate() != manifest.sample_rate {
        return Err(Error::Config(format!(
            "manifest says {} Hz, files are {} Hz",
            manifest.sample_rate,
            set.sample_rate()
        )));
    }
    Ok(match manifest.geometry {
        Some(g) => set.with_geometry(g),
        None => set,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> ShoeboxSpec {
        ShoeboxSpec::uniform([10.0, 6.0, 3.0], 0.8, 0, 16000)
    }

    #[test]
    fn direct_path_only() {
        let spec = room();
        let s = [2.0, 3.0, 1.5];
        let r = [5.43, 3.0, 1.5];
        let h = simulate_shoebox(&spec, &s, &r, 400).unwrap();
        let (peak_idx, peak) = h
            .samples()
            .iter()
            .enumerate()
            .fold(
                (0, 0.0),
                |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc },
            );
        assert_eq!(peak_idx, 160);
        assert!((peak - 1.0 / (4.0 * PI * 3.43)).abs() < 1e-9);
    }

    #[test]
    fn inverse_distance_law() {
        let spec = room();
        let s = [1.0, 3.0, 1.5];
        let near = simulate_shoebox(&spec, &s, &[4.43, 3.0, 1.5], 800)
            .unwrap()
            .peak();
        let far = simulate_shoebox(&spec, &s, &[7.86, 3.0, 1.5], 800)
            .unwrap()
            .peak();
        assert!((near / far - 2.0).abs() < 1e-9);
    }

    #[test]
    fn direct_path_reciprocity() {
        let spec = room();
        let a = [1.3, 2.2, 1.1];
        let b = [7.7, 4.1, 2.4];
        let ab = simulate_shoebox(&spec, &a, &b, 1000).unwrap();
        let ba = simulate_shoebox(&spec, &b, &a, 1000).unwrap();
        for (x, y) in ab.samples().iter().zip(ba.samples()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn geometry_errors() {
        let spec = room();
        let inside = [1.0, 1.0, 1.0];
        assert!(matches!(
            simulate_shoebox(&spec, &[11.0, 1.0, 1.0], &inside, 1000),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(matches!(
            simulate_shoebox(&spec, &inside, &[1.0, 0.0, 1.0], 1000),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(matches!(
            simulate_shoebox(&spec, &inside, &[9.0, 1.0, 1.0], 100),
            Err(Error::InvalidParameter(_))
        ));
        let mut bad = room();
        bad.absorption[2] = 0.0;
        assert!(simulate_shoebox(&bad, &inside, &[2.0, 1.0, 1.0], 1000).is_err());
    }

    #[test]
    fn second_order_image_count() {
        let spec = ShoeboxSpec::uniform([10.0, 6.0, 3.0], 0.8, 2, 16000);
        assert_eq!(image_sources(&spec, &[1.0, 2.0, 0.7]).len(), 25);
    }

    #[test]
    fn sweep_band_validation() {
        let bad = SweepSpec {
            f_start: 100.0,
            f_end: 9000.0,
            duration: 1.0,
            sample_rate: 16000,
        };
        assert!(ess_generate(&bad).is_err());
        let bad = SweepSpec {
            f_start: 0.0,
            ..bad
        };
        assert!(ess_generate(&bad).is_err());
    }

    #[test]
    fn sweep_frequency_endpoints() {
        let spec = SweepSpec {
            f_start: 50.0,
            f_end: 7000.0,
            duration: 2.0,
            sample_rate: 16000,
        };
        assert!((spec.instantaneous_frequency(0.0) - 50.0).abs() < 1e-9);
        assert!((spec.instantaneous_frequency(2.0) - 7000.0).abs() < 1e-6);
    }

    #[test]
    fn deconvolve_errors() {
        let spec = SweepSpec {
            f_start: 50.0,
            f_end: 7000.0,
            duration: 0.25,
            sample_rate: 16000,
        };
        let sweep = ess_generate(&spec).unwrap();
        let short = Waveform::zeros(10, 16000).unwrap();
        assert!(matches!(
            ess_deconvolve(&short, &sweep.inverse_filter, 100),
            Err(Error::Dimension(_))
        ));
        let silent = Waveform::zeros(8000, 16000).unwrap();
        assert!(matches!(
            ess_deconvolve(&silent, &sweep.inverse_filter, 100),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn delta_round_trip() {
        let spec = SweepSpec {
            f_start: 50.0,
            f_end: 7000.0,
            duration: 1.0,
            sample_rate: 16000,
        };
        let s = ess_generate(&spec).unwrap();
        let h = ess_deconvolve(&s.sweep, &s.inverse_filter, 256).unwrap();
        assert!((h.samples()[0] - 1.0).abs() <= 0.01);
        assert!(h.samples()[1..].iter().all(|v| v.abs() < h.samples()[0]));
    }

    #[test]
    fn rir_set_pads_and_rejects_zero() {
        let set = RirSet::new(vec![vec![vec![1.0], vec![0.0, 0.5, 0.25]]], 8000).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.rir(0, 0), &[1.0, 0.0, 0.0]);
        assert!(matches!(
            RirSet::new(vec![vec![vec![0.0; 4]]], 8000),
            Err(Error::Degenerate(_))
        ));
        assert!(RirSet::new(vec![vec![vec![1.0]], vec![]], 8000).is_err());
    }

    #[test]
    fn jitter_zero_is_identity() {
        let spec = room();
        let p = vec![[1.0, 2.0, 1.0], [4.0, 4.0, 2.0]];
        assert_eq!(jitter_positions(&spec, &p, 0.0, 1).unwrap(), p);
        let q = jitter_positions(&spec, &p, 0.05, 1).unwrap();
        assert_ne!(q, p);
        assert_eq!(q, jitter_positions(&spec, &p, 0.05, 1).unwrap());
        assert!(q.iter().all(|x| spec.contains(x)));
    }
}
