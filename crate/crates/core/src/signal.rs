//! Waveforms, chopping masks and design signals.
//!
//! Every message is split across the loudspeakers by a family of smooth masks
//! that sum to one at every sample. A design signal is either the chopped
//! message itself or a chopped Gaussian noise burst sequence.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Error, Result};

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Truncates or zero-pads to exactly `len` samples.
    pub fn fit_to(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

/// Rising (or falling) cos² transition over `len` samples.
///
/// The rising edge goes from exactly 0 at the first sample to exactly 1 at
/// the last; the falling edge is its time reversal.
pub fn tukey_edge(len: usize, rising: bool) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(invalid(format!("transition length {len} < 2")));
    }
    let denom = (len - 1) as f64;
    let mut edge: Vec<f64> = (0..len)
        .map(|n| {
            let c = (FRAC_PI_2 * (1.0 - n as f64 / denom)).cos();
            c * c
        })
        .collect();
    // cos(pi/2) is not exactly zero in floating point
    edge[0] = 0.0;
    edge[len - 1] = 1.0;
    if !rising {
        edge.reverse();
    }
    Ok(edge)
}

/// K×L family of chopping masks, one partition of unity per user.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    masks: Vec<Vec<Vec<f64>>>,
    transition_len: usize,
    flat_len: usize,
    seed: u64,
}

impl MaskSet {
    /// Builds a mask set from explicit values; each user's masks must share a
    /// common length across all users.
    pub fn from_masks(
        masks: Vec<Vec<Vec<f64>>>,
        transition_len: usize,
        flat_len: usize,
    ) -> Result<Self> {
        let len = masks
            .first()
            .and_then(|row| row.first())
            .map(Vec::len)
            .ok_or_else(|| dim("empty mask set"))?;
        let loudspeakers = masks[0].len();
        for row in &masks {
            if row.len() != loudspeakers || row.iter().any(|m| m.len() != len) {
                return Err(dim("ragged mask set"));
            }
        }
        Ok(Self {
            masks,
            transition_len,
            flat_len,
            seed: 0,
        })
    }

    pub fn users(&self) -> usize {
        self.masks.len()
    }

    pub fn loudspeakers(&self) -> usize {
        self.masks[0].len()
    }

    pub fn len(&self) -> usize {
        self.masks[0][0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mask(&self, k: usize, l: usize) -> &[f64] {
        &self.masks[k][l]
    }

    pub fn transition_len(&self) -> usize {
        self.transition_len
    }

    pub fn flat_len(&self) -> usize {
        self.flat_len
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Largest deviation of Σ_ℓ w_kℓ[n] from one over all users and samples.
    pub fn max_partition_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.masks {
            for n in 0..self.len() {
                let sum: f64 = row.iter().map(|m| m[n]).sum();
                worst = worst.max((sum - 1.0).abs());
            }
        }
        worst
    }
}

/// Generates `users` independent partitions of `[0, len)` into crossfaded
/// segments spread over `loudspeakers` masks.
///
/// Plateau lengths are drawn uniformly from `[flat_len, 2 * flat_len]`;
/// consecutive segments always go to different loudspeakers.
pub fn generate_masks(
    users: usize,
    loudspeakers: usize,
    len: usize,
    transition_len: usize,
    flat_len: usize,
    seed: u64,
) -> Result<MaskSet> {
    if users == 0 {
        return Err(invalid("at least one user required"));
    }
    if loudspeakers < 2 {
        return Err(invalid(format!(
            "need at least 2 loudspeakers, got {loudspeakers}"
        )));
    }
    if len < 2 * transition_len + flat_len {
        return Err(invalid(format!(
            "signal length {len} cannot fit one segment (2T + D = {})",
            2 * transition_len + flat_len
        )));
    }
    let rise = tukey_edge(transition_len, true)?;
    let fall = tukey_edge(transition_len, false)?;

    let masks = (0..users)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut row = vec![vec![0.0; len]; loudspeakers];
            let mut owner = rng.random_range(0..loudspeakers);
            let mut pos = 0;
            loop {
                let plateau = rng.random_range(flat_len..=2 * flat_len);
                if pos + plateau + transition_len + flat_len > len {
                    row[owner][pos..].fill(1.0);
                    break;
                }
                row[owner][pos..pos + plateau].fill(1.0);
                pos += plateau;
                // uniform over the other L-1 loudspeakers
                let mut next = rng.random_range(0..loudspeakers - 1);
                if next >= owner {
                    next += 1;
                }
                row[owner][pos..pos + transition_len].copy_from_slice(&fall);
                row[next][pos..pos + transition_len].copy_from_slice(&rise);
                pos += transition_len;
                owner = next;
            }
            row
        })
        .collect();

    Ok(MaskSet {
        masks,
        transition_len,
        flat_len,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    /// The message itself, chopped by the masks.
    #[serde(rename = "speech")]
    ChoppedSpeech,
    /// Unit-variance Gaussian noise, chopped by the masks.
    #[serde(rename = "noise")]
    ChoppedNoise,
}

impl std::str::FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speech" => Ok(Self::ChoppedSpeech),
            "noise" => Ok(Self::ChoppedNoise),
            other => Err(invalid(format!("unknown design signal '{other}'"))),
        }
    }
}

impl std::fmt::Display for DesignKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ChoppedSpeech => "speech",
            Self::ChoppedNoise => "noise",
        })
    }
}

/// K×L design signals x̃_kℓ.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSignalSet {
    signals: Vec<Vec<Vec<f64>>>,
    kind: DesignKind,
    noise_seed: u64,
}

impl DesignSignalSet {
    /// Wraps explicit design signals (all of one common length).
    pub fn from_signals(signals: Vec<Vec<Vec<f64>>>, kind: DesignKind) -> Result<Self> {
        let len = signals
            .first()
            .and_then(|row| row.first())
            .map(Vec::len)
            .ok_or_else(|| dim("empty design set"))?;
        let loudspeakers = signals[0].len();
        if len == 0 {
            return Err(dim("design signals must be nonempty"));
        }
        for row in &signals {
            if row.len() != loudspeakers || row.iter().any(|s| s.len() != len) {
                return Err(dim("ragged design set"));
            }
        }
        Ok(Self {
            signals,
            kind,
            noise_seed: 0,
        })
    }

    pub fn users(&self) -> usize {
        self.signals.len()
    }

    pub fn loudspeakers(&self) -> usize {
        self.signals[0].len()
    }

    pub fn len(&self) -> usize {
        self.signals[0][0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn signal(&self, k: usize, l: usize) -> &[f64] {
        &self.signals[k][l]
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }
}

/// Unit-variance Gaussian stream for slot (k, ℓ), reproducible from `seed`.
pub fn noise_stream(seed: u64, k: usize, l: usize, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((k as u64) << 32) | l as u64);
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn make_design_signals(
    messages: &[Waveform],
    masks: &MaskSet,
    kind: DesignKind,
    noise_seed: u64,
) -> Result<DesignSignalSet> {
    if messages.len() != masks.users() {
        return Err(dim(format!(
            "{} messages for {} mask rows",
            messages.len(),
            masks.users()
        )));
    }
    let rate = messages[0].sample_rate();
    for (k, msg) in messages.iter().enumerate() {
        if msg.len() != masks.len() {
            return Err(dim(format!(
                "message {k} has {} samples, masks have {}",
                msg.len(),
                masks.len()
            )));
        }
        if msg.sample_rate() != rate {
            return Err(dim(format!(
                "message {k} sample rate {} != {rate}",
                msg.sample_rate()
            )));
        }
    }

    let signals = messages
        .iter()
        .enumerate()
        .map(|(k, msg)| {
            (0..masks.loudspeakers())
                .map(|l| {
                    let mask = masks.mask(k, l);
                    match kind {
                        DesignKind::ChoppedSpeech => {
                            msg.samples().iter().zip(mask).map(|(x, w)| x * w).collect()
                        }
                        DesignKind::ChoppedNoise => noise_stream(noise_seed, k, l, mask.len())
                            .into_iter()
                            .zip(mask)
                            .map(|(v, w)| v * w)
                            .collect(),
                    }
                })
                .collect()
        })
        .collect();

    Ok(DesignSignalSet {
        signals,
        kind,
        noise_seed,
    })
}

/// max over k, n of |Σ_ℓ x̃_kℓ[n] − x_k[n]| for a chopped-speech design.
pub fn anechoic_sum_check(design: &DesignSignalSet, messages: &[Waveform]) -> Result<f64> {
    if design.kind() != DesignKind::ChoppedSpeech {
        return Err(Error::InvalidUsage(
            "anechoic sum identity only holds for chopped-speech designs".into(),
        ));
    }
    if messages.len() != design.users() {
        return Err(dim("message count does not match design"));
    }
    let mut worst: f64 = 0.0;
    for (k, msg) in messages.iter().enumerate() {
        if msg.len() != design.len() {
            return Err(dim(format!("message {k} length mismatch")));
        }
        for (n, &x) in msg.samples().iter().enumerate() {
            let sum: f64 = (0..design.loudspeakers())
                .map(|l| design.signal(k, l)[n])
                .sum();
            worst = worst.max((sum - x).abs());
        }
    }
    Ok(worst)
}
