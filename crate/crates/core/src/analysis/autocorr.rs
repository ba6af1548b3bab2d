//! Normalized autocorrelation envelopes of loudspeaker driving signals.

use crate::conv::fft_corr;
use crate::error::{Error, Result};
use crate::signal::Waveform;

pub const DECAY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrReport {
    /// Non-negative lags in samples, shared by every envelope.
    pub lags: Vec<usize>,
    /// Per loudspeaker: |a_ss[n]| / a_ss[0].
    pub envelopes: Vec<Vec<f64>>,
    /// Per loudspeaker: first lag where the envelope drops below the threshold.
    pub first_below: Vec<Option<usize>>,
    /// Per loudspeaker: lag after which the envelope stays below the threshold.
    pub settled_below: Vec<Option<usize>>,
}

impl AutocorrReport {
    /// Largest settle lag across loudspeakers (`None` if any never settles).
    pub fn worst_settle_lag(&self) -> Option<usize> {
        self.settled_below
            .iter()
            .try_fold(0, |acc, v| v.map(|x| acc.max(x)))
    }

    pub fn mean_settle_lag(&self) -> Option<f64> {
        let n = self.settled_below.len() as f64;
        self.settled_below
            .iter()
            .try_fold(0.0, |acc, v| v.map(|x| acc + x as f64))
            .map(|s| s / n)
    }
}

/// Normalized autocorrelation magnitude of one signal over lags `0..len`.
pub fn normalized_envelope(x: &[f64]) -> Result<Vec<f64>> {
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate(
            "autocorrelation of an all-zero signal".into(),
        ));
    }
    let a = fft_corr(x, x)?;
    let centre = x.len() - 1;
    let zero = a[centre];
    Ok(a[centre..].iter().map(|v| v.abs() / zero).collect())
}

fn first_below(env: &[f64], threshold: f64) -> Option<usize> {
    env.iter().position(|&v| v < threshold)
}

fn settled_below(env: &[f64], threshold: f64) -> Option<usize> {
    match env.iter().rposition(|&v| v >= threshold) {
        Some(i) if i + 1 < env.len() => Some(i + 1),
        Some(_) => None,
        None => Some(0),
    }
}

pub fn driving_autocorr(driving: &[Waveform]) -> Result<AutocorrReport> {
    if driving.is_empty() {
        return Err(Error::Degenerate("no driving signals".into()));
    }
    let envelopes = driving
        .iter()
        .map(|s| normalized_envelope(s.samples()))
        .collect::<Result<Vec<_>>>()?;
    let len = envelopes.iter().map(Vec::len).max().unwrap_or(0);
    Ok(AutocorrReport {
        lags: (0..len).collect(),
        first_below: envelopes
            .iter()
            .map(|e| first_below(e, DECAY_THRESHOLD))
            .collect(),
        settled_below: envelopes
            .iter()
            .map(|e| settled_below(e, DECAY_THRESHOLD))
            .collect(),
        envelopes,
    })
}
