//! Time alignment of receptions and the spot/control contrast table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::conv::fft_corr;
use crate::error::{invalid, Result};
use crate::signal::Waveform;

/// Lag in `0..=max_shift` maximizing Σ_n clean[n] · degraded[n + lag].
pub fn alignment_search(clean: &Waveform, degraded: &Waveform, max_shift: usize) -> usize {
    if clean.is_empty() || degraded.is_empty() {
        return 0;
    }
    let corr = match fft_corr(degraded.samples(), clean.samples()) {
        Ok(c) => c,
        Err(_) => return 0,
    };
    let zero = clean.len() - 1;
    let last = (zero + max_shift).min(corr.len() - 1);
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (lag, &v) in corr[zero..=last].iter().enumerate() {
        if v > best_val {
            best_val = v;
            best = lag;
        }
    }
    best
}

/// `degraded[shift..shift + len]`, zero-padded past the end.
pub fn aligned_segment(degraded: &Waveform, shift: usize, len: usize) -> Waveform {
    let mut out: Vec<f64> = degraded
        .samples()
        .iter()
        .skip(shift)
        .take(len)
        .copied()
        .collect();
    out.resize(len, 0.0);
    Waveform::new(out, degraded.sample_rate()).expect("samples come from a valid waveform")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationKind {
    Spot,
    Control,
    Crosstalk,
}

impl LocationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Spot => "spot",
            Self::Control => "control",
            Self::Crosstalk => "crosstalk",
        }
    }
}

/// One (message, location) STOI entry; `stoi` is `None` when the reception
/// was degenerate (silent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationScore {
    pub message: usize,
    pub location: String,
    pub kind: LocationKind,
    pub stoi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageContrast {
    pub message: usize,
    pub spot: f64,
    pub max_control: f64,
    pub max_crosstalk: f64,
    pub contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    pub rows: Vec<LocationScore>,
    pub summary: Vec<MessageContrast>,
}

impl ContrastReport {
    /// `message_id,location_id,location_kind,stoi` with `nan` for degenerate entries.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("message_id,location_id,location_kind,stoi\n");
        for r in &self.rows {
            let v = r
                .stoi
                .map_or_else(|| "nan".to_string(), |v| format!("{v:.6}"));
            writeln!(
                out,
                "{},{},{},{}",
                r.message,
                r.location,
                r.kind.as_str(),
                v
            )
            .unwrap();
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("message_id,spot,max_control,max_crosstalk,contrast\n");
        for s in &self.summary {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                s.message, s.spot, s.max_control, s.max_crosstalk, s.contrast
            )
            .unwrap();
        }
        out
    }
}

/// Per message: contrast = spot − max(max control, max crosstalk).
/// Degenerate scores count as 0.
pub fn contrast_report(rows: Vec<LocationScore>) -> Result<ContrastReport> {
    let messages: Vec<usize> = {
        let mut m: Vec<usize> = rows.iter().map(|r| r.message).collect();
        m.sort_unstable();
        m.dedup();
        m
    };
    if messages.is_empty() {
        return Err(invalid("empty score table"));
    }
    let mut summary = Vec::with_capacity(messages.len());
    for &k in &messages {
        let of = |kind: LocationKind| {
            rows.iter()
                .filter(move |r| r.message == k && r.kind == kind)
        };
        let spot = of(LocationKind::Spot)
            .next()
            .ok_or_else(|| invalid(format!("message {k} has no spot score")))?
            .stoi
            .unwrap_or(0.0);
        if of(LocationKind::Control).next().is_none() {
            return Err(invalid(format!("message {k} has no control scores")));
        }
        let max_of = |kind| of(kind).map(|r| r.stoi.unwrap_or(0.0)).fold(0.0, f64::max);
        let max_control = max_of(LocationKind::Control);
        let max_crosstalk = max_of(LocationKind::Crosstalk);
        summary.push(MessageContrast {
            message: k,
            spot,
            max_control,
            max_crosstalk,
            contrast: spot - max_control.max(max_crosstalk),
        });
    }
    Ok(ContrastReport { rows, summary })
}
