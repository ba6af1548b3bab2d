//! Diagnostics for designed filters: column coherence, driving-signal
//! autocorrelation, residual decay, and intelligibility.

pub mod autocorr;
pub mod coherence;
pub mod contrast;
pub mod resample;
pub mod stoi;

pub use autocorr::{driving_autocorr, AutocorrReport};
pub use coherence::{
    coherence, column_coherence, column_coherence_with, welch_pair, CoherenceReport, ColumnId,
    PairSampling,
};
pub use contrast::{
    aligned_segment, alignment_search, contrast_report, ContrastReport, LocationKind,
    LocationScore, MessageContrast,
};
pub use resample::{resample_poly, resample_to};
pub use stoi::{stoi, stoi_score, IntelligibilityScore};

/// Residual history normalized by the target norm.
pub fn relative_residual_curve(history: &[f64], target_norm: f64) -> Vec<f64> {
    if target_norm == 0.0 {
        return vec![0.0; history.len()];
    }
    history.iter().map(|r| r / target_norm).collect()
}
