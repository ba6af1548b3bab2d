//! Spot filters for private audio delivery.
//!
//! Messages are chopped into short crossfaded bursts spread over several
//! loudspeakers. Per-loudspeaker FIR filters are fitted by least squares so
//! that, after propagating through the room, the bursts recombine into the
//! intended message at a few listening spots and into noise elsewhere.

pub mod analysis;
pub mod conv;
pub mod error;
pub mod room;
pub mod signal;
pub mod solver;
pub mod synth;
pub mod wav;

pub use conv::{fft_conv, fft_corr, rank_feasibility, ConvDims, Feasibility, SystemOperator};
pub use error::{Error, Result};
pub use room::{Position, RirSet, ShoeboxSpec, SweepSpec};
pub use signal::{
    generate_masks, make_design_signals, tukey_edge, DesignKind, DesignSignalSet, MaskSet, Waveform,
};
pub use solver::{
    build_target, render, solve_cgnr, CgnrOptions, FilterSet, SolveReport, TargetSpec,
};
