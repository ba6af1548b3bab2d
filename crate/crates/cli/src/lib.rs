//! Command-line pipeline around `echospot-core`: simulate room responses,
//! design spot filters, evaluate intelligibility and bundle the results.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

use std::path::Path;

pub use config::{Overrides, ScenarioConfig};
pub use error::{CliError, Result};
pub use pipeline::Layout;

/// Every stage in order; RIR simulation is skipped when RIRs come from disk.
pub fn run_all(cfg: &ScenarioConfig, out: &Path) -> Result<report::RunManifest> {
    cfg.validate()?;
    let layout = Layout::new(out);
    if cfg.room.is_some() {
        pipeline::simulate_rirs(cfg, &layout)?;
    }
    pipeline::design(cfg, &layout)?;
    pipeline::evaluate(cfg, &layout)?;
    report::report(cfg, &layout)
}
