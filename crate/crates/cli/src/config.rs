//! Scenario configuration: TOML file, built-in default scenario, command-line
//! overrides and validation.

use std::path::{Path, PathBuf};

use echospot_core::{DesignKind, Position, ShoeboxSpec};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// One message: a synthetic utterance seed or a mono WAV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MessageSource {
    Synth { synth: u64 },
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub dimensions: [f64; 3],
    pub absorption: f64,
    pub max_order: u32,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
}

fn default_speed_of_sound() -> f64 {
    343.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub loudspeakers: Vec<Position>,
    pub spots: Vec<Position>,
    pub controls: Vec<Position>,
}

/// Pre-measured RIR grids written in the `rir_k{k}_l{l}.wav` + manifest layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RirDirs {
    pub design: PathBuf,
    /// Rows: the K spots followed by the controls.
    pub evaluation: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskConfig {
    pub transition: usize,
    pub flat: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub signal: DesignKind,
    pub noise_seed: u64,
    pub filter_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    #[serde(default)]
    pub damping: f64,
    /// Target delay in samples; defaults to the RIR-peak rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Receiver jitter in metres applied to the evaluation RIRs.
    pub mismatch_sigma: f64,
    pub jitter_seed: u64,
    pub coherence_pairs: usize,
    pub coherence_seed: u64,
    pub welch_segment: usize,
    /// Band in Hz over which coherence is averaged.
    pub coherence_band: [f64; 2],
    /// Lags written to the autocorrelation CSV.
    pub autocorr_lags: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sample_rate: u32,
    /// Message length in seconds; messages are trimmed or zero-padded to it.
    pub duration: f64,
    /// RIR length P in samples.
    pub rir_length: usize,
    pub messages: Vec<MessageSource>,
    pub geometry: GeometryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<RoomConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rirs: Option<RirDirs>,
    pub masks: MaskConfig,
    pub design: DesignConfig,
    pub solver: SolverConfig,
    pub evaluation: EvaluationConfig,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub design_signal: Option<DesignKind>,
    pub mismatch_sigma: Option<f64>,
    pub max_iters: Option<usize>,
}

impl Default for ScenarioConfig {
    /// Desk-scale scenario: 10 m × 6 m × 3 m room, six loudspeakers, two
    /// spots, three controls, 4 s messages at 16 kHz.
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            duration: 4.0,
            rir_length: 4000,
            messages: vec![
                MessageSource::Synth { synth: 100 },
                MessageSource::Synth { synth: 101 },
            ],
            geometry: GeometryConfig {
                loudspeakers: vec![
                    [0.5, 0.7, 1.2],
                    [4.2, 0.4, 1.8],
                    [9.3, 1.1, 1.0],
                    [9.6, 5.2, 2.1],
                    [5.5, 5.6, 1.4],
                    [0.8, 4.9, 2.5],
                ],
                spots: vec![[3.0, 2.5, 1.2], [6.5, 3.8, 1.3]],
                controls: vec![[2.0, 4.5, 1.5], [7.8, 1.6, 1.1], [5.0, 3.0, 1.7]],
            },
            room: Some(RoomConfig {
                dimensions: [10.0, 6.0, 3.0],
                absorption: 0.3,
                max_order: 20,
                speed_of_sound: default_speed_of_sound(),
            }),
            rirs: None,
            masks: MaskConfig {
                transition: 160,
                flat: 1600,
                seed: 1,
            },
            design: DesignConfig {
                signal: DesignKind::ChoppedNoise,
                noise_seed: 1,
                filter_len: 16384,
            },
            solver: SolverConfig {
                max_iters: 1000,
                rel_tol: 1e-4,
                damping: 0.0,
                delay: None,
            },
            evaluation: EvaluationConfig {
                mismatch_sigma: 0.0,
                jitter_seed: 1,
                coherence_pairs: 50,
                coherence_seed: 1,
                welch_segment: 512,
                coherence_band: [100.0, 7000.0],
                autocorr_lags: 4000,
            },
        }
    }
}

impl ScenarioConfig {
    /// Parses a TOML file; relative message and RIR paths resolve against
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for m in &mut self.messages {
            if let MessageSource::File { path } = m {
                fix(path);
            }
        }
        if let Some(dirs) = &mut self.rirs {
            fix(&mut dirs.design);
            fix(&mut dirs.evaluation);
        }
    }

    /// `--seed` replaces the mask, noise, jitter and coherence seeds and
    /// offsets synthetic message seeds by 10 × seed.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.masks.seed = seed;
            self.design.noise_seed = seed;
            self.evaluation.jitter_seed = seed;
            self.evaluation.coherence_seed = seed;
            for m in &mut self.messages {
                if let MessageSource::Synth { synth } = m {
                    *synth = synth.wrapping_add(seed.wrapping_mul(10));
                }
            }
        }
        if let Some(kind) = o.design_signal {
            self.design.signal = kind;
        }
        if let Some(sigma) = o.mismatch_sigma {
            self.evaluation.mismatch_sigma = sigma;
        }
        if let Some(iters) = o.max_iters {
            self.solver.max_iters = iters;
        }
    }

    pub fn users(&self) -> usize {
        self.messages.len()
    }

    pub fn loudspeakers(&self) -> usize {
        self.geometry.loudspeakers.len()
    }

    /// Message length N in samples.
    pub fn signal_len(&self) -> usize {
        (self.duration * self.sample_rate as f64).round() as usize
    }

    pub fn shoebox(&self) -> Option<ShoeboxSpec> {
        self.room.as_ref().map(|r| ShoeboxSpec {
            dimensions: r.dimensions,
            absorption: [r.absorption; 6],
            max_order: r.max_order,
            speed_of_sound: r.speed_of_sound,
            sample_rate: self.sample_rate,
        })
    }

    /// Evaluation point ids, spots first.
    pub fn location_ids(&self) -> Vec<String> {
        let spots = (0..self.geometry.spots.len()).map(|k| format!("spot{k}"));
        let controls = (0..self.geometry.controls.len()).map(|j| format!("control{j}"));
        spots.chain(controls).collect()
    }

    /// Checks everything that can be checked before any computation.
    pub fn validate(&self) -> Result<()> {
        let k = self.users();
        if k == 0 {
            return Err(config("at least one message is required"));
        }
        if self.geometry.spots.len() != k {
            return Err(config(format!(
                "{k} messages but {} spots; each message needs one spot",
                self.geometry.spots.len()
            )));
        }
        if self.loudspeakers() < 2 {
            return Err(config(format!(
                "need at least 2 loudspeakers, got {}",
                self.loudspeakers()
            )));
        }
        if self.geometry.controls.is_empty() {
            return Err(config("at least one control location is required"));
        }
        if self.sample_rate < echospot_core::analysis::stoi::STOI_RATE {
            return Err(config(format!(
                "sample rate {} Hz is below the 10 kHz intelligibility analysis rate",
                self.sample_rate
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(config("duration must be positive"));
        }
        if self.rir_length < 2 {
            return Err(config("rir_length must be at least 2"));
        }
        for m in &self.messages {
            if let MessageSource::File { path } = m {
                if !path.is_file() {
                    return Err(config(format!(
                        "message file {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        let m = &self.masks;
        if m.transition < 2 || m.flat < 1 {
            return Err(config("masks need transition >= 2 and flat >= 1"));
        }
        if self.signal_len() < 2 * m.transition + m.flat {
            return Err(config(format!(
                "messages of {} samples cannot hold one mask segment (2T + D = {})",
                self.signal_len(),
                2 * m.transition + m.flat
            )));
        }
        if self.design.filter_len == 0 {
            return Err(config("filter_len must be positive"));
        }
        let s = &self.solver;
        if s.max_iters == 0 {
            return Err(config("max_iters must be at least 1"));
        }
        if !(s.rel_tol > 0.0 && s.rel_tol < 1.0) {
            return Err(config(format!("rel_tol {} outside (0, 1)", s.rel_tol)));
        }
        if !(s.damping >= 0.0 && s.damping.is_finite()) {
            return Err(config("damping must be non-negative"));
        }
        if let Some(d) = s.delay {
            let max = self.design.filter_len + self.rir_length - 2;
            if d > max {
                return Err(config(format!("delay {d} exceeds M + P - 2 = {max}")));
            }
        }
        let e = &self.evaluation;
        if !(e.mismatch_sigma >= 0.0 && e.mismatch_sigma.is_finite()) {
            return Err(config("mismatch_sigma must be non-negative"));
        }
        if e.coherence_pairs == 0 {
            return Err(config("coherence_pairs must be at least 1"));
        }
        if e.welch_segment < 64 {
            return Err(config("welch_segment must be at least 64"));
        }
        if !(e.coherence_band[0] >= 0.0 && e.coherence_band[0] < e.coherence_band[1]) {
            return Err(config(
                "coherence_band must be an increasing pair of frequencies",
            ));
        }

        match (&self.room, &self.rirs) {
            (Some(_), Some(_)) => return Err(config("give either [room] or [rirs], not both")),
            (None, None) => {
                return Err(config(
                    "either a [room] spec or [rirs] directories are required",
                ))
            }
            (Some(_), None) => {
                let spec = self.shoebox().expect("room present");
                spec.validate().map_err(|e| config(e.to_string()))?;
                let g = &self.geometry;
                let named = g
                    .loudspeakers
                    .iter()
                    .map(|p| ("loudspeaker", p))
                    .chain(g.spots.iter().map(|p| ("spot", p)))
                    .chain(g.controls.iter().map(|p| ("control", p)));
                for (what, p) in named {
                    if !spec.contains(p) {
                        return Err(config(format!("{what} {p:?} is outside the room")));
                    }
                }
            }
            (None, Some(dirs)) => {
                if e.mismatch_sigma > 0.0 {
                    return Err(config(
                        "mismatch_sigma > 0 needs a [room] spec to re-simulate RIRs",
                    ));
                }
                for d in [&dirs.design, &dirs.evaluation] {
                    if !d.is_dir() {
                        return Err(config(format!(
                            "RIR directory {} does not exist",
                            d.display()
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_feasible() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.signal_len(), 64000);
        let m = cfg.design.filter_len as i64;
        assert_eq!(m * 5 - (4000 + 64000 - 2), 81920 - 67998);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn seed_override() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply(&Overrides {
            seed: Some(3),
            max_iters: Some(7),
            ..Overrides::default()
        });
        assert_eq!(cfg.masks.seed, 3);
        assert_eq!(cfg.evaluation.jitter_seed, 3);
        assert_eq!(cfg.messages[1], MessageSource::Synth { synth: 131 });
        assert_eq!(cfg.solver.max_iters, 7);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ScenarioConfig::default();
        c.messages.clear();
        assert!(c.validate().is_err());

        let mut c = ScenarioConfig::default();
        c.geometry.spots.pop();
        assert!(c.validate().is_err());

        let mut c = ScenarioConfig::default();
        c.geometry.controls[0] = [11.0, 1.0, 1.0];
        assert!(c.validate().is_err());

        let mut c = ScenarioConfig::default();
        c.messages[0] = MessageSource::File {
            path: "/nonexistent/x.wav".into(),
        };
        assert!(c.validate().is_err());

        let mut c = ScenarioConfig::default();
        c.solver.rel_tol = 0.0;
        assert!(c.validate().is_err());

        assert!(ScenarioConfig::from_toml("sample_rate = 16000\nbogus = 1").is_err());
    }
}
