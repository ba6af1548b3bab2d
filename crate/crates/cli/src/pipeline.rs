//! The staged pipeline. Every stage reads its inputs from the output
//! directory (or from the files named in the config) and writes its own
//! subdirectory, so later stages can be re-run without touching earlier ones.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use echospot_core::analysis::{
    aligned_segment, alignment_search, column_coherence, contrast_report, driving_autocorr,
    resample_to, stoi, ContrastReport, LocationKind, LocationScore,
};
use echospot_core::room::{
    jitter_positions, load_rir_dir, save_rir_dir, simulate_grid, slot_file_name, Geometry,
};
use echospot_core::solver::default_delay;
use echospot_core::synth::synth_speech;
use echospot_core::wav::{read_wav, write_samples, write_wav};
use echospot_core::{
    build_target, generate_masks, make_design_signals, rank_feasibility, render, solve_cgnr,
    CgnrOptions, ConvDims, DesignKind, Error as CoreError, Feasibility, FilterSet, RirSet,
    SolveReport, SystemOperator, TargetSpec, Waveform,
};
use serde::{Deserialize, Serialize};

use crate::config::{MessageSource, ScenarioConfig};
use crate::error::{config, io, CliError, Result};

pub const STAGE_SIMULATE: &str = "simulate-rirs";
pub const STAGE_DESIGN: &str = "design";
pub const STAGE_EVALUATE: &str = "evaluate";
pub const STAGE_REPORT: &str = "report";

/// Driving signals are written peak-normalized to this level.
const DRIVING_PEAK_DBFS: f64 = -1.0;

/// Artifact locations inside an output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn design_rirs(&self) -> PathBuf {
        self.root.join("rirs").join("design")
    }

    pub fn eval_rirs(&self) -> PathBuf {
        self.root.join("rirs").join("eval")
    }

    pub fn messages(&self) -> PathBuf {
        self.root.join("messages")
    }

    pub fn filters(&self) -> PathBuf {
        self.root.join("filters")
    }

    pub fn design(&self) -> PathBuf {
        self.root.join("design")
    }

    pub fn evaluate(&self) -> PathBuf {
        self.root.join("evaluate")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn message_file(&self, k: usize) -> PathBuf {
        self.messages().join(format!("message_k{k}.wav"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterManifest {
    pub users: usize,
    pub loudspeakers: usize,
    pub filter_len: usize,
    pub sample_rate: u32,
    pub delay: usize,
    pub design_signal: DesignKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub signal_len: usize,
    pub filter_len: usize,
    pub rir_len: usize,
    pub users: usize,
    pub loudspeakers: usize,
    pub rows: usize,
    pub cols: usize,
    pub slack: i64,
    pub is_overdetermined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub delay: usize,
    pub feasibility: FeasibilityReport,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocorrSummary {
    /// Per loudspeaker; −1 when the envelope never drops below the threshold.
    pub first_below: Vec<i64>,
    /// Per loudspeaker; −1 when the envelope never settles below the threshold.
    pub settled_below: Vec<i64>,
    pub worst_settle_lag: i64,
    pub mean_settle_lag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationMetrics {
    pub delay: usize,
    /// Gain applied to the written driving audio (metrics use unscaled signals).
    pub driving_gain: f64,
    pub driving_peak: f64,
    pub coherence_band: [f64; 2],
    pub coherence_band_average: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autocorr: Option<AutocorrSummary>,
    pub contrast: Vec<ContrastRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub message: usize,
    pub spot: f64,
    pub max_control: f64,
    pub max_crosstalk: f64,
    pub contrast: f64,
}

fn missing(stage: &'static str, path: &Path) -> CliError {
    CliError::MissingArtifact {
        stage,
        path: path.to_path_buf(),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(io(path))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io(path))
}

fn read_text(stage: &'static str, path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(missing(stage, path));
    }
    std::fs::read_to_string(path).map_err(io(path))
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| config(format!("serialization failed: {e}")))
}

fn from_toml<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| config(format!("{}: {e}", path.display())))
}

fn quantize(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v as f32 as f64).collect()
}

fn log(stage: &str, msg: impl AsRef<str>) {
    eprintln!("[{stage}] {}", msg.as_ref());
}

/// Simulates the design grid (spots × loudspeakers) and the evaluation grid
/// (spots then controls × loudspeakers, receivers jittered when σ > 0).
pub fn simulate_rirs(cfg: &ScenarioConfig, out: &Layout) -> Result<(RirSet, RirSet)> {
    let spec = cfg
        .shoebox()
        .ok_or_else(|| config("simulate-rirs needs a [room] spec"))?;
    let g = &cfg.geometry;
    let design = simulate_grid(&spec, &g.loudspeakers, &g.spots, cfg.rir_length)?
        .quantized()
        .with_geometry(Geometry {
            room: spec.dimensions,
            sources: g.loudspeakers.clone(),
            receivers: g.spots.clone(),
        });
    let mut receivers = g.spots.clone();
    receivers.extend(&g.controls);
    let sigma = cfg.evaluation.mismatch_sigma;
    if sigma > 0.0 {
        receivers = jitter_positions(&spec, &receivers, sigma, cfg.evaluation.jitter_seed)?;
    }
    let eval = simulate_grid(&spec, &g.loudspeakers, &receivers, cfg.rir_length)?
        .quantized()
        .with_geometry(Geometry {
            room: spec.dimensions,
            sources: g.loudspeakers.clone(),
            receivers,
        });
    save_rir_dir(&design, &out.design_rirs())?;
    save_rir_dir(&eval, &out.eval_rirs())?;
    log(
        STAGE_SIMULATE,
        format!(
            "{}x{} design and {}x{} evaluation RIRs of {} samples (sigma {sigma} m)",
            design.rows(),
            design.loudspeakers(),
            eval.rows(),
            eval.loudspeakers(),
            design.len()
        ),
    );
    Ok((design, eval))
}

fn load_grid(dir: &Path, from_config: bool) -> Result<RirSet> {
    if !dir.join(echospot_core::room::RIR_MANIFEST).is_file() {
        return Err(if from_config {
            config(format!("{} has no RIR manifest", dir.display()))
        } else {
            missing(STAGE_SIMULATE, dir)
        });
    }
    Ok(load_rir_dir(dir)?)
}

fn check_grid(cfg: &ScenarioConfig, set: &RirSet, rows: usize, what: &str) -> Result<()> {
    if set.rows() != rows || set.loudspeakers() != cfg.loudspeakers() {
        return Err(config(format!(
            "{what} RIRs are {}x{}, expected {rows}x{}",
            set.rows(),
            set.loudspeakers(),
            cfg.loudspeakers()
        )));
    }
    if set.sample_rate() != cfg.sample_rate {
        return Err(config(format!(
            "{what} RIRs are at {} Hz, scenario is {} Hz",
            set.sample_rate(),
            cfg.sample_rate
        )));
    }
    Ok(())
}

pub fn load_design_rirs(cfg: &ScenarioConfig, out: &Layout) -> Result<RirSet> {
    let set = match &cfg.rirs {
        Some(d) => load_grid(&d.design, true)?,
        None => load_grid(&out.design_rirs(), false)?,
    };
    check_grid(cfg, &set, cfg.users(), "design")?;
    Ok(set)
}

pub fn load_eval_rirs(cfg: &ScenarioConfig, out: &Layout) -> Result<RirSet> {
    let set = match &cfg.rirs {
        Some(d) => load_grid(&d.evaluation, true)?,
        None => load_grid(&out.eval_rirs(), false)?,
    };
    check_grid(
        cfg,
        &set,
        cfg.users() + cfg.geometry.controls.len(),
        "evaluation",
    )?;
    Ok(set)
}

/// Messages at the scenario rate, fitted to N samples and rounded to f32.
pub fn prepare_messages(cfg: &ScenarioConfig) -> Result<Vec<Waveform>> {
    let n = cfg.signal_len();
    cfg.messages
        .iter()
        .map(|m| {
            let w = match m {
                MessageSource::Synth { synth } => {
                    synth_speech(cfg.duration, cfg.sample_rate, *synth)?
                }
                MessageSource::File { path } => {
                    let raw =
                        read_wav(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
                    resample_to(&raw, cfg.sample_rate)?
                }
            };
            let w = w.fit_to(n);
            if w.peak() == 0.0 {
                return Err(config("a message is silent"));
            }
            Ok(Waveform::new(quantize(w.samples()), cfg.sample_rate)?)
        })
        .collect()
}

fn load_messages(cfg: &ScenarioConfig, out: &Layout) -> Result<Vec<Waveform>> {
    (0..cfg.users())
        .map(|k| {
            let path = out.message_file(k);
            if !path.is_file() {
                return Err(missing(STAGE_DESIGN, &path));
            }
            let w = read_wav(&path)?;
            if w.len() != cfg.signal_len() || w.sample_rate() != cfg.sample_rate {
                return Err(config(format!(
                    "{} does not match the configured duration and sample rate",
                    path.display()
                )));
            }
            Ok(w)
        })
        .collect()
}

/// Masks, design signals and operator; a pure function of config, messages and RIRs.
pub fn build_operator(
    cfg: &ScenarioConfig,
    messages: &[Waveform],
    rirs: &RirSet,
) -> Result<SystemOperator> {
    let m = &cfg.masks;
    let masks = generate_masks(
        cfg.users(),
        cfg.loudspeakers(),
        cfg.signal_len(),
        m.transition,
        m.flat,
        m.seed,
    )?;
    let design = make_design_signals(messages, &masks, cfg.design.signal, cfg.design.noise_seed)?;
    Ok(SystemOperator::new(&design, rirs, cfg.design.filter_len)?)
}

fn feasibility_report(dims: &ConvDims, f: Feasibility) -> FeasibilityReport {
    FeasibilityReport {
        signal_len: dims.signal_len,
        filter_len: dims.filter_len,
        rir_len: dims.rir_len,
        users: dims.users,
        loudspeakers: dims.loudspeakers,
        rows: dims.rows(),
        cols: dims.cols(),
        slack: f.slack,
        is_overdetermined: f.is_overdetermined,
    }
}

fn residual_csv(report: &SolveReport, target_norm: f64) -> String {
    let mut out = String::from("iteration,residual,relative_residual\n");
    for (i, r) in report.residual_history.iter().enumerate() {
        writeln!(out, "{},{:.9e},{:.9e}", i + 1, r, r / target_norm).unwrap();
    }
    out
}

pub fn write_filters(dir: &Path, g: &FilterSet, manifest: &FilterManifest) -> Result<()> {
    create_dir(dir)?;
    for k in 0..g.users() {
        for l in 0..g.loudspeakers() {
            write_samples(
                dir.join(slot_file_name("filter", k, l)),
                g.filter(k, l),
                manifest.sample_rate,
            )?;
        }
    }
    write_text(&dir.join("manifest.toml"), &to_toml(manifest)?)
}

pub fn load_filters(dir: &Path) -> Result<(FilterSet, FilterManifest)> {
    let path = dir.join("manifest.toml");
    let manifest: FilterManifest = from_toml(&read_text(STAGE_DESIGN, &path)?, &path)?;
    let mut filters = Vec::with_capacity(manifest.users);
    for k in 0..manifest.users {
        let mut row = Vec::with_capacity(manifest.loudspeakers);
        for l in 0..manifest.loudspeakers {
            let p = dir.join(slot_file_name("filter", k, l));
            if !p.is_file() {
                return Err(missing(STAGE_DESIGN, &p));
            }
            let w = read_wav(&p)?;
            if w.len() != manifest.filter_len {
                return Err(config(format!(
                    "{} has {} taps, manifest says {}",
                    p.display(),
                    w.len(),
                    manifest.filter_len
                )));
            }
            row.push(w.into_samples());
        }
        filters.push(row);
    }
    Ok((FilterSet::new(filters)?, manifest))
}

/// Masks → design signals → CGNR; writes messages, filters and the solve report.
pub fn design(cfg: &ScenarioConfig, out: &Layout) -> Result<DesignSummary> {
    let rirs = load_design_rirs(cfg, out)?;
    let messages = prepare_messages(cfg)?;
    create_dir(&out.messages())?;
    for (k, m) in messages.iter().enumerate() {
        write_wav(out.message_file(k), m)?;
    }

    let dims = ConvDims::new(
        cfg.signal_len(),
        cfg.design.filter_len,
        rirs.len(),
        cfg.users(),
        cfg.loudspeakers(),
    )?;
    let feasibility = feasibility_report(&dims, rank_feasibility(&dims));
    if feasibility.slack < 0 {
        log(
            STAGE_DESIGN,
            format!(
                "warning: M(L-1) - (P+N-2) = {} < 0; the system is overdetermined and exact focusing is not expected",
                feasibility.slack
            ),
        );
    }
    let op = build_operator(cfg, &messages, &rirs)?;
    let delay = cfg
        .solver
        .delay
        .unwrap_or_else(|| default_delay(&rirs, dims.filter_len));
    let target = build_target(&messages, &TargetSpec::new(delay, &dims)?)?;
    let opts = CgnrOptions {
        max_iters: cfg.solver.max_iters,
        rel_tol: cfg.solver.rel_tol,
        damping: cfg.solver.damping,
    };
    log(
        STAGE_DESIGN,
        format!(
            "{} design, {} x {} system, delay {delay}, up to {} iterations",
            cfg.design.signal,
            dims.rows(),
            dims.cols(),
            opts.max_iters
        ),
    );
    let (g, report) = solve_cgnr(&op, &target, &opts)?;
    log(
        STAGE_DESIGN,
        format!(
            "{} iterations, relative residual {:.4e}, {:.1} s",
            report.iterations_run, report.relative_residual, report.wall_time
        ),
    );
    let g = FilterSet::new(
        (0..g.users())
            .map(|k| {
                (0..g.loudspeakers())
                    .map(|l| quantize(g.filter(k, l)))
                    .collect()
            })
            .collect(),
    )?;
    let manifest = FilterManifest {
        users: dims.users,
        loudspeakers: dims.loudspeakers,
        filter_len: dims.filter_len,
        sample_rate: cfg.sample_rate,
        delay,
        design_signal: cfg.design.signal,
    };
    write_filters(&out.filters(), &g, &manifest)?;

    let dir = out.design();
    create_dir(&dir)?;
    let summary = DesignSummary {
        delay,
        feasibility,
        report,
    };
    write_text(&dir.join("solve_report.toml"), &to_toml(&summary)?)?;
    let target_norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    write_text(
        &dir.join("residual.csv"),
        &residual_csv(&summary.report, target_norm),
    )?;
    Ok(summary)
}

fn settle(v: Option<usize>) -> i64 {
    v.map_or(-1, |x| x as i64)
}

/// Renders the filters, scores every (message, location) pair and writes
/// audio plus metric files.
pub fn evaluate(cfg: &ScenarioConfig, out: &Layout) -> Result<EvaluationMetrics> {
    let (g, manifest) = load_filters(&out.filters())?;
    if manifest.users != cfg.users()
        || manifest.loudspeakers != cfg.loudspeakers()
        || manifest.filter_len != cfg.design.filter_len
        || manifest.design_signal != cfg.design.signal
    {
        return Err(config(
            "filters on disk were designed for a different configuration; re-run design",
        ));
    }
    let messages = load_messages(cfg, out)?;
    let design_rirs = load_design_rirs(cfg, out)?;
    let eval_rirs = load_eval_rirs(cfg, out)?;
    let op = build_operator(cfg, &messages, &design_rirs)?;
    let rendering = render(&op, &g, cfg.sample_rate)?;
    let receptions = echospot_core::solver::evaluate_at(&eval_rirs, &rendering.driving)?;

    let dir = out.evaluate();
    create_dir(&dir)?;
    let peak = rendering.driving_peak();
    let driving_gain = if peak > 0.0 {
        10f64.powf(DRIVING_PEAK_DBFS / 20.0) / peak
    } else {
        1.0
    };
    for (l, s) in rendering.driving.iter().enumerate() {
        let scaled: Vec<f64> = s.samples().iter().map(|v| v * driving_gain).collect();
        write_samples(
            dir.join(format!("driving_l{l}.wav")),
            &scaled,
            cfg.sample_rate,
        )?;
    }
    let ids = cfg.location_ids();
    for (id, y) in ids.iter().zip(&receptions) {
        write_wav(dir.join(format!("reception_{id}.wav")), y)?;
    }

    let k_users = cfg.users();
    let max_shift = cfg.design.filter_len + eval_rirs.len();
    let mut rows = Vec::new();
    let mut alignment = String::from("message_id,location_id,shift\n");
    for (k, msg) in messages.iter().enumerate() {
        for (j, (id, y)) in ids.iter().zip(&receptions).enumerate() {
            let kind = if j == k {
                LocationKind::Spot
            } else if j < k_users {
                LocationKind::Crosstalk
            } else {
                LocationKind::Control
            };
            let shift = alignment_search(msg, y, max_shift);
            writeln!(alignment, "{k},{id},{shift}").unwrap();
            let segment = aligned_segment(y, shift, msg.len());
            let score = match stoi(msg, &segment) {
                Ok(v) => Some(v),
                Err(CoreError::Degenerate(_)) => None,
                Err(e) => return Err(e.into()),
            };
            rows.push(LocationScore {
                message: k,
                location: id.clone(),
                kind,
                stoi: score,
            });
        }
    }
    let contrast: ContrastReport = contrast_report(rows)?;
    write_text(&dir.join("stoi.csv"), &contrast.to_csv())?;
    write_text(&dir.join("summary.csv"), &contrast.summary_csv())?;
    write_text(&dir.join("alignment.csv"), &alignment)?;

    let e = &cfg.evaluation;
    let coh = column_coherence(&op, e.coherence_pairs, e.coherence_seed, e.welch_segment)?;
    let mut coh_csv = String::from("frequency,coherence\n");
    for (f, v) in coh.frequencies.iter().zip(coh.mean_curve()) {
        writeln!(coh_csv, "{f:.4},{v:.9e}").unwrap();
    }
    write_text(&dir.join("coherence.csv"), &coh_csv)?;
    let coherence_band_average = coh.band_average(e.coherence_band[0], e.coherence_band[1]);

    let mut ac_csv = String::from("lag");
    for l in 0..cfg.loudspeakers() {
        write!(ac_csv, ",l{l}").unwrap();
    }
    ac_csv.push('\n');
    let autocorr = match driving_autocorr(&rendering.driving) {
        Ok(r) => {
            for lag in 0..e.autocorr_lags.min(r.lags.len()) {
                write!(ac_csv, "{lag}").unwrap();
                for env in &r.envelopes {
                    write!(ac_csv, ",{:.9e}", env[lag]).unwrap();
                }
                ac_csv.push('\n');
            }
            Some(AutocorrSummary {
                first_below: r.first_below.iter().map(|&v| settle(v)).collect(),
                settled_below: r.settled_below.iter().map(|&v| settle(v)).collect(),
                worst_settle_lag: settle(r.worst_settle_lag()),
                mean_settle_lag: r.mean_settle_lag().unwrap_or(f64::NAN),
            })
        }
        Err(CoreError::Degenerate(msg)) => {
            log(STAGE_EVALUATE, format!("autocorrelation skipped: {msg}"));
            None
        }
        Err(e) => return Err(e.into()),
    };
    write_text(&dir.join("autocorr.csv"), &ac_csv)?;

    let metrics = EvaluationMetrics {
        delay: manifest.delay,
        driving_gain,
        driving_peak: peak,
        coherence_band: e.coherence_band,
        coherence_band_average,
        autocorr,
        contrast: contrast
            .summary
            .iter()
            .map(|s| ContrastRow {
                message: s.message,
                spot: s.spot,
                max_control: s.max_control,
                max_crosstalk: s.max_crosstalk,
                contrast: s.contrast,
            })
            .collect(),
    };
    write_text(&dir.join("metrics.toml"), &to_toml(&metrics)?)?;
    for s in &contrast.summary {
        log(
            STAGE_EVALUATE,
            format!(
                "message {}: spot {:.3}, max control {:.3}, crosstalk {:.3}, contrast {:.3}",
                s.message, s.spot, s.max_control, s.max_crosstalk, s.contrast
            ),
        );
    }
    Ok(metrics)
}

pub fn load_metrics(out: &Layout) -> Result<EvaluationMetrics> {
    let path = out.evaluate().join("metrics.toml");
    from_toml(&read_text(STAGE_EVALUATE, &path)?, &path)
}
