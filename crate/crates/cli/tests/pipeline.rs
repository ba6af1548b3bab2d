use std::path::{Path, PathBuf};
use std::process::Command;

use echospot_cli::config::ScenarioConfig;
use echospot_cli::pipeline::{self, FilterManifest, Layout};
use echospot_cli::report::RunManifest;
use echospot_cli::CliError;
use echospot_core::room::load_rir_dir;
use echospot_core::FilterSet;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small.toml")
}

fn echospot(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_echospot"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run_all(dir: &Path, extra: &[&str]) -> i32 {
    let cfg = fixture();
    let mut args = vec![
        "run-all",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        dir.to_str().unwrap(),
    ];
    args.extend(extra);
    let (code, err) = echospot(&args);
    assert_eq!(code, 0, "{err}");
    code
}

fn count_wavs(dir: &Path) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "wav")
        })
        .count()
}

#[test]
fn full_pipeline_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    run_all(tmp.path(), &[]);
    let layout = Layout::new(tmp.path());
    assert_eq!(count_wavs(&layout.design_rirs()), 2 * 6);
    assert_eq!(count_wavs(&layout.eval_rirs()), (2 + 2) * 6);
    assert_eq!(count_wavs(&layout.filters()), 2 * 6);

    // sigma = 0: the spot rows of the evaluation grid are the design grid
    let design = load_rir_dir(&layout.design_rirs()).unwrap();
    let eval = load_rir_dir(&layout.eval_rirs()).unwrap();
    assert_eq!(
        eval.select_rows([0, 1]).unwrap().rir(1, 3),
        design.rir(1, 3)
    );
    for k in 0..2 {
        for l in 0..6 {
            assert_eq!(eval.rir(k, l), design.rir(k, l));
        }
    }

    let report = layout.report();
    let stoi = std::fs::read_to_string(report.join("stoi.csv")).unwrap();
    let mut lines = stoi.lines();
    assert_eq!(
        lines.next(),
        Some("message_id,location_id,location_kind,stoi")
    );
    assert_eq!(lines.count(), 2 * (2 + 2));

    let solve = std::fs::read_to_string(report.join("solve_report.toml")).unwrap();
    let summary: pipeline::DesignSummary = toml::from_str(&solve).unwrap();
    let residual = std::fs::read_to_string(report.join("residual.csv")).unwrap();
    assert_eq!(residual.lines().count() - 1, summary.report.iterations_run);
    assert!(summary.feasibility.slack >= 0);

    let manifest =
        RunManifest::from_toml(&std::fs::read_to_string(report.join("manifest.toml")).unwrap())
            .unwrap();
    let cfg = ScenarioConfig::from_file(&fixture()).unwrap();
    assert_eq!(manifest.config, cfg);
    assert!(manifest.checksums.contains_key("filters/filter_k1_l5.wav"));
    assert!(!manifest.checksums.contains_key("report/manifest.toml"));
    assert!(manifest.driving_gain > 0.0);

    let alignment = std::fs::read_to_string(layout.evaluate().join("alignment.csv")).unwrap();
    let spot_shift: usize = alignment
        .lines()
        .find(|l| l.starts_with("0,spot0,"))
        .and_then(|l| l.rsplit(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(spot_shift.abs_diff(summary.delay) <= 1);
}

#[test]
fn stages_run_separately_and_report_missing_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let cfg = fixture();
    let cfg = cfg.to_str().unwrap();

    let (code, err) = echospot(&["design", "--config", cfg, "--output", out]);
    assert_eq!(code, 4);
    assert!(err.contains("simulate-rirs"), "{err}");

    assert_eq!(
        echospot(&["simulate-rirs", "--config", cfg, "--output", out]).0,
        0
    );
    let (code, err) = echospot(&["evaluate", "--config", cfg, "--output", out]);
    assert_eq!(code, 4);
    assert!(err.contains("`design`"), "{err}");
    let (code, err) = echospot(&["report", "--config", cfg, "--output", out]);
    assert_eq!(code, 4, "{err}");

    assert_eq!(echospot(&["design", "--config", cfg, "--output", out]).0, 0);
    assert_eq!(
        echospot(&["evaluate", "--config", cfg, "--output", out]).0,
        0
    );
    let first = std::fs::read(tmp.path().join("evaluate/stoi.csv")).unwrap();
    // deleting a later stage leaves earlier ones usable
    std::fs::remove_dir_all(tmp.path().join("evaluate")).unwrap();
    assert_eq!(
        echospot(&["evaluate", "--config", cfg, "--output", out]).0,
        0
    );
    assert_eq!(
        std::fs::read(tmp.path().join("evaluate/stoi.csv")).unwrap(),
        first
    );
    assert_eq!(echospot(&["report", "--config", cfg, "--output", out]).0, 0);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture()).unwrap();

    let no_messages = tmp.path().join("empty.toml");
    std::fs::write(
        &no_messages,
        text.replace("messages = [{ synth = 7 }, { synth = 8 }]", "messages = []"),
    )
    .unwrap();
    let (code, err) = echospot(&["design", "--config", no_messages.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");

    let one_message = tmp.path().join("one.toml");
    std::fs::write(
        &one_message,
        text.replace(
            "messages = [{ synth = 7 }, { synth = 8 }]",
            "messages = [{ synth = 7 }]",
        ),
    )
    .unwrap();
    assert_eq!(
        echospot(&["run-all", "--config", one_message.to_str().unwrap()]).0,
        2
    );

    let missing_file = tmp.path().join("file.toml");
    std::fs::write(
        &missing_file,
        text.replace("{ synth = 8 }", "{ path = \"nowhere.wav\" }"),
    )
    .unwrap();
    assert_eq!(
        echospot(&["run-all", "--config", missing_file.to_str().unwrap()]).0,
        2
    );

    assert_eq!(echospot(&["design", "--config", "/nonexistent.toml"]).0, 2);
    let cfg = fixture();
    assert_eq!(
        echospot(&[
            "design",
            "--config",
            cfg.to_str().unwrap(),
            "--mismatch-sigma",
            "-1"
        ])
        .0,
        2
    );
    assert_eq!(
        echospot(&[
            "design",
            "--config",
            cfg.to_str().unwrap(),
            "--design-signal",
            "music"
        ])
        .0,
        2
    );
}

#[test]
fn simulation_is_deterministic_and_jitter_changes_eval_only() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = fixture();
    let cfg = cfg.to_str().unwrap();
    for d in [&a, &b] {
        let out = d.path().to_str().unwrap();
        assert_eq!(
            echospot(&[
                "simulate-rirs",
                "--config",
                cfg,
                "--output",
                out,
                "--mismatch-sigma",
                "0.05"
            ])
            .0,
            0
        );
    }
    let sums = |d: &Path| echospot_cli::report::checksum_tree(d).unwrap();
    assert_eq!(sums(a.path()), sums(b.path()));

    let c = tempfile::tempdir().unwrap();
    assert_eq!(
        echospot(&[
            "simulate-rirs",
            "--config",
            cfg,
            "--output",
            c.path().to_str().unwrap()
        ])
        .0,
        0
    );
    let (sa, sc) = (sums(a.path()), sums(c.path()));
    assert_eq!(
        sa["rirs/design/rir_k0_l0.wav"],
        sc["rirs/design/rir_k0_l0.wav"]
    );
    assert_ne!(sa["rirs/eval/rir_k0_l0.wav"], sc["rirs/eval/rir_k0_l0.wav"]);
}

#[test]
fn zero_filters_give_degenerate_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::from_file(&fixture()).unwrap();
    let layout = Layout::new(tmp.path());
    pipeline::simulate_rirs(&cfg, &layout).unwrap();
    pipeline::design(&cfg, &layout).unwrap();
    let (_, manifest): (FilterSet, FilterManifest) =
        pipeline::load_filters(&layout.filters()).unwrap();
    let zeros = FilterSet::zeros(2, 6, manifest.filter_len).unwrap();
    pipeline::write_filters(&layout.filters(), &zeros, &manifest).unwrap();

    let metrics = pipeline::evaluate(&cfg, &layout).unwrap();
    let stoi = std::fs::read_to_string(layout.evaluate().join("stoi.csv")).unwrap();
    assert!(stoi.lines().skip(1).all(|l| l.ends_with(",nan")));
    assert!(metrics.autocorr.is_none());
    assert!(metrics.contrast.iter().all(|c| c.contrast == 0.0));
    assert_eq!(metrics.driving_peak, 0.0);
}

#[test]
fn exit_codes() {
    use echospot_core::Error as E;
    let numerical = CliError::Core(E::NumericalBreakdown {
        iteration: 3,
        reason: "nan".into(),
    });
    assert_eq!(numerical.exit_code(), 3);
    assert_eq!(
        CliError::Core(E::InvalidParameter("x".into())).exit_code(),
        2
    );
    assert_eq!(
        CliError::Core(E::MissingRir {
            k: 1,
            l: 2,
            path: "p".into()
        })
        .exit_code(),
        4
    );
}
