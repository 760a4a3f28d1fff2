mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;
use specstruct::ingest::{parse_sweep_file, BandConfig, SweepSchema};
use specstruct::pipeline::{analyze_samples, AnalysisConfig};
use specstruct::report::{read_grid_csv, read_profile_csv, Overview, ReportSummary};
use specstruct::synth::{GroundTruth, ScenarioSpec};

fn run(args: &[&Path]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn p(s: &str) -> &Path {
    Path::new(s)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a scenario file and runs `synth`, returning the CSV path.
fn synth(dir: &Path, name: &str, band: &BandConfig, spec: &ScenarioSpec) -> PathBuf {
    let scenario = dir.join(format!("{name}.scenario.json"));
    let json = serde_json::json!({"band": band, "scenario": spec});
    std::fs::write(&scenario, json.to_string()).unwrap();
    let out = dir.join(format!("{name}.csv"));
    let o = run(&[p("synth"), p("--scenario"), &scenario, p("--out"), &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn analyze(config: &Path, out: &Path) -> Output {
    run(&[p("analyze"), p("--config"), config, p("--out"), out])
}

#[test]
fn clean_csv_reports_full_usability() {
    let dir = tempfile::tempdir().unwrap();
    let b = band("clean", 50, 2);
    synth(dir.path(), "data", &b, &ScenarioSpec::clean(vec![5.0, 15.0], 600.0, 7));
    let cfg = write_run_config(dir.path(), &["data.csv"], &[b], "y2024");
    let o = analyze(&cfg, &dir.path().join("out"));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("USAR 1.000 .. 1.000"), "{text}");
    assert!(text.contains("N_band") && text.contains("T_6G") && text.contains("max LCCB 3.000 MHz"), "{text}");
    assert_eq!(text.matches("USAR 1.000  LCCB").count(), 2, "{text}");
}

#[test]
fn missing_input_exits_one_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_run_config(dir.path(), &["nope.csv"], &[band("b", 10, 0)], "c");
    let o = analyze(&cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.csv"), "{}", stderr(&o));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"inputs": [], "bands": []}"#).unwrap();
    assert_eq!(analyze(&cfg, dir.path()).status.code(), Some(1));
    std::fs::write(&cfg, r#"{"inputs": [{"path": "a.csv"}], "bands": [], "bogus": 1}"#).unwrap();
    assert_eq!(analyze(&cfg, dir.path()).status.code(), Some(1));
}

#[test]
fn band_without_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let b = band("here", 20, 1);
    synth(dir.path(), "data", &b, &ScenarioSpec::clean(vec![5.0], 300.0, 1));
    let far = BandConfig::new("far", 5.0e9, 5.001e9).with_margin(0.0);
    let cfg = write_run_config(dir.path(), &["data.csv"], &[b, far], "c");
    let out = dir.path().join("out");
    let o = analyze(&cfg, &out);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("empty band"), "{}", stderr(&o));
    // the band with data is still reported
    assert!(out.join("c/here/summary.json").exists());
    assert!(!out.join("c/far").exists());
}

#[test]
fn two_bands_two_report_sets() {
    let dir = tempfile::tempdir().unwrap();
    let wide = band("wide", 60, 2);
    synth(dir.path(), "data", &wide, &ScenarioSpec::clean(vec![5.0], 300.0, 2));
    let low = BandConfig::new("low", LOW_HZ, LOW_HZ + 20.0 * DF).with_margin(DF);
    let high = BandConfig::new("high", LOW_HZ + 30.0 * DF, LOW_HZ + 60.0 * DF).with_margin(DF);
    let cfg = write_run_config(dir.path(), &["data.csv"], &[low, high], "c");
    let out = dir.path().join("out");
    let o = analyze(&cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    for label in ["low", "high"] {
        for f in ["p_usable.csv", "smoothed_p.csv", "usable_mask.csv", "p_max.csv", "profile.csv", "distribution.csv", "noise_floor.csv", "summary.json"] {
            assert!(out.join("c").join(label).join(f).exists(), "{label}/{f}");
        }
    }
    let overview: Overview = serde_json::from_str(&std::fs::read_to_string(out.join("overview.json")).unwrap()).unwrap();
    let bands: Vec<&str> = overview.reports.iter().map(|r| r.band.as_str()).collect();
    assert_eq!(bands, ["high", "low"]);
    assert_eq!(ReportSummary::read(&out.join("c/low")).unwrap().n_bins, 20);
    assert_eq!(ReportSummary::read(&out.join("c/high")).unwrap().n_bins, 30);
}

#[test]
fn campaigns_merge_into_one_overview() {
    let dir = tempfile::tempdir().unwrap();
    let b = band("b", 30, 1);
    synth(dir.path(), "data", &b, &ScenarioSpec::clean(vec![5.0], 300.0, 3));
    let cfg = write_run_config(dir.path(), &["data.csv"], &[b], "y2023");
    let out = dir.path().join("out");
    assert!(analyze(&cfg, &out).status.success());
    let o = run(&[p("analyze"), p("--config"), &cfg, p("--out"), &out, p("--campaign"), p("y2024")]);
    assert!(o.status.success());
    assert!(analyze(&cfg, &out).status.success());
    let overview: Overview = serde_json::from_str(&std::fs::read_to_string(out.join("overview.json")).unwrap()).unwrap();
    let tags: Vec<(&str, &str)> = overview.reports.iter().map(|r| (r.campaign.as_str(), r.dir.as_str())).collect();
    assert_eq!(tags, [("y2023", "y2023/b"), ("y2024", "y2024/b")]);
}

#[test]
fn report_grids_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let b = band("rt", 40, 2);
    let mut spec = ScenarioSpec::clean(vec![5.0, 15.0], 600.0, 11);
    spec.emitters.push(emitter_on_bins(10, 8, -85.0, 0.5, 400.0));
    let data = synth(dir.path(), "data", &b, &spec);
    let cfg = write_run_config(dir.path(), &["data.csv"], std::slice::from_ref(&b), "c");
    let out = dir.path().join("out");
    assert!(analyze(&cfg, &out).status.success());

    let samples = parse_sweep_file(&data, &SweepSchema::default()).unwrap().samples;
    let a = analyze_samples(&samples, &b, &AnalysisConfig::default()).unwrap();
    let rows = read_grid_csv(&out.join("c/rt/p_usable.csv")).unwrap();
    let mut expected = Vec::new();
    for f in 0..a.reliability.n_bins {
        for r in &a.reliability.rows {
            if let Some(v) = r.p_usable[f] {
                expected.push((a.grid.freq_center(f as i64), a.grid.alt_center(r.alt_bin), v));
            }
        }
    }
    let got: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.freq_hz, r.alt_m, r.value)).collect();
    assert_eq!(got, expected);
    assert!(got.iter().any(|g| g.2 > 0.0 && g.2 < 1.0));

    let pmax = read_grid_csv(&out.join("c/rt/p_max.csv")).unwrap();
    let want: Vec<f64> = a.power.p_max.iter().map(|c| c.value).collect();
    assert_eq!(pmax.iter().map(|r| r.value).collect::<Vec<_>>(), want);

    let profile = read_profile_csv(&out.join("c/rt/profile.csv")).unwrap();
    assert_eq!(profile.len(), a.profile.rows.len());
    for (r, m) in profile.iter().zip(&a.profile.rows) {
        assert_eq!((r.usar, r.lccb_hz, r.sfi, r.n_segments), (m.usar, m.lccb_hz, m.sfi, m.segments.len()));
    }
}

#[test]
fn echoed_config_reproduces_report() {
    let dir = tempfile::tempdir().unwrap();
    let b = band("echo", 30, 2);
    let mut spec = ScenarioSpec::clean(vec![5.0], 600.0, 4);
    spec.emitters.push(emitter_on_bins(5, 4, -70.0, 1.0, 60.0));
    synth(dir.path(), "data", &b, &spec);
    let cfg = write_run_config(dir.path(), &["data.csv"], &[b], "c");
    let first = dir.path().join("first");
    let o = run(&[p("analyze"), p("--config"), &cfg, p("--out"), &first, p("--epsilon"), p("0.1")]);
    assert!(o.status.success(), "{}", stderr(&o));

    let summary = ReportSummary::read(&first.join("c/echo")).unwrap();
    assert_eq!(summary.analysis.epsilon, 0.1);
    let other = tempfile::tempdir().unwrap();
    let echo_cfg = other.path().join("echo.json");
    std::fs::write(&echo_cfg, serde_json::to_string(&summary.run_config).unwrap()).unwrap();
    let second = other.path().join("second");
    let o = analyze(&echo_cfg, &second);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(tree(&first.join("c")), tree(&second.join("c")));
}

#[test]
fn worker_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_run_config(dir.path(), &["x.csv"], &[band("b", 10, 0)], "c");
    let o = Command::new(bin())
        .args([p("analyze"), p("--config"), &cfg])
        .env("SPECSTRUCT_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SPECSTRUCT_WORKERS"));
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let b = band("s", 20, 2);
    let spec = ScenarioSpec::clean(vec![5.0], 300.0, 7);
    let a = synth(dir.path(), "a", &b, &spec);
    let c = synth(dir.path(), "c", &b, &spec);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("a.truth.json")).unwrap(),
        std::fs::read(dir.path().join("c.truth.json")).unwrap()
    );
    let schema = SweepSchema::from_json_file(&dir.path().join("a.schema.json")).unwrap();
    assert_eq!(schema, SweepSchema::default());
}

#[test]
fn synth_truth_lists_contaminated_windows() {
    let dir = tempfile::tempdir().unwrap();
    let b = band("s", 20, 0);
    let mut spec = ScenarioSpec::clean(vec![5.0], 300.0, 7);
    spec.emitters.push(emitter_on_bins(4, 3, -60.0, 1.0, 10.0));
    synth(dir.path(), "d", &b, &spec);
    let truth: GroundTruth =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("d.truth.json")).unwrap()).unwrap();
    let bins: std::collections::BTreeSet<i64> = truth.contaminated.iter().map(|w| w.freq_bin).collect();
    assert_eq!(bins.into_iter().collect::<Vec<_>>(), [4, 5, 6]);
    // duty 1: 5 windows per bin, each fully active
    assert_eq!(truth.contaminated.len(), 15);
    assert!(truth.contaminated.iter().all(|w| w.active_samples == w.total_samples));
}

#[test]
fn invalid_scenario_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = ScenarioSpec::clean(vec![5.0], 300.0, 7);
    spec.emitters.push(emitter_on_bins(4, 3, -60.0, 1.5, 10.0));
    let scenario = dir.path().join("s.json");
    std::fs::write(&scenario, serde_json::json!({"band": band("s", 20, 0), "scenario": spec}).to_string()).unwrap();
    let o = run(&[p("synth"), p("--scenario"), &scenario, p("--out"), &dir.path().join("x.csv")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("duty"), "{}", stderr(&o));
}

/// Analyzes a synthetic campaign into `out` and returns the report directory.
fn campaign(dir: &Path, name: &str, b: &BandConfig, occupied: Option<(i64, i64)>, freq_bin_hz: Option<f64>) -> PathBuf {
    let mut spec = ScenarioSpec::clean(vec![5.0, 15.0, 25.0], 600.0, 21);
    if let Some((first, count)) = occupied {
        spec.emitters.push(emitter_on_bins(first, count, -60.0, 1.0, 60.0));
    }
    let sub = dir.join(name);
    std::fs::create_dir_all(&sub).unwrap();
    synth(&sub, "data", b, &spec);
    let cfg = write_run_config(&sub, &["data.csv"], std::slice::from_ref(b), name);
    let mut args = vec![p("analyze"), p("--config"), &cfg, p("--out"), dir];
    let df = freq_bin_hz.map(|v| v.to_string());
    if let Some(df) = &df {
        args.extend([p("--freq-bin-hz"), p(df)]);
    }
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join(name).join(&b.label)
}

#[test]
fn compare_identical_reports_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = campaign(dir.path(), "a", &band("b", 50, 1), Some((10, 5)), None);
    let o = run(&[p("compare"), p("--a"), &a, p("--b"), &a]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.matches("ΔUSAR +0.000").count(), 3, "{text}");
}

#[test]
fn compare_occupied_against_clean() {
    let dir = tempfile::tempdir().unwrap();
    let n_bins = 100;
    let b = band("n7", n_bins, 2);
    let clean = campaign(dir.path(), "y2023", &b, None, None);
    let busy = campaign(dir.path(), "y2024", &b, Some((35, 30)), None);
    let csv = dir.path().join("delta.csv");
    let o = run(&[p("compare"), p("--a"), &clean, p("--b"), &busy, p("--out"), &csv]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    let deltas: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("alt_m"))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(deltas.len(), 3);
    for d in deltas {
        assert!((d + 0.3).abs() <= 2.0 / n_bins as f64, "ΔUSAR {d}");
    }
}

#[test]
fn compare_refuses_mismatched_grid() {
    let dir = tempfile::tempdir().unwrap();
    let b = band("b", 50, 1);
    let a = campaign(dir.path(), "a", &b, None, None);
    let c = campaign(dir.path(), "c", &b, None, Some(30e3));
    let o = run(&[p("compare"), p("--a"), &a, p("--b"), &c]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("freq_bin_hz"), "{}", stderr(&o));
}
