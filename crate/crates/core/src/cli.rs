//! Command-line front end: `analyze`, `synth` and `compare`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 data error
//! (empty band or insufficient support).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{build_grid, parse_sweep_file, BandConfig, GridConfig, SweepSample, SweepSchema};
use crate::pipeline::{analyze_grid, AnalysisConfig};
use crate::report::{
    compare_reports, update_overview, write_comparison_csv, write_report, OverviewEntry, ReportContext, ReportSummary,
};
use crate::synth::{generate, write_json, write_samples_csv, write_schema_json, ScenarioSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// Worker-count override; defaults to the number of CPUs.
pub const WORKERS_ENV: &str = "SPECSTRUCT_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "specstruct", version, about = "Structural spectrum availability analysis of altitude-resolved sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full analysis for every band in a run configuration.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic sweep CSV with its schema and ground truth.
    Synth(SynthArgs),
    /// Per-altitude USAR/LCCB/SFI deltas between two report directories (B − A).
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output root; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub campaign: Option<String>,
    #[arg(long)]
    pub delta_db: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub smoothing_width: Option<usize>,
    #[arg(long)]
    pub freq_bin_hz: Option<f64>,
    #[arg(long)]
    pub alt_bin_m: Option<f64>,
    #[arg(long)]
    pub window_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Sample CSV; `<stem>.schema.json` and `<stem>.truth.json` are written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Optional CSV of the deltas.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    /// Schema sidecar; the default column layout when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
}

fn default_campaign() -> String {
    "default".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<InputSpec>,
    pub bands: Vec<BandConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default = "default_campaign")]
    pub campaign: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn check_label(kind: &str, s: &str) -> Result<()> {
    let ok = !s.is_empty()
        && s != "."
        && s != ".."
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!(
            "{kind} '{s}' must be non-empty and use only ASCII letters, digits, '-', '_' or '.'"
        )))
    }
}

impl RunConfig {
    /// Reads a config and resolves relative paths against its directory.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for input in &mut cfg.inputs {
            input.path = base.join(&input.path);
            if let Some(s) = &mut input.schema {
                *s = base.join(&*s);
            }
        }
        cfg.output_dir = base.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::config("no inputs listed"));
        }
        if self.bands.is_empty() {
            return Err(Error::config("no bands listed"));
        }
        check_label("campaign", &self.campaign)?;
        for (i, b) in self.bands.iter().enumerate() {
            check_label("band label", &b.label)?;
            b.validate()?;
            if self.bands[..i].iter().any(|o| o.label == b.label) {
                return Err(Error::config(format!("duplicate band label '{}'", b.label)));
            }
        }
        self.analysis.validate()
    }

    pub fn apply_overrides(&mut self, args: &AnalyzeArgs) {
        if let Some(v) = &args.out {
            self.output_dir = v.clone();
        }
        if let Some(v) = &args.campaign {
            self.campaign = v.clone();
        }
        let a = &mut self.analysis;
        if let Some(v) = args.delta_db {
            a.delta_db = v;
        }
        if let Some(v) = args.epsilon {
            a.epsilon = v;
        }
        if let Some(v) = args.smoothing_width {
            a.smoothing_width = v;
        }
        if let Some(v) = args.freq_bin_hz {
            a.grid.freq_bin_hz = v;
        }
        if let Some(v) = args.alt_bin_m {
            a.grid.alt_bin_m = v;
        }
        if let Some(v) = args.window_s {
            a.grid.window_s = v;
        }
    }

    /// Effective configuration minus the output location. Loading it as a
    /// run config (with any `output_dir`) reproduces the report.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("run config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("output_dir");
        }
        v
    }
}

fn worker_count() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::config(format!("{WORKERS_ENV} must be a positive integer, got '{s}'"))),
        },
    }
}

struct Ingested {
    samples: Vec<SweepSample>,
    rejected: usize,
}

fn ingest(inputs: &[InputSpec]) -> Result<Ingested> {
    let mut out = Ingested {
        samples: Vec::new(),
        rejected: 0,
    };
    for input in inputs {
        let schema = match &input.schema {
            Some(p) => SweepSchema::from_json_file(p)?,
            None => SweepSchema::default(),
        };
        let parsed = parse_sweep_file(&input.path, &schema)?;
        log::info!(
            "{}: {} samples, {} rejected rows",
            input.path.display(),
            parsed.samples.len(),
            parsed.rejected.len()
        );
        out.rejected += parsed.rejected.len();
        out.samples.extend(parsed.samples);
    }
    Ok(out)
}

fn print_summary(s: &ReportSummary, dir: &Path) {
    let range = match (s.usar_min, s.usar_max) {
        (Some(lo), Some(hi)) => format!("{lo:.3} .. {hi:.3}"),
        _ => "n/a".into(),
    };
    let lccb = s
        .max_lccb_hz
        .map_or_else(|| "n/a".into(), |v| format!("{:.3} MHz", v / 1e6));
    println!(
        "[{}] {}: {:.3}-{:.3} MHz, {} bins",
        s.campaign,
        s.band.label,
        s.band.band_low_hz / 1e6,
        s.band.band_high_hz / 1e6,
        s.n_bins
    );
    println!("  N_band {:.2} dBm   T_6G {:.2} dBm", s.n_band_dbm, s.t6g_dbm);
    println!("  USAR {range} over {} altitude rows   max LCCB {lccb}", s.profile.len());
    const MAX_ROWS: usize = 25;
    for r in s.profile.iter().take(MAX_ROWS) {
        let sfi = r.sfi.map_or_else(|| "-".into(), |v| format!("{v:.3}"));
        println!(
            "    {:>7.1} m  USAR {:.3}  LCCB {:>9.3} MHz  SFI {sfi}",
            r.alt_m,
            r.usar,
            r.lccb_hz / 1e6
        );
    }
    if s.profile.len() > MAX_ROWS {
        println!("    ... {} more rows in profile.csv", s.profile.len() - MAX_ROWS);
    }
    println!("  report: {}", dir.display());
}

pub fn report_dir(output_dir: &Path, campaign: &str, band_label: &str) -> PathBuf {
    output_dir.join(campaign).join(band_label)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Vec<ReportSummary>> {
    let mut cfg = RunConfig::from_json_file(&args.config)?;
    cfg.apply_overrides(args);
    cfg.validate()?;
    let workers = worker_count()?;
    let data = ingest(&cfg.inputs)?;
    let echo = cfg.echo();

    let run_band = |band: &BandConfig| -> Result<(ReportSummary, PathBuf)> {
        let grid = build_grid(&data.samples, band, &cfg.analysis.grid)?;
        let analysis = analyze_grid(grid, &cfg.analysis)?;
        let dir = report_dir(&cfg.output_dir, &cfg.campaign, &band.label);
        let ctx = ReportContext {
            campaign: &cfg.campaign,
            run_config: echo.clone(),
            rejected_rows: data.rejected,
        };
        Ok((write_report(&dir, &analysis, &ctx, &cfg.analysis)?, dir))
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<(ReportSummary, PathBuf)>> = pool.install(|| cfg.bands.par_iter().map(run_band).collect());

    let mut summaries = Vec::new();
    let mut entries = Vec::new();
    let mut first_err: Option<Error> = None;
    for (band, res) in cfg.bands.iter().zip(results) {
        match res {
            Ok((s, dir)) => {
                print_summary(&s, &dir);
                entries.push(OverviewEntry {
                    campaign: s.campaign.clone(),
                    band: s.band.label.clone(),
                    dir: format!("{}/{}", s.campaign, s.band.label),
                    n_band_dbm: s.n_band_dbm,
                    t6g_dbm: s.t6g_dbm,
                    usar_min: s.usar_min,
                    usar_max: s.usar_max,
                    max_lccb_hz: s.max_lccb_hz,
                });
                summaries.push(s);
            }
            Err(e) => {
                log::error!("band '{}': {e}", band.label);
                // configuration errors outrank data errors
                let replace = match &first_err {
                    None => true,
                    Some(prev) => prev.is_data_error() && !e.is_data_error(),
                };
                if replace {
                    first_err = Some(e);
                }
            }
        }
    }
    if !entries.is_empty() {
        update_overview(&cfg.output_dir, entries)?;
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(summaries),
    }
}

/// Contents of a scenario file for `synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub band: BandConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub scenario: ScenarioSpec,
}

pub fn sidecar_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    (
        out.with_file_name(format!("{stem}.schema.json")),
        out.with_file_name(format!("{stem}.truth.json")),
    )
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.scenario).map_err(|e| Error::io(&args.scenario, e))?;
    let cfg: SynthConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: args.scenario.clone(),
        source,
    })?;
    cfg.band.validate()?;
    cfg.grid.validate()?;
    let (samples, truth) = generate(&cfg.scenario, &cfg.band, &cfg.grid)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_samples_csv(&args.out, &samples)?;
    let (schema_path, truth_path) = sidecar_paths(&args.out);
    write_schema_json(&schema_path, &SweepSchema::default())?;
    write_json(&truth_path, &truth)?;
    println!(
        "{} samples -> {} ({} contaminated windows)",
        samples.len(),
        args.out.display(),
        truth.contaminated.len()
    );
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<crate::report::Comparison> {
    let a = ReportSummary::read(&args.a)?;
    let b = ReportSummary::read(&args.b)?;
    let cmp = compare_reports(&a, &b)?;
    println!(
        "{} [{}] -> [{}]: B − A per altitude",
        a.band.label, a.campaign, b.campaign
    );
    for r in &cmp.rows {
        let sfi = r.sfi_delta.map_or_else(|| "-".into(), |v| format!("{v:+.3}"));
        println!(
            "  {:>7.1} m  ΔUSAR {:+.3}  ΔLCCB {:+.3} MHz  ΔSFI {sfi}",
            r.alt_m,
            r.usar_delta,
            r.lccb_delta_hz / 1e6
        );
    }
    if !cmp.only_in_a.is_empty() || !cmp.only_in_b.is_empty() {
        println!(
            "  unmatched altitudes: A only {:?}, B only {:?}",
            cmp.only_in_a, cmp.only_in_b
        );
    }
    if let Some(out) = &args.out {
        write_comparison_csv(out, &cmp)?;
    }
    Ok(cmp)
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_CONFIG
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let res = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a).map(drop),
        Command::Synth(a) => cmd_synth(a),
        Command::Compare(a) => cmd_compare(a).map(drop),
    };
    match res {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"inputs":[{"path":"a.csv"}],"bands":[{"label":"b","band_low_hz":2.69e9,"band_high_hz":2.9e9}]}"#,
        )
        .unwrap();
        let a = &cfg.analysis;
        assert_eq!(a.grid.freq_bin_hz, 60e3);
        assert_eq!(a.grid.window_s, 60.0);
        assert_eq!(a.grid.alt_bin_m, 10.0);
        assert_eq!(a.delta_db, 10.0);
        assert_eq!(a.epsilon, 0.05);
        assert_eq!(a.smoothing_width, 5);
        assert_eq!(a.grid.min_samples_time, 2);
        assert_eq!(a.grid.min_samples_freq, 2);
        assert_eq!(cfg.campaign, "default");
        cfg.validate().unwrap();
    }

    #[test]
    fn labels_must_be_path_safe() {
        assert!(check_label("band label", "n7_2.69-2.9").is_ok());
        for bad in ["", "..", "a/b", "a b"] {
            assert!(check_label("band label", bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn echo_drops_output_dir_and_round_trips() {
        let cfg = RunConfig {
            inputs: vec![InputSpec {
                path: "x.csv".into(),
                schema: None,
            }],
            bands: vec![BandConfig::new("b", 1e9, 1.1e9)],
            analysis: AnalysisConfig::default(),
            campaign: "2024".into(),
            output_dir: "/tmp/somewhere".into(),
        };
        let echo = cfg.echo();
        assert!(echo.get("output_dir").is_none());
        let back: RunConfig = serde_json::from_value(echo).unwrap();
        assert_eq!(back.analysis, cfg.analysis);
        assert_eq!(back.bands, cfg.bands);
        assert_eq!(back.inputs, cfg.inputs);
    }

    #[test]
    fn sidecars_sit_next_to_output() {
        let (s, t) = sidecar_paths(Path::new("dir/data.csv"));
        assert_eq!(s, Path::new("dir/data.schema.json"));
        assert_eq!(t, Path::new("dir/data.truth.json"));
    }

    #[test]
    fn bad_arguments_exit_one() {
        assert_eq!(run(["specstruct", "analyze"]), EXIT_CONFIG);
        assert_eq!(run(["specstruct", "--help"]), EXIT_OK);
    }
}
