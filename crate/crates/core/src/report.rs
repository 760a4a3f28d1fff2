//! Plot-ready serialization of an analysis.
//!
//! Every CSV is long-format with a fixed column order, `#` comment lines
//! documenting units, and rows sorted by frequency then altitude. Floats use
//! Rust's shortest round-trip formatting, so identical inputs give
//! byte-identical files and reading a file back recovers the exact values.
//! Column layouts are described in `docs/formats.md`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BandConfig;
use crate::pipeline::{AnalysisConfig, BandAnalysis};
use crate::structure::{BinDistribution, StructuralProfile};
use crate::synth::write_json;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub freq_hz: f64,
    pub alt_m: f64,
    pub value: f64,
}

struct CsvOut {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvOut {
    fn create(path: &Path, comments: &[&str], header: &str) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        for c in comments {
            w.line(&format!("# {c}"))?;
        }
        w.line(header)?;
        Ok(w)
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Long-format `freq_hz,alt_m,value`. Rows are written as given; callers
/// pass them sorted by frequency then altitude.
pub fn write_grid_csv(path: &Path, rows: &[GridRow], value_doc: &str) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no cells to write", path.display())));
    }
    let mut w = CsvOut::create(
        path,
        &[
            value_doc,
            "freq_hz: frequency bin center [Hz]; alt_m: altitude bin center [m]; absent cells omitted",
        ],
        "freq_hz,alt_m,value",
    )?;
    for r in rows {
        w.line(&format!("{},{},{}", r.freq_hz, r.alt_m, r.value))?;
    }
    w.finish()
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

pub fn read_grid_csv(path: &Path) -> Result<Vec<GridRow>> {
    csv_reader(path)?
        .deserialize()
        .collect::<std::result::Result<Vec<GridRow>, _>>()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub alt_m: f64,
    pub usar: f64,
    pub lccb_hz: f64,
    pub sfi: Option<f64>,
    pub n_segments: usize,
}

pub fn profile_rows(profile: &StructuralProfile) -> Vec<ProfileRow> {
    profile
        .rows
        .iter()
        .map(|r| ProfileRow {
            alt_m: r.alt_center_m,
            usar: r.usar,
            lccb_hz: r.lccb_hz,
            sfi: r.sfi,
            n_segments: r.segments.len(),
        })
        .collect()
}

/// One row per emitted altitude bin. An undefined SFI is an empty field.
pub fn write_profile_csv(path: &Path, profile: &StructuralProfile) -> Result<()> {
    let mut w = CsvOut::create(
        path,
        &[
            "structural metrics per altitude bin",
            "alt_m [m]; usar [fraction]; lccb_hz [Hz]; sfi [fraction, empty when no usable bins]; n_segments [count]",
        ],
        "alt_m,usar,lccb_hz,sfi,n_segments",
    )?;
    for r in profile_rows(profile) {
        w.line(&format!("{},{},{},{},{}", r.alt_m, r.usar, r.lccb_hz, opt(r.sfi), r.n_segments))?;
    }
    w.finish()
}

pub fn read_profile_csv(path: &Path) -> Result<Vec<ProfileRow>> {
    csv_reader(path)?
        .deserialize()
        .collect::<std::result::Result<Vec<ProfileRow>, _>>()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
}

/// One row per (frequency bin, CDF level); `median_dbm` repeats the bin's
/// median on each of its rows.
pub fn write_distribution_csv(path: &Path, bins: &[BinDistribution]) -> Result<()> {
    let mut w = CsvOut::create(
        path,
        &[
            "per-bin received power distribution pooled over time and altitude (nearest-rank)",
            "freq_hz [Hz]; quantile_level [fraction]; power_dbm [dBm]; median_dbm [dBm]",
        ],
        "freq_hz,quantile_level,power_dbm,median_dbm",
    )?;
    for b in bins {
        for k in &b.knots {
            w.line(&format!("{},{},{},{}", b.freq_center_hz, k.level, k.power_dbm, b.median_dbm))?;
        }
    }
    w.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub freq_hz: f64,
    pub quantile_level: f64,
    pub power_dbm: f64,
    pub median_dbm: f64,
}

pub fn read_distribution_csv(path: &Path) -> Result<Vec<DistributionRow>> {
    csv_reader(path)?
        .deserialize()
        .collect::<std::result::Result<Vec<DistributionRow>, _>>()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub gridded: usize,
    pub out_of_band: usize,
    pub rejected_rows: usize,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub format_version: u32,
    pub campaign: String,
    pub band: BandConfig,
    pub analysis: AnalysisConfig,
    /// The run configuration that produced this report.
    pub run_config: serde_json::Value,
    pub n_band_dbm: f64,
    pub t6g_dbm: f64,
    pub n_bins: usize,
    pub samples: SampleCounts,
    pub usar_min: Option<f64>,
    pub usar_max: Option<f64>,
    pub max_lccb_hz: Option<f64>,
    pub profile: Vec<ProfileRow>,
}

pub const SUMMARY_FILE: &str = "summary.json";

impl ReportSummary {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
    }
}

pub struct ReportContext<'a> {
    pub campaign: &'a str,
    pub run_config: serde_json::Value,
    pub rejected_rows: usize,
}

fn grid_rows<F>(analysis: &BandAnalysis, value: F) -> Vec<GridRow>
where
    F: Fn(&crate::reliability::ReliabilityRow, usize) -> Option<f64>,
{
    let grid = &analysis.grid;
    let map = &analysis.reliability;
    let mut rows = Vec::new();
    for f in 0..map.n_bins {
        for row in &map.rows {
            if let Some(v) = value(row, f) {
                rows.push(GridRow {
                    freq_hz: grid.freq_center(f as i64),
                    alt_m: grid.alt_center(row.alt_bin),
                    value: v,
                });
            }
        }
    }
    rows
}

/// Writes the full report tree for one band into `dir` and returns the summary.
pub fn write_report(dir: &Path, analysis: &BandAnalysis, ctx: &ReportContext<'_>, cfg: &AnalysisConfig) -> Result<ReportSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let grid = &analysis.grid;

    write_grid_csv(
        &dir.join("p_usable.csv"),
        &grid_rows(analysis, |row, f| row.p_usable[f]),
        "value: p_usable, fraction of supported scan-windows meeting the cleanliness constraint (unsmoothed)",
    )?;
    write_grid_csv(
        &dir.join("smoothed_p.csv"),
        &grid_rows(analysis, |row, f| row.smoothed_p[f]),
        "value: frequency-smoothed reliability state [fraction]",
    )?;
    write_grid_csv(
        &dir.join("usable_mask.csv"),
        &grid_rows(analysis, |row, f| row.p_usable[f].map(|_| f64::from(u8::from(row.usable_mask[f])))),
        "value: 1 if reliably usable after smoothing, else 0",
    )?;
    let pmax: Vec<GridRow> = analysis
        .power
        .p_max
        .iter()
        .map(|c| GridRow {
            freq_hz: grid.freq_center(c.key.freq_bin),
            alt_m: grid.alt_center(c.key.alt_bin),
            value: c.value,
        })
        .collect();
    write_grid_csv(&dir.join("p_max.csv"), &pmax, "value: maximum measured power [dBm]")?;
    write_profile_csv(&dir.join("profile.csv"), &analysis.profile)?;
    write_distribution_csv(&dir.join("distribution.csv"), &analysis.power.distribution)?;

    let mut floor = CsvOut::create(
        &dir.join("noise_floor.csv"),
        &["per-bin temporal noise floor feeding N_band", "freq_hz [Hz]; floor_dbm [dBm]"],
        "freq_hz,floor_dbm",
    )?;
    for b in &analysis.noise.per_bin_floor {
        floor.line(&format!("{},{}", grid.freq_center(b.freq_bin), b.floor_dbm))?;
    }
    floor.finish()?;

    let usar = analysis.profile.usar_range();
    let summary = ReportSummary {
        format_version: FORMAT_VERSION,
        campaign: ctx.campaign.to_string(),
        band: grid.band().clone(),
        analysis: cfg.clone(),
        run_config: ctx.run_config.clone(),
        n_band_dbm: analysis.noise.n_band_dbm,
        t6g_dbm: analysis.threshold.t6g_dbm,
        n_bins: analysis.reliability.n_bins,
        samples: SampleCounts {
            gridded: grid.sample_count(),
            out_of_band: grid.out_of_band(),
            rejected_rows: ctx.rejected_rows,
        },
        usar_min: usar.map(|u| u.0),
        usar_max: usar.map(|u| u.1),
        max_lccb_hz: analysis.profile.max_lccb_hz(),
        profile: profile_rows(&analysis.profile),
    };
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverviewEntry {
    pub campaign: String,
    pub band: String,
    /// Report directory relative to the overview file.
    pub dir: String,
    pub n_band_dbm: f64,
    pub t6g_dbm: f64,
    pub usar_min: Option<f64>,
    pub usar_max: Option<f64>,
    pub max_lccb_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Overview {
    pub format_version: u32,
    pub reports: Vec<OverviewEntry>,
}

pub const OVERVIEW_FILE: &str = "overview.json";

/// Merges `entries` into `<root>/overview.json`, replacing earlier entries for
/// the same (campaign, band) and keeping the list sorted.
pub fn update_overview(root: &Path, entries: Vec<OverviewEntry>) -> Result<Overview> {
    let path = root.join(OVERVIEW_FILE);
    let mut overview = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Overview::default(),
        Err(e) => return Err(Error::io(&path, e)),
    };
    overview.format_version = FORMAT_VERSION;
    for entry in entries {
        overview
            .reports
            .retain(|r| !(r.campaign == entry.campaign && r.band == entry.band));
        overview.reports.push(entry);
    }
    overview
        .reports
        .sort_by(|a, b| (&a.campaign, &a.band).cmp(&(&b.campaign, &b.band)));
    write_json(&path, &overview)?;
    Ok(overview)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub alt_m: f64,
    pub usar_delta: f64,
    pub lccb_delta_hz: f64,
    pub sfi_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `b − a` at altitudes present in both reports.
    pub rows: Vec<DeltaRow>,
    pub only_in_a: Vec<f64>,
    pub only_in_b: Vec<f64>,
}

fn same(a: f64, b: f64) -> bool {
    a == b
}

/// Per-altitude deltas (`b − a`) of two reports sharing band and grid.
pub fn compare_reports(a: &ReportSummary, b: &ReportSummary) -> Result<Comparison> {
    let (ba, bb) = (&a.band, &b.band);
    let (ga, gb) = (&a.analysis.grid, &b.analysis.grid);
    let mismatch = [
        ("band_low_hz", same(ba.band_low_hz, bb.band_low_hz)),
        ("band_high_hz", same(ba.band_high_hz, bb.band_high_hz)),
        ("freq_bin_hz", same(ga.freq_bin_hz, gb.freq_bin_hz)),
        ("alt_bin_m", same(ga.alt_bin_m, gb.alt_bin_m)),
        ("window_s", same(ga.window_s, gb.window_s)),
    ]
    .into_iter()
    .filter(|(_, ok)| !ok)
    .map(|(name, _)| name)
    .collect::<Vec<_>>();
    if !mismatch.is_empty() {
        return Err(Error::config(format!(
            "reports are not comparable, differing: {}",
            mismatch.join(", ")
        )));
    }

    let mut rows = Vec::new();
    let mut only_in_a = Vec::new();
    for ra in &a.profile {
        match b.profile.iter().find(|rb| rb.alt_m == ra.alt_m) {
            Some(rb) => rows.push(DeltaRow {
                alt_m: ra.alt_m,
                usar_delta: rb.usar - ra.usar,
                lccb_delta_hz: rb.lccb_hz - ra.lccb_hz,
                sfi_delta: ra.sfi.zip(rb.sfi).map(|(x, y)| y - x),
            }),
            None => only_in_a.push(ra.alt_m),
        }
    }
    let only_in_b = b
        .profile
        .iter()
        .filter(|rb| !a.profile.iter().any(|ra| ra.alt_m == rb.alt_m))
        .map(|rb| rb.alt_m)
        .collect();
    Ok(Comparison {
        rows,
        only_in_a,
        only_in_b,
    })
}

pub fn write_comparison_csv(path: &Path, cmp: &Comparison) -> Result<()> {
    let mut w = CsvOut::create(
        path,
        &["per-altitude deltas, report B minus report A", "alt_m [m]; usar_delta; lccb_delta_hz [Hz]; sfi_delta (empty when undefined in either)"],
        "alt_m,usar_delta,lccb_delta_hz,sfi_delta",
    )?;
    for r in &cmp.rows {
        w.line(&format!("{},{},{},{}", r.alt_m, r.usar_delta, r.lccb_delta_hz, opt(r.sfi_delta)))?;
    }
    w.finish()
}
