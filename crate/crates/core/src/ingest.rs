//! Sweep record ingestion and altitude–frequency–time gridding.
//!
//! Raw records come from CSV exports with a JSON sidecar that names the four
//! required columns and their units. Validated samples are bucketed into
//! `(frequency bin, altitude bin)` cells; within a cell samples are kept in
//! ascending time order.
//!
//! Frequency bins are anchored at the band's lower edge and altitude bins at
//! 0 m, both half-open: a value exactly on a bin's upper edge belongs to the
//! next bin. Frequency indices are signed because margin bins below the band
//! edge get negative indices.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub freq_hz: f64,
    /// Seconds on a campaign-local monotonic clock. Not globally sorted.
    pub time_s: f64,
    pub alt_m: f64,
    pub power_dbm: f64,
}

impl SweepSample {
    /// Why this sample must be rejected, if it must.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.freq_hz.is_finite() || self.freq_hz <= 0.0 {
            return Err(format!("frequency must be positive and finite, got {}", self.freq_hz));
        }
        if !self.time_s.is_finite() {
            return Err(format!("time must be finite, got {}", self.time_s));
        }
        if !self.alt_m.is_finite() || self.alt_m < 0.0 {
            return Err(format!("altitude must be >= 0 and finite, got {}", self.alt_m));
        }
        if !self.power_dbm.is_finite() {
            return Err(format!("power must be finite, got {}", self.power_dbm));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "Hz")]
    Hz,
    #[serde(rename = "kHz")]
    KHz,
    #[serde(rename = "MHz")]
    MHz,
    #[serde(rename = "GHz")]
    GHz,
    #[serde(rename = "s")]
    Seconds,
    #[serde(rename = "ms")]
    Millis,
    #[serde(rename = "m")]
    Meters,
    #[serde(rename = "dBm")]
    DBm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Frequency,
    Time,
    Altitude,
    Power,
}

impl Unit {
    fn quantity(self) -> Quantity {
        match self {
            Unit::Hz | Unit::KHz | Unit::MHz | Unit::GHz => Quantity::Frequency,
            Unit::Seconds | Unit::Millis => Quantity::Time,
            Unit::Meters => Quantity::Altitude,
            Unit::DBm => Quantity::Power,
        }
    }

    /// Multiplier into the canonical unit (Hz, s, m, dBm).
    pub fn scale(self) -> f64 {
        match self {
            Unit::Hz | Unit::Seconds | Unit::Meters | Unit::DBm => 1.0,
            Unit::KHz => 1e3,
            Unit::MHz => 1e6,
            Unit::GHz => 1e9,
            Unit::Millis => 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub column: String,
    pub unit: Unit,
}

impl ColumnSpec {
    pub fn new(column: impl Into<String>, unit: Unit) -> Self {
        Self {
            column: column.into(),
            unit,
        }
    }
}

/// Column mapping read from the JSON sidecar next to a sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSchema {
    pub frequency: ColumnSpec,
    pub time: ColumnSpec,
    pub altitude: ColumnSpec,
    pub power: ColumnSpec,
}

impl Default for SweepSchema {
    /// The layout written by the synthetic generator.
    fn default() -> Self {
        Self {
            frequency: ColumnSpec::new("freq_hz", Unit::Hz),
            time: ColumnSpec::new("time_s", Unit::Seconds),
            altitude: ColumnSpec::new("alt_m", Unit::Meters),
            power: ColumnSpec::new("power_dbm", Unit::DBm),
        }
    }
}

impl SweepSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("frequency", &self.frequency, Quantity::Frequency),
            ("time", &self.time, Quantity::Time),
            ("altitude", &self.altitude, Quantity::Altitude),
            ("power", &self.power, Quantity::Power),
        ];
        for (role, spec, expected) in checks {
            if spec.unit.quantity() != expected {
                return Err(Error::config(format!(
                    "{role} column '{}' has incompatible unit {:?}",
                    spec.column, spec.unit
                )));
            }
            if spec.column.is_empty() {
                return Err(Error::config(format!("{role} column name is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    /// 1-based line number in the source file (header is line 1).
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedSweeps {
    pub samples: Vec<SweepSample>,
    pub rejected: Vec<RejectedRow>,
}

impl ParsedSweeps {
    pub fn rows_read(&self) -> usize {
        self.samples.len() + self.rejected.len()
    }
}

struct ColumnIndices {
    freq: usize,
    time: usize,
    alt: usize,
    power: usize,
}

/// Streaming reader yielding one outcome per data row.
pub struct SweepReader<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    columns: ColumnIndices,
    scales: [f64; 4],
    source: String,
}

impl<R: Read> SweepReader<R> {
    pub fn new(reader: R, schema: &SweepSchema, source: &str) -> Result<Self> {
        schema.validate()?;
        let mut csv_reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let headers = csv_reader
            .headers()
            .map_err(|source_err| Error::Csv {
                path: source.into(),
                source: source_err,
            })?
            .clone();
        let find = |spec: &ColumnSpec| {
            headers
                .iter()
                .position(|h| h == spec.column)
                .ok_or_else(|| {
                    Error::config(format!("{source}: missing column '{}'", spec.column))
                })
        };
        let columns = ColumnIndices {
            freq: find(&schema.frequency)?,
            time: find(&schema.time)?,
            alt: find(&schema.altitude)?,
            power: find(&schema.power)?,
        };
        Ok(Self {
            records: csv_reader.into_records(),
            columns,
            scales: [
                schema.frequency.unit.scale(),
                schema.time.unit.scale(),
                schema.altitude.unit.scale(),
                schema.power.unit.scale(),
            ],
            source: source.to_string(),
        })
    }

    fn convert(&self, record: &csv::StringRecord) -> std::result::Result<SweepSample, String> {
        let field = |idx: usize, name: &str| -> std::result::Result<f64, String> {
            let raw = record
                .get(idx)
                .ok_or_else(|| format!("row has no {name} field"))?;
            raw.parse::<f64>()
                .map_err(|_| format!("{name} field '{raw}' is not a number"))
        };
        let sample = SweepSample {
            freq_hz: field(self.columns.freq, "frequency")? * self.scales[0],
            time_s: field(self.columns.time, "time")? * self.scales[1],
            alt_m: field(self.columns.alt, "altitude")? * self.scales[2],
            power_dbm: field(self.columns.power, "power")? * self.scales[3],
        };
        sample.validate()?;
        Ok(sample)
    }
}

impl<R: Read> Iterator for SweepReader<R> {
    type Item = std::result::Result<SweepSample, RejectedRow>;

    fn next(&mut self) -> Option<Self::Item> {
        let record = self.records.next()?;
        let outcome = match record {
            Ok(record) => {
                let line = record.position().map_or(0, |p| p.line());
                self.convert(&record)
                    .map_err(|reason| RejectedRow { line, reason })
            }
            Err(err) => {
                let line = err.position().map_or(0, |p| p.line());
                Err(RejectedRow {
                    line,
                    reason: err.to_string(),
                })
            }
        };
        if let Err(rejected) = &outcome {
            warn!(
                "{}: line {} rejected: {}",
                self.source, rejected.line, rejected.reason
            );
        }
        Some(outcome)
    }
}

/// Parses every row from `reader`, splitting valid samples from rejected rows.
pub fn read_sweeps<R: Read>(reader: R, schema: &SweepSchema, source: &str) -> Result<ParsedSweeps> {
    let mut parsed = ParsedSweeps::default();
    for outcome in SweepReader::new(reader, schema, source)? {
        match outcome {
            Ok(sample) => parsed.samples.push(sample),
            Err(rejected) => parsed.rejected.push(rejected),
        }
    }
    if parsed.rows_read() == 0 {
        warn!("{source}: no data rows");
    } else if !parsed.rejected.is_empty() {
        warn!(
            "{source}: {} of {} rows rejected",
            parsed.rejected.len(),
            parsed.rows_read()
        );
    }
    Ok(parsed)
}

pub fn parse_sweep_file(path: &Path, schema: &SweepSchema) -> Result<ParsedSweeps> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sweeps(file, schema, &path.display().to_string())
}

fn default_margin_hz() -> f64 {
    50e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub label: String,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    /// Symmetric extension used only for distribution summaries.
    #[serde(default = "default_margin_hz")]
    pub margin_hz: f64,
}

impl BandConfig {
    pub fn new(label: impl Into<String>, band_low_hz: f64, band_high_hz: f64) -> Self {
        Self {
            label: label.into(),
            band_low_hz,
            band_high_hz,
            margin_hz: default_margin_hz(),
        }
    }

    pub fn with_margin(mut self, margin_hz: f64) -> Self {
        self.margin_hz = margin_hz;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.band_low_hz.is_finite() && self.band_high_hz.is_finite())
            || self.band_low_hz <= 0.0
            || self.band_low_hz >= self.band_high_hz
        {
            return Err(Error::config(format!(
                "band '{}': need 0 < band_low_hz < band_high_hz, got [{}, {}]",
                self.label, self.band_low_hz, self.band_high_hz
            )));
        }
        if !self.margin_hz.is_finite() || self.margin_hz < 0.0 {
            return Err(Error::config(format!(
                "band '{}': margin_hz must be >= 0, got {}",
                self.label, self.margin_hz
            )));
        }
        Ok(())
    }

    /// Number of core-band frequency bins (N_b). A trailing partial bin counts.
    pub fn n_bins(&self, freq_bin_hz: f64) -> usize {
        ((self.band_high_hz - self.band_low_hz) / freq_bin_hz - 1e-9).ceil() as usize
    }

    pub fn extended_contains(&self, freq_hz: f64) -> bool {
        freq_hz >= self.band_low_hz - self.margin_hz && freq_hz <= self.band_high_hz + self.margin_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub freq_bin_hz: f64,
    pub alt_bin_m: f64,
    /// Scan-window duration.
    pub window_s: f64,
    /// Samples a scan-window needs before it counts as supported.
    pub min_samples_time: usize,
    /// Time-supported frequency bins an altitude row needs before its cells count.
    pub min_samples_freq: usize,
    /// Supported scan-windows a cell needs before p_usable is reported.
    pub min_supported_windows: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            freq_bin_hz: 60e3,
            alt_bin_m: 10.0,
            window_s: 60.0,
            min_samples_time: 2,
            min_samples_freq: 2,
            min_supported_windows: 2,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("freq_bin_hz", self.freq_bin_hz),
            ("alt_bin_m", self.alt_bin_m),
            ("window_s", self.window_s),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("min_samples_time", self.min_samples_time),
            ("min_samples_freq", self.min_samples_freq),
            ("min_supported_windows", self.min_supported_windows),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Absolute scan-window index `floor(t / Δt)`.
    pub fn window_index(&self, time_s: f64) -> i64 {
        (time_s / self.window_s).floor() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub freq_bin: i64,
    pub alt_bin: i64,
}

impl CellKey {
    pub fn new(freq_bin: i64, alt_bin: i64) -> Self {
        Self { freq_bin, alt_bin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPower {
    pub time_s: f64,
    pub power_dbm: f64,
}

fn cmp_timed(a: &TimedPower, b: &TimedPower) -> std::cmp::Ordering {
    a.time_s
        .total_cmp(&b.time_s)
        .then(a.power_dbm.total_cmp(&b.power_dbm))
}

/// Samples bucketed into `(frequency bin, altitude bin)` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    band: BandConfig,
    grid: GridConfig,
    cells: BTreeMap<CellKey, Vec<TimedPower>>,
    out_of_band: usize,
}

impl SampleGrid {
    pub fn new(band: BandConfig, grid: GridConfig) -> Result<Self> {
        band.validate()?;
        grid.validate()?;
        Ok(Self {
            band,
            grid,
            cells: BTreeMap::new(),
            out_of_band: 0,
        })
    }

    pub fn band(&self) -> &BandConfig {
        &self.band
    }

    pub fn config(&self) -> &GridConfig {
        &self.grid
    }

    pub fn freq_bin_of(&self, freq_hz: f64) -> i64 {
        ((freq_hz - self.band.band_low_hz) / self.grid.freq_bin_hz).floor() as i64
    }

    pub fn alt_bin_of(&self, alt_m: f64) -> i64 {
        (alt_m / self.grid.alt_bin_m).floor() as i64
    }

    pub fn freq_center(&self, freq_bin: i64) -> f64 {
        self.band.band_low_hz + (freq_bin as f64 + 0.5) * self.grid.freq_bin_hz
    }

    pub fn alt_center(&self, alt_bin: i64) -> f64 {
        (alt_bin as f64 + 0.5) * self.grid.alt_bin_m
    }

    /// Number of core-band bins, N_b. Core bins are `0..n_core_bins()`.
    pub fn n_core_bins(&self) -> usize {
        self.band.n_bins(self.grid.freq_bin_hz)
    }

    pub fn is_core(&self, freq_bin: i64) -> bool {
        freq_bin >= 0 && (freq_bin as usize) < self.n_core_bins()
    }

    /// Adds one sample without restoring per-cell order. Returns false (and
    /// counts it) when the sample lies outside the margin-extended band.
    fn push(&mut self, sample: &SweepSample) -> bool {
        if !self.band.extended_contains(sample.freq_hz) {
            self.out_of_band += 1;
            return false;
        }
        let key = CellKey::new(self.freq_bin_of(sample.freq_hz), self.alt_bin_of(sample.alt_m));
        self.cells.entry(key).or_default().push(TimedPower {
            time_s: sample.time_s,
            power_dbm: sample.power_dbm,
        });
        true
    }

    fn sort_cells(&mut self) {
        for samples in self.cells.values_mut() {
            samples.sort_by(cmp_timed);
        }
    }

    /// Merges another grid built with the same configuration. The result does
    /// not depend on merge order.
    pub fn merge(&mut self, other: SampleGrid) -> Result<()> {
        if self.band != other.band || self.grid != other.grid {
            return Err(Error::config("cannot merge grids with different band or grid configuration"));
        }
        for (key, samples) in other.cells {
            self.cells.entry(key).or_default().extend(samples);
        }
        self.out_of_band += other.out_of_band;
        self.sort_cells();
        Ok(())
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &[TimedPower])> {
        self.cells.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn cell(&self, key: CellKey) -> &[TimedPower] {
        self.cells.get(&key).map_or(&[], Vec::as_slice)
    }

    pub fn core_cells(&self) -> impl Iterator<Item = (&CellKey, &[TimedPower])> {
        self.cells().filter(|(k, _)| self.is_core(k.freq_bin))
    }

    /// Altitude bins that hold at least one core-band sample, ascending.
    pub fn core_altitude_bins(&self) -> Vec<i64> {
        let set: BTreeSet<i64> = self.core_cells().map(|(k, _)| k.alt_bin).collect();
        set.into_iter().collect()
    }

    /// Frequency bins (core and margin) holding at least one sample, ascending.
    pub fn frequency_bins(&self) -> Vec<i64> {
        let set: BTreeSet<i64> = self.cells.keys().map(|k| k.freq_bin).collect();
        set.into_iter().collect()
    }

    pub fn sample_count(&self) -> usize {
        self.cells.values().map(Vec::len).sum()
    }

    pub fn out_of_band(&self) -> usize {
        self.out_of_band
    }
}

/// Buckets `samples` into a grid over the margin-extended band.
pub fn build_grid<'a, I>(samples: I, band: &BandConfig, grid: &GridConfig) -> Result<SampleGrid>
where
    I: IntoIterator<Item = &'a SweepSample>,
{
    let mut out = SampleGrid::new(band.clone(), grid.clone())?;
    for sample in samples {
        out.push(sample);
    }
    if out.cells.is_empty() {
        return Err(Error::EmptyBand(format!(
            "band '{}' [{} Hz, {} Hz] ± {} Hz",
            band.label, band.band_low_hz, band.band_high_hz, band.margin_hz
        )));
    }
    out.sort_cells();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSupport {
    pub time_count: usize,
    pub window_count: usize,
}

/// Sample count and number of distinct scan-windows touched by a cell.
pub fn cell_support(samples: &[TimedPower], grid: &GridConfig) -> CellSupport {
    let windows: BTreeSet<i64> = samples.iter().map(|s| grid.window_index(s.time_s)).collect();
    CellSupport {
        time_count: samples.len(),
        window_count: windows.len(),
    }
}
