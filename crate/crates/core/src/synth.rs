//! Seeded synthetic spectrum environments with known ground truth.
//!
//! Every cell of the margin-extended band is visited at a fixed rate at each
//! scenario altitude, with a small per-bin stagger inside each revisit period
//! to mimic a sweep. Noise is the floor plus uniform jitter in dB. Emitters
//! switch on and off with a deterministic periodic schedule whose phase comes
//! from the seed, so the contaminated scan-windows are known exactly.

pub mod oracle;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BandConfig, CellKey, GridConfig, SweepSample, SweepSchema};
use crate::reliability::FRACTION_TOL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltitudeGain {
    pub alt_m: f64,
    pub gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSpec {
    pub center_hz: f64,
    /// Bins whose center lies in `[center − width/2, center + width/2)` are hit.
    pub width_hz: f64,
    /// Received power while on, before the altitude gain.
    pub power_dbm: f64,
    pub duty_cycle: f64,
    pub period_s: f64,
    /// Offsets for specific scenario altitudes; unlisted altitudes get 0 dB.
    #[serde(default)]
    pub altitude_gain_db: Vec<AltitudeGain>,
}

impl EmitterSpec {
    pub fn covers(&self, freq_hz: f64) -> bool {
        let half = self.width_hz / 2.0;
        freq_hz >= self.center_hz - half && freq_hz < self.center_hz + half
    }

    fn gain_at(&self, alt_m: f64) -> f64 {
        self.altitude_gain_db
            .iter()
            .find(|g| (g.alt_m - alt_m).abs() < 1e-9)
            .map_or(0.0, |g| g.gain_db)
    }

    /// On for the first `duty × period` seconds of every period.
    fn is_on(&self, time_s: f64, phase_s: f64) -> bool {
        if self.duty_cycle >= 1.0 {
            return true;
        }
        (time_s + phase_s).rem_euclid(self.period_s) < self.duty_cycle * self.period_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub noise_floor_dbm: f64,
    /// Noise is uniform in `floor ± jitter_db`.
    pub jitter_db: f64,
    #[serde(default)]
    pub emitters: Vec<EmitterSpec>,
    #[serde(default)]
    pub start_time_s: f64,
    pub duration_s: f64,
    /// Visits per second to each (frequency, altitude) cell.
    pub cell_sample_rate_hz: f64,
    pub altitudes_m: Vec<f64>,
    pub rng_seed: u64,
}

impl ScenarioSpec {
    /// A no-emitter scenario at −100 dBm ± 1 dB.
    pub fn clean(altitudes_m: Vec<f64>, duration_s: f64, rng_seed: u64) -> Self {
        Self {
            noise_floor_dbm: -100.0,
            jitter_db: 1.0,
            emitters: vec![],
            start_time_s: 0.0,
            duration_s,
            cell_sample_rate_hz: 0.2,
            altitudes_m,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if !self.noise_floor_dbm.is_finite() {
            return bad("noise_floor_dbm must be finite".into());
        }
        if !self.jitter_db.is_finite() || self.jitter_db < 0.0 {
            return bad(format!("jitter_db must be >= 0, got {}", self.jitter_db));
        }
        if !self.start_time_s.is_finite() {
            return bad("start_time_s must be finite".into());
        }
        if !self.duration_s.is_finite() || self.duration_s <= 0.0 {
            return bad(format!("duration_s must be > 0, got {}", self.duration_s));
        }
        if !self.cell_sample_rate_hz.is_finite() || self.cell_sample_rate_hz <= 0.0 {
            return bad(format!("cell_sample_rate_hz must be > 0, got {}", self.cell_sample_rate_hz));
        }
        if self.altitudes_m.is_empty() || self.altitudes_m.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return bad("altitudes_m must be a non-empty list of values >= 0".into());
        }
        for (i, e) in self.emitters.iter().enumerate() {
            if !e.width_hz.is_finite() || e.width_hz <= 0.0 || !e.center_hz.is_finite() {
                return bad(format!("emitter {i}: width_hz must be > 0"));
            }
            if !(0.0..=1.0).contains(&e.duty_cycle) {
                return bad(format!("emitter {i}: duty_cycle must lie in [0, 1], got {}", e.duty_cycle));
            }
            if !e.period_s.is_finite() || e.period_s <= 0.0 {
                return bad(format!("emitter {i}: period_s must be > 0"));
            }
            if !e.power_dbm.is_finite() || e.altitude_gain_db.iter().any(|g| !g.gain_db.is_finite()) {
                return bad(format!("emitter {i}: powers must be finite"));
            }
        }
        Ok(())
    }

    fn visits_per_cell(&self) -> usize {
        ((self.duration_s * self.cell_sample_rate_hz) + 1e-9).floor().max(1.0) as usize
    }
}

/// Sample counts of one generated `(f, h, k)` scan-window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowTruth {
    pub freq_bin: i64,
    pub alt_bin: i64,
    pub window_index: i64,
    pub total_samples: usize,
    /// Samples taken while at least one emitter covering the bin was on.
    pub active_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub rng_seed: u64,
    /// Emitter phases drawn from the seed, in emitter order.
    pub emitter_phases_s: Vec<f64>,
    /// Bins each emitter covers, in emitter order.
    pub emitter_bins: Vec<Vec<i64>>,
    /// Windows with at least one active sample, ordered by (f, h, k).
    pub contaminated: Vec<WindowTruth>,
    #[serde(skip)]
    windows: Vec<WindowTruth>,
}

impl GroundTruth {
    /// Every generated window, contaminated or not.
    pub fn windows(&self) -> &[WindowTruth] {
        &self.windows
    }

    /// Expected unsmoothed p_usable per cell under the given support minima,
    /// assuming `floor + jitter < T_6G ≤ weakest active emitter power`: clean
    /// samples are usable and active samples are not. The row-level frequency
    /// support rule is not applied.
    pub fn expected_p_usable(&self, epsilon: f64, grid: &GridConfig) -> BTreeMap<CellKey, Option<f64>> {
        let mut cells: BTreeMap<CellKey, (usize, usize)> = BTreeMap::new();
        for w in &self.windows {
            let entry = cells.entry(CellKey::new(w.freq_bin, w.alt_bin)).or_default();
            if w.total_samples >= grid.min_samples_time {
                entry.0 += 1;
                let eta = (w.total_samples - w.active_samples) as f64 / w.total_samples as f64;
                if eta >= 1.0 - epsilon - FRACTION_TOL {
                    entry.1 += 1;
                }
            }
        }
        cells
            .into_iter()
            .map(|(key, (k, u))| (key, (k >= grid.min_supported_windows).then(|| u as f64 / k as f64)))
            .collect()
    }
}

fn db_sum(levels_dbm: &[f64]) -> f64 {
    10.0 * levels_dbm.iter().map(|p| 10f64.powf(p / 10.0)).sum::<f64>().log10()
}

/// Frequency bin indices (relative to the band's lower edge) whose centers
/// lie inside the margin-extended band.
pub fn extended_bins(band: &BandConfig, grid: &GridConfig) -> Vec<i64> {
    let lo = ((-band.margin_hz) / grid.freq_bin_hz).floor() as i64 - 1;
    let hi = band.n_bins(grid.freq_bin_hz) as i64 + (band.margin_hz / grid.freq_bin_hz).ceil() as i64 + 1;
    (lo..=hi)
        .filter(|&i| band.extended_contains(band.band_low_hz + (i as f64 + 0.5) * grid.freq_bin_hz))
        .collect()
}

pub fn generate(spec: &ScenarioSpec, band: &BandConfig, grid: &GridConfig) -> Result<(Vec<SweepSample>, GroundTruth)> {
    spec.validate()?;
    band.validate()?;
    grid.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let phases: Vec<f64> = spec.emitters.iter().map(|e| rng.gen_range(0.0..e.period_s)).collect();

    let bins = extended_bins(band, grid);
    let centers: Vec<f64> = bins
        .iter()
        .map(|&i| band.band_low_hz + (i as f64 + 0.5) * grid.freq_bin_hz)
        .collect();
    let covering: Vec<Vec<usize>> = centers
        .iter()
        .map(|&c| (0..spec.emitters.len()).filter(|&e| spec.emitters[e].covers(c)).collect())
        .collect();
    let emitter_bins = (0..spec.emitters.len())
        .map(|e| bins.iter().zip(&covering).filter(|(_, cov)| cov.contains(&e)).map(|(&b, _)| b).collect())
        .collect();

    let revisit = 1.0 / spec.cell_sample_rate_hz;
    let visits = spec.visits_per_cell();
    let mut samples = Vec::with_capacity(visits * bins.len() * spec.altitudes_m.len());
    let mut windows: BTreeMap<(i64, i64, i64), (usize, usize)> = BTreeMap::new();
    let mut levels = Vec::with_capacity(spec.emitters.len() + 1);

    for &alt_m in &spec.altitudes_m {
        let alt_bin = (alt_m / grid.alt_bin_m).floor() as i64;
        for visit in 0..visits {
            for (pos, (&bin, &freq_hz)) in bins.iter().zip(&centers).enumerate() {
                let time_s = spec.start_time_s
                    + visit as f64 * revisit
                    + revisit * pos as f64 / bins.len() as f64;
                let jitter = if spec.jitter_db > 0.0 {
                    rng.gen_range(-spec.jitter_db..=spec.jitter_db)
                } else {
                    0.0
                };
                levels.clear();
                levels.push(spec.noise_floor_dbm + jitter);
                for &e in &covering[pos] {
                    let emitter = &spec.emitters[e];
                    if emitter.is_on(time_s, phases[e]) {
                        levels.push(emitter.power_dbm + emitter.gain_at(alt_m));
                    }
                }
                let active = levels.len() > 1;
                let power_dbm = if active { db_sum(&levels) } else { levels[0] };
                samples.push(SweepSample {
                    freq_hz,
                    time_s,
                    alt_m,
                    power_dbm,
                });
                let window = (time_s / grid.window_s).floor() as i64;
                let entry = windows.entry((bin, alt_bin, window)).or_default();
                entry.0 += 1;
                entry.1 += usize::from(active);
            }
        }
    }

    let windows: Vec<WindowTruth> = windows
        .into_iter()
        .map(|((freq_bin, alt_bin, window_index), (total, active))| WindowTruth {
            freq_bin,
            alt_bin,
            window_index,
            total_samples: total,
            active_samples: active,
        })
        .collect();
    let truth = GroundTruth {
        rng_seed: spec.rng_seed,
        emitter_phases_s: phases,
        emitter_bins,
        contaminated: windows.iter().filter(|w| w.active_samples > 0).copied().collect(),
        windows,
    };
    Ok((samples, truth))
}

/// Writes samples in the default ingest layout (see [`SweepSchema::default`]).
pub fn write_samples_csv(path: &Path, samples: &[SweepSample]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "freq_hz,time_s,alt_m,power_dbm").map_err(io)?;
    for s in samples {
        writeln!(out, "{},{},{},{}", s.freq_hz, s.time_s, s.alt_m, s.power_dbm).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_schema_json(path: &Path, schema: &SweepSchema) -> Result<()> {
    write_json(path, schema)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
