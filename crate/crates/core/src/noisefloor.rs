//! Band noise reference and the usability threshold derived from it.
//!
//! The reference is a two-stage cascade over dB values: a low temporal
//! quantile per core-band frequency bin (pooling every altitude), then a
//! frequency quantile across those per-bin floors. Empty bins are excluded
//! from the second stage, not imputed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SampleGrid;
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub temporal_quantile: f64,
    pub frequency_quantile: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            temporal_quantile: 0.10,
            frequency_quantile: 0.25,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        stats::check_open_fraction("temporal_quantile", self.temporal_quantile)?;
        stats::check_open_fraction("frequency_quantile", self.frequency_quantile)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinFloor {
    pub freq_bin: i64,
    pub floor_dbm: f64,
}

/// Output of the first (temporal) stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalFloor {
    pub temporal_quantile: f64,
    /// Ascending by frequency bin.
    pub bins: Vec<BinFloor>,
    /// Core-band bins with no samples at all.
    pub empty_bins: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReference {
    pub n_band_dbm: f64,
    pub temporal_quantile: f64,
    pub frequency_quantile: f64,
    pub per_bin_floor: Vec<BinFloor>,
    pub empty_bins: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsabilityThreshold {
    pub t6g_dbm: f64,
    pub delta_db: f64,
}

impl UsabilityThreshold {
    /// Sample-level usability: strictly below the threshold.
    pub fn is_usable(&self, power_dbm: f64) -> bool {
        power_dbm < self.t6g_dbm
    }
}

/// Temporal `q_time` quantile for each core-band frequency bin.
pub fn per_bin_temporal_floor(grid: &SampleGrid, q_time: f64) -> Result<TemporalFloor> {
    stats::check_open_fraction("temporal_quantile", q_time)?;
    let n_bins = grid.n_core_bins();
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (key, cell) in grid.core_cells() {
        pooled[key.freq_bin as usize].extend(cell.iter().map(|s| s.power_dbm));
    }

    let mut bins = Vec::new();
    let mut empty_bins = Vec::new();
    for (idx, values) in pooled.iter().enumerate() {
        match stats::quantile(values, q_time) {
            Some(floor_dbm) => bins.push(BinFloor {
                freq_bin: idx as i64,
                floor_dbm,
            }),
            None => empty_bins.push(idx as i64),
        }
    }
    if bins.is_empty() {
        return Err(Error::EmptyInput(format!(
            "band '{}' has no core-band samples for the noise reference",
            grid.band().label
        )));
    }
    if !empty_bins.is_empty() {
        log::debug!(
            "band '{}': {} empty core bins excluded from noise reference",
            grid.band().label,
            empty_bins.len()
        );
    }
    Ok(TemporalFloor {
        temporal_quantile: q_time,
        bins,
        empty_bins,
    })
}

/// Frequency `q_freq` quantile across per-bin floors.
pub fn band_noise_reference(floor: &TemporalFloor, q_freq: f64) -> Result<NoiseReference> {
    stats::check_open_fraction("frequency_quantile", q_freq)?;
    let values: Vec<f64> = floor.bins.iter().map(|b| b.floor_dbm).collect();
    let n_band_dbm = stats::quantile(&values, q_freq)
        .ok_or_else(|| Error::EmptyInput("no per-bin floors".into()))?;
    Ok(NoiseReference {
        n_band_dbm,
        temporal_quantile: floor.temporal_quantile,
        frequency_quantile: q_freq,
        per_bin_floor: floor.bins.clone(),
        empty_bins: floor.empty_bins.clone(),
    })
}

pub fn estimate_noise_reference(grid: &SampleGrid, cfg: &NoiseConfig) -> Result<NoiseReference> {
    cfg.validate()?;
    let floor = per_bin_temporal_floor(grid, cfg.temporal_quantile)?;
    band_noise_reference(&floor, cfg.frequency_quantile)
}

/// `T_6G = N_band + Δ`.
pub fn threshold(nr: &NoiseReference, delta_db: f64) -> Result<UsabilityThreshold> {
    if !delta_db.is_finite() || delta_db < 0.0 {
        return Err(Error::config(format!("delta_db must be >= 0, got {delta_db}")));
    }
    Ok(UsabilityThreshold {
        t6g_dbm: nr.n_band_dbm + delta_db,
        delta_db,
    })
}
