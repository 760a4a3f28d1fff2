//! Structural metrics per altitude row, peak-power maps and per-bin power
//! distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CellKey, SampleGrid};
use crate::reliability::{ReliabilityMap, ReliabilityRow};
use crate::stats;

/// A maximal run of usable bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start_bin: usize,
    pub length_bins: usize,
}

/// Maximal runs of `true`, ordered by start.
pub fn segments(mask: &[bool]) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if !mask[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < mask.len() && mask[i] {
            i += 1;
        }
        out.push(Segment {
            start_bin: start,
            length_bins: i - start,
        });
    }
    out
}

/// Largest contiguous clean bandwidth in Hz; 0 with no segments.
pub fn lccb(segments: &[Segment], freq_bin_hz: f64) -> f64 {
    segments.iter().map(|s| s.length_bins).max().unwrap_or(0) as f64 * freq_bin_hz
}

/// Spectral fragmentation index `1 − max L / Σ L`; `None` with no segments.
pub fn sfi(segments: &[Segment]) -> Option<f64> {
    let total: usize = segments.iter().map(|s| s.length_bins).sum();
    if total == 0 {
        return None;
    }
    let largest = segments.iter().map(|s| s.length_bins).max().unwrap_or(0);
    Some(1.0 - largest as f64 / total as f64)
}

fn default_min_row_support() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltitudeMetrics {
    pub alt_bin: i64,
    pub alt_center_m: f64,
    pub usar: f64,
    pub lccb_hz: f64,
    pub sfi: Option<f64>,
    pub usable_bins: usize,
    pub supported_bins: usize,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralProfile {
    pub n_bins: usize,
    pub freq_bin_hz: f64,
    /// Fraction of core bins with support an altitude row needs to be emitted.
    #[serde(default = "default_min_row_support")]
    pub min_row_support: f64,
    /// Emitted rows, ascending by altitude.
    pub rows: Vec<AltitudeMetrics>,
}

impl StructuralProfile {
    pub fn usar_range(&self) -> Option<(f64, f64)> {
        let mut it = self.rows.iter().map(|r| r.usar);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), u| (lo.min(u), hi.max(u))))
    }

    pub fn max_lccb_hz(&self) -> Option<f64> {
        self.rows.iter().map(|r| r.lccb_hz).reduce(f64::max)
    }
}

fn row_emitted(row: &ReliabilityRow, n_bins: usize, min_row_support: f64) -> bool {
    n_bins > 0 && row.supported_bins() as f64 >= min_row_support * n_bins as f64
}

/// USAR per altitude row. Absent cells count as not usable; rows with fewer
/// than `min_row_support × N_b` supported bins are not emitted.
pub fn usar(map: &ReliabilityMap, min_row_support: f64) -> Vec<(i64, f64)> {
    map.rows
        .iter()
        .filter(|r| row_emitted(r, map.n_bins, min_row_support))
        .map(|r| {
            let usable = r.usable_mask.iter().filter(|&&u| u).count();
            (r.alt_bin, usable as f64 / map.n_bins as f64)
        })
        .collect()
}

/// USAR, LCCB, SFI and segment lists for every emitted altitude row.
pub fn structural_profile(
    map: &ReliabilityMap,
    grid: &SampleGrid,
    min_row_support: f64,
) -> Result<StructuralProfile> {
    if !(0.0..=1.0).contains(&min_row_support) {
        return Err(Error::config(format!(
            "min_row_support must lie in [0, 1], got {min_row_support}"
        )));
    }
    let freq_bin_hz = grid.config().freq_bin_hz;
    let usar_by_row = usar(map, min_row_support);
    let rows = usar_by_row
        .into_iter()
        .map(|(alt_bin, usar)| {
            let row = map.row(alt_bin).expect("row listed by usar");
            let segs = segments(&row.usable_mask);
            AltitudeMetrics {
                alt_bin,
                alt_center_m: grid.alt_center(alt_bin),
                usar,
                lccb_hz: lccb(&segs, freq_bin_hz),
                sfi: sfi(&segs),
                usable_bins: segs.iter().map(|s| s.length_bins).sum(),
                supported_bins: row.supported_bins(),
                segments: segs,
            }
        })
        .collect();
    Ok(StructuralProfile {
        n_bins: map.n_bins,
        freq_bin_hz,
        min_row_support,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellValue {
    pub key: CellKey,
    pub value: f64,
}

/// Maximum observed power per non-empty core-band cell, ordered by
/// (frequency, altitude).
pub fn pmax_map(grid: &SampleGrid) -> Vec<CellValue> {
    grid.core_cells()
        .filter(|(_, cell)| !cell.is_empty())
        .map(|(key, cell)| CellValue {
            key: *key,
            value: cell
                .iter()
                .map(|s| s.power_dbm)
                .fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

pub const DEFAULT_CDF_LEVELS: [f64; 7] = [0.1, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfKnot {
    pub level: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDistribution {
    pub freq_bin: i64,
    pub freq_center_hz: f64,
    pub sample_count: usize,
    pub median_dbm: f64,
    pub knots: Vec<CdfKnot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    pub p_max: Vec<CellValue>,
    /// Every frequency bin with samples, margin included, ascending.
    pub distribution: Vec<BinDistribution>,
}

pub fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::config("CDF level set is empty"));
    }
    if levels.iter().any(|l| !(l.is_finite() && *l > 0.0 && *l <= 1.0)) {
        return Err(Error::config("CDF levels must lie in (0, 1]"));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("CDF levels must be strictly increasing"));
    }
    Ok(())
}

/// Per frequency bin, pooled over altitude and time: nearest-rank median and
/// CDF knots at `levels`.
pub fn power_distribution(grid: &SampleGrid, levels: &[f64]) -> Result<Vec<BinDistribution>> {
    check_levels(levels)?;
    let mut out = Vec::new();
    let mut current: Option<(i64, Vec<f64>)> = None;
    let flush = |bin: i64, mut values: Vec<f64>, out: &mut Vec<BinDistribution>| {
        if values.is_empty() {
            return;
        }
        values.sort_by(f64::total_cmp);
        out.push(BinDistribution {
            freq_bin: bin,
            freq_center_hz: grid.freq_center(bin),
            sample_count: values.len(),
            median_dbm: stats::quantile_sorted(&values, 0.5).expect("non-empty"),
            knots: levels
                .iter()
                .map(|&level| CdfKnot {
                    level,
                    power_dbm: stats::quantile_sorted(&values, level).expect("non-empty"),
                })
                .collect(),
        });
    };
    // cells iterate ordered by frequency bin first
    for (key, cell) in grid.cells() {
        match &mut current {
            Some((bin, values)) if *bin == key.freq_bin => {
                values.extend(cell.iter().map(|s| s.power_dbm));
            }
            _ => {
                if let Some((bin, values)) = current.take() {
                    flush(bin, values, &mut out);
                }
                current = Some((key.freq_bin, cell.iter().map(|s| s.power_dbm).collect()));
            }
        }
    }
    if let Some((bin, values)) = current {
        flush(bin, values, &mut out);
    }
    Ok(out)
}

pub fn power_summary(grid: &SampleGrid, levels: &[f64]) -> Result<PowerSummary> {
    Ok(PowerSummary {
        p_max: pmax_map(grid),
        distribution: power_distribution(grid, levels)?,
    })
}
