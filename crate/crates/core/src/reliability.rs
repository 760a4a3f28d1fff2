//! Scan-window usability and per-cell reliability.
//!
//! Samples in a cell are grouped into absolute scan-windows `floor(t / Δt)`.
//! A window's usable fraction η counts samples strictly below T_6G; the window
//! is usable when `η ≥ 1 − ε`. `p_usable` for a cell is the fraction of its
//! supported windows that are usable. Cells without enough support are
//! absent, never zero-filled.
//!
//! The reliability state is then smoothed across frequency within each
//! altitude row; see [`SmoothingRule`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CellKey, GridConfig, SampleGrid, TimedPower};
use crate::noisefloor::UsabilityThreshold;

/// Absorbs binary rounding in `1 − ε` so that e.g. η = 19/20 passes ε = 0.05.
pub const FRACTION_TOL: f64 = 1e-9;

/// `value ≥ 1 − ε`, inclusive at the boundary.
pub fn meets_reliability(value: f64, epsilon: f64) -> bool {
    value >= 1.0 - epsilon - FRACTION_TOL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanWindowStat {
    pub window_index: i64,
    pub sample_count: usize,
    pub usable_count: usize,
}

impl ScanWindowStat {
    /// Within-window usable fraction η.
    pub fn eta(&self) -> f64 {
        self.usable_count as f64 / self.sample_count as f64
    }
}

/// One stat per non-empty scan-window, ascending by window index.
pub fn window_stats(
    samples: &[TimedPower],
    threshold: &UsabilityThreshold,
    grid: &GridConfig,
) -> Vec<ScanWindowStat> {
    let mut windows: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    for s in samples {
        let entry = windows.entry(grid.window_index(s.time_s)).or_default();
        entry.0 += 1;
        if threshold.is_usable(s.power_dbm) {
            entry.1 += 1;
        }
    }
    windows
        .into_iter()
        .map(|(window_index, (sample_count, usable_count))| ScanWindowStat {
            window_index,
            sample_count,
            usable_count,
        })
        .collect()
}

pub fn window_usable(stat: &ScanWindowStat, epsilon: f64) -> bool {
    meets_reliability(stat.eta(), epsilon)
}

/// How the per-row moving average turns into the usable mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingRule {
    /// Threshold each cell at `p_usable ≥ 1 − ε`, average that binary mask
    /// over the window, keep cells where usable neighbours are a strict
    /// majority. Exact ties keep the cell's own state.
    #[default]
    MajorityVote,
    /// Average the real-valued `p_usable`, then threshold at `1 − ε`.
    FractionThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow {
    pub alt_bin: i64,
    /// Indexed by core frequency bin.
    pub p_usable: Vec<Option<f64>>,
    /// |K| per cell: windows with enough samples.
    pub supported_windows: Vec<usize>,
    pub smoothed_p: Vec<Option<f64>>,
    pub usable_mask: Vec<bool>,
}

impl ReliabilityRow {
    pub fn supported_bins(&self) -> usize {
        self.p_usable.iter().filter(|p| p.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityMap {
    pub n_bins: usize,
    pub epsilon: f64,
    pub smoothing_width: usize,
    pub smoothing_rule: SmoothingRule,
    /// Ascending by altitude bin.
    pub rows: Vec<ReliabilityRow>,
}

impl ReliabilityMap {
    /// Builds an unsmoothed map directly from `p_usable` rows.
    pub fn from_p_rows(rows: Vec<(i64, Vec<Option<f64>>)>, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let n_bins = rows.first().map_or(0, |r| r.1.len());
        if rows.iter().any(|r| r.1.len() != n_bins) {
            return Err(Error::config("reliability rows must have equal length"));
        }
        let rows = rows
            .into_iter()
            .map(|(alt_bin, p_usable)| {
                let supported_windows = p_usable.iter().map(|p| usize::from(p.is_some())).collect();
                unsmoothed_row(alt_bin, p_usable, supported_windows, epsilon)
            })
            .collect();
        Ok(Self {
            n_bins,
            epsilon,
            smoothing_width: 1,
            smoothing_rule: SmoothingRule::default(),
            rows,
        })
    }

    pub fn row(&self, alt_bin: i64) -> Option<&ReliabilityRow> {
        self.rows.iter().find(|r| r.alt_bin == alt_bin)
    }

    pub fn p_usable(&self, key: CellKey) -> Option<f64> {
        if key.freq_bin < 0 {
            return None;
        }
        self.row(key.alt_bin)?.p_usable.get(key.freq_bin as usize).copied().flatten()
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && (0.0..1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::config(format!("epsilon must lie in [0, 1), got {epsilon}")))
    }
}

fn unsmoothed_row(
    alt_bin: i64,
    p_usable: Vec<Option<f64>>,
    supported_windows: Vec<usize>,
    epsilon: f64,
) -> ReliabilityRow {
    let usable_mask = p_usable
        .iter()
        .map(|p| p.is_some_and(|v| meets_reliability(v, epsilon)))
        .collect();
    ReliabilityRow {
        alt_bin,
        smoothed_p: p_usable.clone(),
        p_usable,
        supported_windows,
        usable_mask,
    }
}

/// Supported-window count and usable-window count for one cell.
fn cell_reliability(
    samples: &[TimedPower],
    threshold: &UsabilityThreshold,
    grid: &GridConfig,
    epsilon: f64,
) -> (usize, usize) {
    window_stats(samples, threshold, grid)
        .iter()
        .filter(|w| w.sample_count >= grid.min_samples_time)
        .fold((0, 0), |(k, u), w| (k + 1, u + usize::from(window_usable(w, epsilon))))
}

/// Unsmoothed reliability map over the core band.
///
/// A cell is present when it has at least `min_supported_windows` windows of
/// at least `min_samples_time` samples, and its altitude row has at least
/// `min_samples_freq` such cells.
pub fn p_usable_map(
    grid: &SampleGrid,
    threshold: &UsabilityThreshold,
    epsilon: f64,
) -> Result<ReliabilityMap> {
    check_epsilon(epsilon)?;
    let cfg = grid.config();
    let n_bins = grid.n_core_bins();

    let mut rows = Vec::new();
    for alt_bin in grid.core_altitude_bins() {
        let mut p_usable = vec![None; n_bins];
        let mut supported_windows = vec![0; n_bins];
        for f in 0..n_bins {
            let cell = grid.cell(CellKey::new(f as i64, alt_bin));
            let (k, usable) = cell_reliability(cell, threshold, cfg, epsilon);
            supported_windows[f] = k;
            if k >= cfg.min_supported_windows {
                p_usable[f] = Some(usable as f64 / k as f64);
            }
        }
        let time_supported = p_usable.iter().filter(|p| p.is_some()).count();
        if time_supported < cfg.min_samples_freq {
            p_usable.iter_mut().for_each(|p| *p = None);
        }
        rows.push(unsmoothed_row(alt_bin, p_usable, supported_windows, epsilon));
    }

    if rows.iter().all(|r| r.supported_bins() == 0) {
        return Err(Error::InsufficientSupport(format!(
            "band '{}': no cell meets the support minima",
            grid.band().label
        )));
    }
    Ok(ReliabilityMap {
        n_bins,
        epsilon,
        smoothing_width: 1,
        smoothing_rule: SmoothingRule::default(),
        rows,
    })
}

fn smooth_row(row: &ReliabilityRow, width: usize, rule: SmoothingRule, epsilon: f64) -> ReliabilityRow {
    let n = row.p_usable.len();
    let half = width / 2;
    let mut smoothed_p = vec![None; n];
    let mut usable_mask = vec![false; n];
    for i in 0..n {
        let Some(own) = row.p_usable[i] else { continue };
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let present = row.p_usable[lo..=hi].iter().flatten();
        match rule {
            SmoothingRule::FractionThreshold => {
                let (sum, count) = present.fold((0.0, 0usize), |(s, c), &p| (s + p, c + 1));
                let avg = sum / count as f64;
                smoothed_p[i] = Some(avg);
                usable_mask[i] = meets_reliability(avg, epsilon);
            }
            SmoothingRule::MajorityVote => {
                let (usable, count) = present.fold((0usize, 0usize), |(u, c), &p| {
                    (u + usize::from(meets_reliability(p, epsilon)), c + 1)
                });
                smoothed_p[i] = Some(usable as f64 / count as f64);
                usable_mask[i] = 2 * usable > count
                    || (2 * usable == count && meets_reliability(own, epsilon));
            }
        }
    }
    ReliabilityRow {
        alt_bin: row.alt_bin,
        p_usable: row.p_usable.clone(),
        supported_windows: row.supported_windows.clone(),
        smoothed_p,
        usable_mask,
    }
}

/// Centered moving average across frequency within each altitude row.
/// Absent cells are skipped and the average renormalised over present ones;
/// windows truncate at the band edges. Absent cells stay absent and unusable.
pub fn smooth_mask(map: &ReliabilityMap, width: usize, rule: SmoothingRule) -> Result<ReliabilityMap> {
    if width == 0 || width.is_multiple_of(2) {
        return Err(Error::config(format!("smoothing width must be odd and >= 1, got {width}")));
    }
    Ok(ReliabilityMap {
        n_bins: map.n_bins,
        epsilon: map.epsilon,
        smoothing_width: width,
        smoothing_rule: rule,
        rows: map
            .rows
            .iter()
            .map(|row| smooth_row(row, width, rule, map.epsilon))
            .collect(),
    })
}
