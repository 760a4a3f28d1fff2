//! Naive recomputation of every metric straight from raw samples.
//!
//! Shares no code with the pipeline modules: binning, quantiles, windowing,
//! smoothing and run detection are all re-derived here by direct formula
//! transcription, trading speed for obviousness. Intended for test-sized
//! inputs only.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::ingest::{BandConfig, CellKey, SweepSample};
use crate::pipeline::AnalysisConfig;
use crate::reliability::{SmoothingRule, FRACTION_TOL};
use crate::structure::Segment;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub alt_bin: i64,
    pub usar: f64,
    pub lccb_hz: f64,
    pub sfi: Option<f64>,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutput {
    pub n_band_dbm: f64,
    pub t6g_dbm: f64,
    /// Present cells only.
    pub p_usable: BTreeMap<CellKey, f64>,
    /// Cells reliably usable after smoothing.
    pub usable: BTreeSet<CellKey>,
    pub rows: Vec<OracleRow>,
    pub p_max: BTreeMap<CellKey, f64>,
}

fn nearest_rank(mut values: Vec<f64>, q: f64) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len() as f64;
    let mut rank = (q * n - 1e-9).ceil();
    if rank < 1.0 {
        rank = 1.0;
    }
    values[rank as usize - 1]
}

fn all_maximal_runs(mask: &[bool]) -> Vec<Segment> {
    let n = mask.len();
    let mut runs = Vec::new();
    for start in 0..n {
        for end in start..n {
            if !mask[start..=end].iter().all(|&u| u) {
                break;
            }
            let closed_left = start == 0 || !mask[start - 1];
            let closed_right = end == n - 1 || !mask[end + 1];
            if closed_left && closed_right {
                runs.push(Segment {
                    start_bin: start,
                    length_bins: end - start + 1,
                });
            }
        }
    }
    runs
}

pub fn oracle_metrics(samples: &[SweepSample], band: &BandConfig, cfg: &AnalysisConfig) -> Result<OracleOutput> {
    let g = &cfg.grid;
    let n_b = ((band.band_high_hz - band.band_low_hz) / g.freq_bin_hz - 1e-9).ceil() as i64;

    // core-band samples keyed by (frequency bin, altitude bin)
    let mut by_cell: HashMap<(i64, i64), Vec<&SweepSample>> = HashMap::new();
    for s in samples {
        if s.freq_hz < band.band_low_hz - band.margin_hz || s.freq_hz > band.band_high_hz + band.margin_hz {
            continue;
        }
        let f = ((s.freq_hz - band.band_low_hz) / g.freq_bin_hz).floor() as i64;
        if f < 0 || f >= n_b {
            continue;
        }
        let h = (s.alt_m / g.alt_bin_m).floor() as i64;
        by_cell.entry((f, h)).or_default().push(s);
    }
    if by_cell.is_empty() {
        return Err(Error::InsufficientSupport("oracle: no core-band samples".into()));
    }

    // N_band
    let mut floors = Vec::new();
    for f in 0..n_b {
        let powers: Vec<f64> = by_cell
            .iter()
            .filter(|((cf, _), _)| *cf == f)
            .flat_map(|(_, v)| v.iter().map(|s| s.power_dbm))
            .collect();
        if !powers.is_empty() {
            floors.push(nearest_rank(powers, cfg.noise.temporal_quantile));
        }
    }
    let n_band_dbm = nearest_rank(floors, cfg.noise.frequency_quantile);
    let t6g_dbm = n_band_dbm + cfg.delta_db;

    // p_usable
    let altitudes: BTreeSet<i64> = by_cell.keys().map(|&(_, h)| h).collect();
    let mut p_rows: BTreeMap<i64, Vec<Option<f64>>> = BTreeMap::new();
    for &h in &altitudes {
        let mut row = vec![None; n_b as usize];
        for f in 0..n_b {
            let Some(cell) = by_cell.get(&(f, h)) else { continue };
            let ks: BTreeSet<i64> = cell.iter().map(|s| (s.time_s / g.window_s).floor() as i64).collect();
            let mut supported = 0usize;
            let mut usable = 0usize;
            for k in ks {
                let w: Vec<&&SweepSample> = cell
                    .iter()
                    .filter(|s| (s.time_s / g.window_s).floor() as i64 == k)
                    .collect();
                if w.len() < g.min_samples_time {
                    continue;
                }
                supported += 1;
                let mut below = 0usize;
                for s in &w {
                    if s.power_dbm < t6g_dbm {
                        below += 1;
                    }
                }
                let eta = below as f64 / w.len() as f64;
                if eta >= 1.0 - cfg.epsilon - FRACTION_TOL {
                    usable += 1;
                }
            }
            if supported >= g.min_supported_windows {
                row[f as usize] = Some(usable as f64 / supported as f64);
            }
        }
        if row.iter().filter(|p| p.is_some()).count() < g.min_samples_freq {
            row = vec![None; n_b as usize];
        }
        p_rows.insert(h, row);
    }
    if p_rows.values().all(|r| r.iter().all(Option::is_none)) {
        return Err(Error::InsufficientSupport("oracle: no supported cells".into()));
    }

    // smoothing, USAR, LCCB, SFI
    let reliable = |p: f64| p >= 1.0 - cfg.epsilon - FRACTION_TOL;
    let half = (cfg.smoothing_width / 2) as i64;
    let mut p_usable = BTreeMap::new();
    let mut usable = BTreeSet::new();
    let mut rows = Vec::new();
    for (&h, row) in &p_rows {
        let mut mask = vec![false; n_b as usize];
        for f in 0..n_b {
            let Some(own) = row[f as usize] else { continue };
            p_usable.insert(CellKey::new(f, h), own);
            let mut present = Vec::new();
            for j in (f - half)..=(f + half) {
                if j >= 0 && j < n_b {
                    if let Some(p) = row[j as usize] {
                        present.push(p);
                    }
                }
            }
            let keep = match cfg.smoothing_rule {
                SmoothingRule::FractionThreshold => {
                    let mut sum = 0.0;
                    for p in &present {
                        sum += p;
                    }
                    reliable(sum / present.len() as f64)
                }
                SmoothingRule::MajorityVote => {
                    let yes = present.iter().filter(|&&p| reliable(p)).count();
                    let no = present.len() - yes;
                    yes > no || (yes == no && reliable(own))
                }
            };
            if keep {
                mask[f as usize] = true;
                usable.insert(CellKey::new(f, h));
            }
        }
        let supported = row.iter().filter(|p| p.is_some()).count();
        if (supported as f64) < cfg.min_row_support * n_b as f64 {
            continue;
        }
        let count = mask.iter().filter(|&&u| u).count();
        let runs = all_maximal_runs(&mask);
        let longest = runs.iter().map(|r| r.length_bins).max().unwrap_or(0);
        let total: usize = runs.iter().map(|r| r.length_bins).sum();
        rows.push(OracleRow {
            alt_bin: h,
            usar: count as f64 / n_b as f64,
            lccb_hz: longest as f64 * g.freq_bin_hz,
            sfi: if total == 0 { None } else { Some(1.0 - longest as f64 / total as f64) },
            segments: runs,
        });
    }

    let mut p_max = BTreeMap::new();
    for (&(f, h), cell) in &by_cell {
        let mut m = cell[0].power_dbm;
        for s in cell {
            if s.power_dbm > m {
                m = s.power_dbm;
            }
        }
        p_max.insert(CellKey::new(f, h), m);
    }

    Ok(OracleOutput {
        n_band_dbm,
        t6g_dbm,
        p_usable,
        usable,
        rows,
        p_max,
    })
}
