#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use specstruct::ingest::{BandConfig, CellKey, GridConfig};
use specstruct::pipeline::BandAnalysis;
use specstruct::synth::oracle::OracleOutput;
use specstruct::synth::EmitterSpec;

pub const LOW_HZ: f64 = 2.69e9;
pub const DF: f64 = 60e3;

/// A band of exactly `n_bins` core bins with `margin_bins` of margin per side.
pub fn band(label: &str, n_bins: usize, margin_bins: usize) -> BandConfig {
    BandConfig::new(label, LOW_HZ, LOW_HZ + n_bins as f64 * DF).with_margin(margin_bins as f64 * DF)
}

/// Emitter hitting exactly core bins `first .. first + count`.
pub fn emitter_on_bins(first: i64, count: i64, power_dbm: f64, duty_cycle: f64, period_s: f64) -> EmitterSpec {
    EmitterSpec {
        center_hz: LOW_HZ + (first as f64 + count as f64 / 2.0) * DF,
        width_hz: count as f64 * DF,
        power_dbm,
        duty_cycle,
        period_s,
        altitude_gain_db: vec![],
    }
}

pub fn grid() -> GridConfig {
    GridConfig::default()
}

/// Exact comparison of a pipeline run against the naive oracle.
pub fn diff_against_oracle(a: &BandAnalysis, o: &OracleOutput) -> Result<(), String> {
    if a.noise.n_band_dbm != o.n_band_dbm {
        return Err(format!("N_band {} vs oracle {}", a.noise.n_band_dbm, o.n_band_dbm));
    }
    if a.threshold.t6g_dbm != o.t6g_dbm {
        return Err(format!("T_6G {} vs oracle {}", a.threshold.t6g_dbm, o.t6g_dbm));
    }
    let mut p = BTreeMap::new();
    let mut usable = BTreeSet::new();
    for row in &a.reliability.rows {
        for (f, v) in row.p_usable.iter().enumerate() {
            let key = CellKey::new(f as i64, row.alt_bin);
            if let Some(v) = v {
                p.insert(key, *v);
            }
            if row.usable_mask[f] {
                usable.insert(key);
            }
        }
    }
    if p != o.p_usable {
        return Err(format!("p_usable differs: {} cells vs oracle {}", p.len(), o.p_usable.len()));
    }
    if usable != o.usable {
        return Err(format!("usable mask differs: {} vs oracle {}", usable.len(), o.usable.len()));
    }
    if a.profile.rows.len() != o.rows.len() {
        return Err(format!("{} rows vs oracle {}", a.profile.rows.len(), o.rows.len()));
    }
    for (r, q) in a.profile.rows.iter().zip(&o.rows) {
        if r.alt_bin != q.alt_bin || r.usar != q.usar || r.lccb_hz != q.lccb_hz || r.sfi != q.sfi || r.segments != q.segments {
            return Err(format!("altitude bin {} differs: {:?} vs oracle {:?}", r.alt_bin, r, q));
        }
    }
    let pmax: BTreeMap<CellKey, f64> = a.power.p_max.iter().map(|c| (c.key, c.value)).collect();
    if pmax != o.p_max {
        return Err("P_max differs".into());
    }
    Ok(())
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_specstruct")
}

/// Writes `run.json` into `dir` and returns its path.
pub fn write_run_config(dir: &Path, inputs: &[&str], bands: &[BandConfig], campaign: &str) -> PathBuf {
    let cfg = serde_json::json!({
        "inputs": inputs.iter().map(|p| serde_json::json!({"path": p})).collect::<Vec<_>>(),
        "bands": bands,
        "campaign": campaign,
    });
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

/// Every file under `root` as (relative path, contents), sorted.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
