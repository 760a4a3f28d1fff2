//! End-to-end analysis of one band: grid → N_band → T_6G → reliability →
//! smoothing → structural profile and power summaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{build_grid, BandConfig, GridConfig, SampleGrid, SweepSample};
use crate::noisefloor::{estimate_noise_reference, threshold, NoiseConfig, NoiseReference, UsabilityThreshold};
use crate::reliability::{p_usable_map, smooth_mask, ReliabilityMap, SmoothingRule};
use crate::structure::{check_levels, power_summary, structural_profile, PowerSummary, StructuralProfile, DEFAULT_CDF_LEVELS};

fn default_delta_db() -> f64 {
    10.0
}
fn default_epsilon() -> f64 {
    0.05
}
fn default_smoothing_width() -> usize {
    5
}
fn default_min_row_support() -> f64 {
    0.5
}
fn default_cdf_levels() -> Vec<f64> {
    DEFAULT_CDF_LEVELS.to_vec()
}

/// Every analysis parameter except the band itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default = "default_delta_db")]
    pub delta_db: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_smoothing_width")]
    pub smoothing_width: usize,
    #[serde(default)]
    pub smoothing_rule: SmoothingRule,
    #[serde(default = "default_min_row_support")]
    pub min_row_support: f64,
    #[serde(default = "default_cdf_levels")]
    pub cdf_levels: Vec<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            noise: NoiseConfig::default(),
            delta_db: default_delta_db(),
            epsilon: default_epsilon(),
            smoothing_width: default_smoothing_width(),
            smoothing_rule: SmoothingRule::default(),
            min_row_support: default_min_row_support(),
            cdf_levels: default_cdf_levels(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.noise.validate()?;
        check_levels(&self.cdf_levels)?;
        let fail = |msg: String| Err(Error::config(msg));
        if !self.delta_db.is_finite() || self.delta_db < 0.0 {
            return fail(format!("delta_db must be >= 0, got {}", self.delta_db));
        }
        if !(self.epsilon.is_finite() && (0.0..1.0).contains(&self.epsilon)) {
            return fail(format!("epsilon must lie in [0, 1), got {}", self.epsilon));
        }
        if self.smoothing_width.is_multiple_of(2) {
            return fail(format!("smoothing_width must be odd, got {}", self.smoothing_width));
        }
        if !(0.0..=1.0).contains(&self.min_row_support) {
            return fail(format!("min_row_support must lie in [0, 1], got {}", self.min_row_support));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandAnalysis {
    pub grid: SampleGrid,
    pub noise: NoiseReference,
    pub threshold: UsabilityThreshold,
    /// Smoothed map; `p_usable` holds the unsmoothed values.
    pub reliability: ReliabilityMap,
    pub profile: StructuralProfile,
    pub power: PowerSummary,
}

pub fn analyze_grid(grid: SampleGrid, cfg: &AnalysisConfig) -> Result<BandAnalysis> {
    cfg.validate()?;
    let noise = estimate_noise_reference(&grid, &cfg.noise)?;
    let threshold = threshold(&noise, cfg.delta_db)?;
    let raw = p_usable_map(&grid, &threshold, cfg.epsilon)?;
    let reliability = smooth_mask(&raw, cfg.smoothing_width, cfg.smoothing_rule)?;
    let profile = structural_profile(&reliability, &grid, cfg.min_row_support)?;
    let power = power_summary(&grid, &cfg.cdf_levels)?;
    log::info!(
        "band '{}': N_band {:.2} dBm, T_6G {:.2} dBm, {} altitude rows emitted",
        grid.band().label,
        noise.n_band_dbm,
        threshold.t6g_dbm,
        profile.rows.len()
    );
    Ok(BandAnalysis {
        grid,
        noise,
        threshold,
        reliability,
        profile,
        power,
    })
}

pub fn analyze_samples(samples: &[SweepSample], band: &BandConfig, cfg: &AnalysisConfig) -> Result<BandAnalysis> {
    let grid = build_grid(samples, band, &cfg.grid)?;
    analyze_grid(grid, cfg)
}
