//! Scenario configuration (TOML). Every key has a default, so an empty file
//! describes the reference scenario.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::geometry::GeometryConfig;
use crate::optimizer::DimensioningGrid;
use crate::queue::LoadProfile;
use crate::radio::{dbm_to_watt, BasebandCoeffs, GramCost, PaParams, RadioModel, RateParams};

use super::RunError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub bandwidth_hz: f64,
    pub coherence_symbols: f64,
    /// Total noise power over the band.
    pub noise_dbm: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        Self { bandwidth_hz: 20e6, coherence_symbols: 1800.0, noise_dbm: -96.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub pa_max_efficiency: f64,
    pub pa_max_output_w: f64,
    pub papr_backoff_db: f64,
    pub enforce_backoff: bool,
    pub p_syn_w: f64,
    pub p_bs_w: f64,
    pub p_oth_w: f64,
    /// W per Gbit/s
    pub p_cod_w_per_gbps: f64,
    pub p_dec_w_per_gbps: f64,
    /// Gflops/W
    pub l_bs_gflops_per_w: f64,
    pub gram_cost: GramCost,
}

impl Default for PowerSection {
    fn default() -> Self {
        let pa = PaParams::default();
        Self {
            pa_max_efficiency: pa.max_efficiency,
            pa_max_output_w: pa.max_output_power_w,
            papr_backoff_db: pa.papr_backoff_db,
            enforce_backoff: pa.enforce_backoff,
            p_syn_w: 2.0,
            p_bs_w: 1.0,
            p_oth_w: 18.0,
            p_cod_w_per_gbps: 0.1,
            p_dec_w_per_gbps: 0.8,
            l_bs_gflops_per_w: 12.8,
            gram_cost: GramCost::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueueSection {
    pub blocking_target: f64,
    /// Bits per session; only documents the offered-load scale.
    pub traffic_per_user_bits: f64,
    /// `hour,fraction` CSV; the built-in approximate European profile when unset.
    pub dlp_path: Option<PathBuf>,
    pub hours: usize,
    /// Iterate calibration and peak equilibrium to a fixed point instead of a
    /// single refinement pass.
    pub fixed_point_calibration: bool,
    pub max_calibration_rounds: usize,
}

impl Default for QueueSection {
    fn default() -> Self {
        Self {
            blocking_target: 0.02,
            traffic_per_user_bits: 1e8,
            dlp_path: None,
            hours: 24,
            fixed_point_calibration: false,
            max_calibration_rounds: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensioningSection {
    /// Candidate values of the maximum user count.
    pub k_values: Vec<usize>,
    pub m_upper: usize,
    pub p_min_w: f64,
    /// Upper end of the power grid; the PA backoff limit when unset.
    pub p_max_w: Option<f64>,
    pub p_step_w: f64,
}

impl Default for DimensioningSection {
    fn default() -> Self {
        Self { k_values: vec![93], m_upper: 1000, p_min_w: 0.001, p_max_w: None, p_step_w: 0.001 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameSection {
    pub max_sweeps: usize,
}

impl Default for GameSection {
    fn default() -> Self {
        Self { max_sweeps: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub radio: RadioSection,
    pub power: PowerSection,
    pub queue: QueueSection,
    pub dimensioning: DimensioningSection,
    pub game: GameSection,
    pub output: OutputSection,
}

impl ScenarioConfig {
    /// Parses TOML; relative `dlp_path` values resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self, RunError> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        if let (Some(base), Some(dlp)) = (base_dir, cfg.queue.dlp_path.as_mut()) {
            if dlp.is_relative() {
                *dlp = base.join(&*dlp);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, path.parent())
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.geometry.validate().map_err(|e| RunError::Config(e.to_string()))?;
        let q = &self.queue;
        if !(q.blocking_target > 0.0 && q.blocking_target < 1.0) {
            return Err(RunError::Config(format!(
                "queue.blocking_target must be in (0, 1), got {}",
                q.blocking_target
            )));
        }
        if q.hours == 0 {
            return Err(RunError::Config("queue.hours must be at least 1".into()));
        }
        if let Some(path) = &q.dlp_path {
            if !path.exists() {
                return Err(RunError::Config(format!("queue.dlp_path {} does not exist", path.display())));
            }
        }
        let d = &self.dimensioning;
        if d.k_values.is_empty() || d.k_values.contains(&0) {
            return Err(RunError::Config("dimensioning.k_values must be non-empty and positive".into()));
        }
        if d.k_values.iter().any(|&k| k + 1 > d.m_upper) {
            return Err(RunError::Config("dimensioning.m_upper must exceed every k value".into()));
        }
        if !(d.p_step_w > 0.0 && d.p_min_w > 0.0) {
            return Err(RunError::Config("dimensioning power grid must be positive".into()));
        }
        if self.game.max_sweeps == 0 {
            return Err(RunError::Config("game.max_sweeps must be at least 1".into()));
        }
        self.base_radio(d.k_values[0], d.p_min_w)?;
        Ok(())
    }

    pub fn load_profile(&self) -> Result<LoadProfile, RunError> {
        let dlp = match &self.queue.dlp_path {
            Some(path) => {
                LoadProfile::read_csv(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?
            }
            None => LoadProfile::earth_approx(),
        };
        if dlp.hours() < self.queue.hours {
            return Err(RunError::Config(format!(
                "load profile has {} hours, {} requested",
                dlp.hours(),
                self.queue.hours
            )));
        }
        Ok(dlp)
    }

    pub fn pa_params(&self) -> PaParams {
        let p = &self.power;
        PaParams {
            max_efficiency: p.pa_max_efficiency,
            max_output_power_w: p.pa_max_output_w,
            papr_backoff_db: p.papr_backoff_db,
            enforce_backoff: p.enforce_backoff,
        }
    }

    pub fn baseband(&self) -> BasebandCoeffs {
        let p = &self.power;
        BasebandCoeffs {
            p_syn_w: p.p_syn_w,
            p_bs_w: p.p_bs_w,
            p_oth_w: p.p_oth_w,
            p_cod_w_per_bps: p.p_cod_w_per_gbps * 1e-9,
            p_dec_w_per_bps: p.p_dec_w_per_gbps * 1e-9,
            l_bs_flops_per_w: p.l_bs_gflops_per_w * 1e9,
            gram_cost: p.gram_cost,
        }
    }

    /// Radio model with the given pilot overhead and transmit power.
    pub fn base_radio(&self, k_max: usize, tx_power_w: f64) -> Result<RadioModel, RunError> {
        let rate = RateParams {
            bandwidth_hz: self.radio.bandwidth_hz,
            coherence_symbols: self.radio.coherence_symbols,
            k_max,
            noise_power_w: dbm_to_watt(self.radio.noise_dbm),
            tx_power_per_antenna_w: tx_power_w,
        };
        RadioModel::new(rate, self.pa_params(), self.baseband()).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn dimensioning_grid(&self) -> DimensioningGrid {
        let d = &self.dimensioning;
        let p_max = d.p_max_w.unwrap_or_else(|| self.pa_params().backoff_limit_w());
        DimensioningGrid {
            k_values: d.k_values.clone(),
            m_upper: d.m_upper,
            p_values: DimensioningGrid::power_steps(d.p_min_w, p_max, d.p_step_w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference() {
        let cfg = ScenarioConfig::from_toml("", None).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.geometry.num_cells, 19);
        assert_eq!(cfg.queue.hours, 24);
        let grid = cfg.dimensioning_grid();
        assert_eq!(grid.p_values.len(), 98);
        assert!((grid.p_values.last().unwrap() - 0.098).abs() < 1e-9);
        let bb = cfg.baseband();
        assert!((bb.coding_coeff() - 0.9e-9).abs() < 1e-22);
    }

    #[test]
    fn shipped_reference_matches_defaults() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.toml");
        let cfg = ScenarioConfig::load(&path).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.load_profile().unwrap(), LoadProfile::earth_approx());
        let defaults = ScenarioConfig::default();
        assert_eq!(cfg.geometry, defaults.geometry);
        assert_eq!(cfg.radio, defaults.radio);
        assert_eq!(cfg.power, defaults.power);
        assert_eq!(cfg.dimensioning, defaults.dimensioning);
        assert_eq!(cfg.game, defaults.game);
        assert_eq!(cfg.queue.blocking_target, defaults.queue.blocking_target);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let cfg = ScenarioConfig::from_toml(
            "[geometry]\ngrid_points_per_cell = 600\n[power]\ngram_cost = \"per_symbol\"\n",
            None,
        )
        .unwrap();
        assert_eq!(cfg.geometry.grid_points_per_cell, 600);
        assert_eq!(cfg.power.gram_cost, GramCost::PerSymbol);
        assert!(matches!(ScenarioConfig::from_toml("[geometry]\nbogus = 1\n", None), Err(RunError::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = [
            "[queue]\nblocking_target = 1.5\n",
            "[geometry]\nmin_distance_m = 600.0\n",
            "[dimensioning]\nk_values = []\n",
            "[queue]\ndlp_path = \"/nonexistent/dlp.csv\"\n",
            "[radio]\ncoherence_symbols = 50.0\n",
        ];
        for text in bad {
            let cfg = ScenarioConfig::from_toml(text, None).unwrap();
            assert!(matches!(cfg.validate(), Err(RunError::Config(_))), "{text}");
        }
    }
}
