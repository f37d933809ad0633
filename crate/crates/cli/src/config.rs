//! Experiment configuration, read from TOML.
//!
//! Relative paths resolve against the directory holding the config file.
//! `seed` has no default on purpose.

use std::path::{Path, PathBuf};

use prosynth::clustering::{VarianceMode, DEFAULT_NEW_CLUSTER_VARIANCE};
use prosynth::data_model::{Calendar, CsvSchema, DayType, DEFAULT_N_MAX};
use prosynth::demand_chain::{
    Concentration, Parametrization, PersonalizationConfig, DEFAULT_BANDWIDTH, DEFAULT_REINFORCEMENT,
};
use prosynth::solar_gen::{clear_sky_profile, InitialCi, SolarConfig, DEFAULT_CI_BANDWIDTH, SOLAR_CONSTANT};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub schema: CsvSchema,
    #[serde(default)]
    pub calendar: Calendar,
    #[serde(default)]
    pub demand: DemandParams,
    #[serde(default)]
    pub clustering: ClusteringParams,
    #[serde(default)]
    pub assignment: AssignmentParams,
    #[serde(default)]
    pub solar: SolarParams,
    #[serde(default)]
    pub synthesis: SynthesisParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Meter CSV read by `ingest`.
    pub input: PathBuf,
    /// Directory every stage reads from and writes to.
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandParams {
    pub n_max: u32,
    pub bandwidth: f64,
    pub day_type: DayType,
    pub reinforcement: f64,
    pub concentration: Concentration,
    pub parametrization: Parametrization,
}

impl Default for DemandParams {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            bandwidth: DEFAULT_BANDWIDTH,
            day_type: DayType::Weekday,
            reinforcement: DEFAULT_REINFORCEMENT,
            concentration: Concentration::RowTotal,
            parametrization: Parametrization::Smoothed,
        }
    }
}

impl DemandParams {
    pub fn personalization(&self) -> PersonalizationConfig {
        PersonalizationConfig { concentration: self.concentration, parametrization: self.parametrization }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMethod {
    MapDp,
    Kmeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringParams {
    pub method: ClusterMethod,
    /// k-means cluster count.
    pub k: usize,
    /// k-means starting means; evenly spaced quantiles when absent.
    pub init_means: Option<Vec<f64>>,
    pub alpha: f64,
    /// MAP-DP prior on cluster locations; the sample mean and variance of the
    /// points when absent.
    pub prior_mean: Option<f64>,
    pub prior_variance: Option<f64>,
    pub new_cluster_variance: f64,
    pub variance_mode: VarianceMode,
    pub max_iter: usize,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            method: ClusterMethod::MapDp,
            k: 4,
            init_means: None,
            alpha: 9.0,
            prior_mean: None,
            prior_variance: None,
            new_cluster_variance: DEFAULT_NEW_CLUSTER_VARIANCE,
            variance_mode: VarianceMode::Floored,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignmentParams {
    /// Size of the synthetic population.
    pub prosumers: usize,
    /// Label columns (from `schema.features`) to carry over as categorical
    /// features besides the capacity class.
    pub features: Vec<String>,
}

impl Default for AssignmentParams {
    fn default() -> Self {
        Self { prosumers: 1000, features: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolarParams {
    pub latitude: f64,
    pub panel_tilt: f64,
    pub panel_azimuth: f64,
    pub efficiency: f64,
    pub g: f64,
    /// Day of year of the first synthetic day.
    pub day_of_year: u32,
    /// CI kernel bandwidth.
    pub bandwidth: f64,
    /// One CI trajectory per day for the whole synthetic population.
    pub shared_weather: bool,
    pub initial: InitialCi,
    /// Slots with a lower TIF are ignored when sizing observed systems.
    pub min_tif: f64,
}

impl Default for SolarParams {
    fn default() -> Self {
        Self {
            latitude: -33.87,
            panel_tilt: 30.0,
            panel_azimuth: 0.0,
            efficiency: 0.18,
            g: SOLAR_CONSTANT,
            day_of_year: 70,
            bandwidth: DEFAULT_CI_BANDWIDTH,
            shared_weather: true,
            initial: InitialCi::Uniform,
            min_tif: 0.2,
        }
    }
}

impl SolarParams {
    /// Panel geometry with a unit area, for `day_of_year`.
    pub fn base(&self, day_of_year: u32) -> SolarConfig {
        SolarConfig {
            latitude: self.latitude,
            panel_tilt: self.panel_tilt,
            panel_azimuth: self.panel_azimuth,
            efficiency: self.efficiency,
            area: 1.0,
            g: self.g,
            day_of_year,
        }
    }

    /// A system whose clear-sky peak reading on `day_of_year` is `peak_kwh`.
    pub fn sized(&self, day_of_year: u32, peak_kwh: f64) -> SolarConfig {
        let unit = self.base(day_of_year);
        let unit_peak = clear_sky_profile(&unit).into_iter().fold(0.0, f64::max);
        SolarConfig { area: if unit_peak > 0.0 { peak_kwh / unit_peak } else { 0.0 }, ..unit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisParams {
    /// Consecutive days per synthetic prosumer.
    pub days: usize,
    pub penetration: Vec<f64>,
    /// Autocorrelation lags reported by `validate`.
    pub lags: Vec<usize>,
    /// 1-based slot whose transition counts `validate` exports as a heatmap.
    pub heatmap_slot: usize,
    pub heatmap_max_state: u32,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self { days: 1, penetration: vec![0.0, 0.271, 0.8, 1.0], lags: vec![1, 48], heatmap_slot: 37, heatmap_max_state: 150 }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub day_type: Option<DayType>,
    pub penetration: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.to_path_buf(), message: format!("cannot read config: {e}") })?;
        let mut config: Self =
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.paths.input = base.join(&config.paths.input);
        config.paths.output = base.join(&config.paths.output);
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.paths.output = out.clone();
        }
        if let Some(d) = o.day_type {
            self.demand.day_type = d;
        }
        if let Some(p) = &o.penetration {
            self.synthesis.penetration = p.clone();
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::config(msg));
        let d = &self.demand;
        if d.n_max == 0 || !(d.bandwidth > 0.0) || !(d.reinforcement >= 0.0) {
            return bad(format!("demand: need n_max ≥ 1, bandwidth > 0, reinforcement ≥ 0, got {d:?}"));
        }
        if let Concentration::Scale(c) = d.concentration {
            if !(c > 0.0) {
                return bad(format!("demand: concentration scale must be positive, got {c}"));
            }
        }
        let c = &self.clustering;
        if !(c.alpha > 0.0) || !c.alpha.is_finite() {
            return bad(format!("clustering: alpha must be positive, got {}", c.alpha));
        }
        if c.k == 0 || !(c.new_cluster_variance > 0.0) || c.max_iter == 0 {
            return bad("clustering: need k ≥ 1, new_cluster_variance > 0, max_iter ≥ 1".into());
        }
        if c.prior_variance.is_some_and(|v| !(v > 0.0)) {
            return bad("clustering: prior_variance must be positive".into());
        }
        if c.init_means.as_ref().is_some_and(|m| m.len() != c.k) {
            return bad(format!("clustering: init_means needs {} values", c.k));
        }
        if self.assignment.prosumers == 0 {
            return bad("assignment: prosumers must be at least 1".into());
        }
        if let Some(f) = self.assignment.features.iter().find(|f| !self.schema.features.contains(f)) {
            return bad(format!("assignment: feature {f} is not a schema feature column"));
        }
        let s = &self.solar;
        self.solar.base(s.day_of_year).validate().map_err(|e| CliError::config(format!("solar: {e}")))?;
        if !(s.bandwidth > 0.0) || !(0.0..1.0).contains(&s.min_tif) {
            return bad("solar: need bandwidth > 0 and 0 ≤ min_tif < 1".into());
        }
        let y = &self.synthesis;
        if y.days == 0 {
            return bad("synthesis: days must be at least 1".into());
        }
        if let Some(p) = y.penetration.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("synthesis: penetration {p} outside [0, 1]"));
        }
        if !(1..=48).contains(&y.heatmap_slot) {
            return bad("synthesis: heatmap_slot must be in 1..=48".into());
        }
        Ok(())
    }
}

/// Parses `0,0.271,0.8` into fractions.
pub fn parse_penetration_list(raw: &str) -> Result<Vec<f64>, String> {
    raw.split(',')
        .map(|p| {
            let v: f64 = p.trim().parse().map_err(|_| format!("not a number: {p:?}"))?;
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(format!("penetration {v} outside [0, 1]"))
            }
        })
        .collect()
}
