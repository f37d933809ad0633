//! Pipeline stages. Each reads its inputs from and writes its outputs to the
//! configured output directory, so any stage can be rerun on its own.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{Datelike, NaiveDate};
use prosynth::clustering::{
    cluster_counts, kmeans, map_dp, ClusterFit, ClusterModelFile, FitMethod, MapDpPrior,
};
use prosynth::data_model::{parse_meter_csv, split_days, DailyProfile, DayType};
use prosynth::demand_chain::{build_tensor, personalize, sample_multiday, DemandModel};
use prosynth::feature_assignment::{
    alpha_from_labels, read_assignments_csv, sample_population, write_assignments_csv, DirichletFeatureModel,
};
use prosynth::io::{
    load_clearness, load_tensor, read_profiles_csv, save_clearness, save_tensor, write_diagnostics_csv, write_json,
    write_profiles_csv, ProfileRecord,
};
use prosynth::rng::substream;
use prosynth::solar_gen::{build_ci_matrix, extract_ci_series, fit_area, penetration_sweep, sample_cohort, trough, SolarConfig};
use prosynth::validation::{log_heatmap, write_heatmap_csv, ValidationReport};
use prosynth::SLOTS_PER_DAY;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{ClusterMethod, ExperimentConfig};
use crate::error::{CliError, CliResult};

/// Feature id of the PV capacity class, whose categories are the clusters.
pub const CAPACITY_FEATURE: &str = "capacity";

pub const PROFILES: &str = "profiles.csv";
pub const GENERATION: &str = "generation.csv";
pub const CUSTOMERS: &str = "customers.json";
pub const REJECTED: &str = "rejected_rows.csv";
pub const INGEST: &str = "ingest.json";
pub const CLUSTERS: &str = "clusters.json";
pub const FEATURES: &str = "features.json";
pub const ASSIGNMENTS: &str = "assignments.csv";
pub const ASSIGN: &str = "assign.json";
pub const CLEARNESS: &str = "clearness.csv";
pub const SOLAR: &str = "solar.json";
pub const SYNTHETIC_DEMAND: &str = "synthetic_demand.csv";
pub const SYNTHETIC_GENERATION: &str = "synthetic_generation.csv";
pub const NET_AGGREGATES: &str = "net_aggregates.csv";
pub const SYNTH: &str = "synth.json";
pub const VALIDATION: &str = "validation.json";
pub const REPORT: &str = "report.json";

pub fn tensor_file(day_type: DayType) -> String {
    format!("tensor_{day_type}.csv")
}

pub fn heatmap_file(slot: usize) -> String {
    format!("heatmap_slot{slot}.csv")
}

/// Midday window, 1-based slots (10:00 to 16:00), used for net-demand troughs.
pub const MIDDAY: (usize, usize) = (21, 32);

fn out(config: &ExperimentConfig, name: &str) -> PathBuf {
    config.paths.output.join(name)
}

/// Opens an artifact produced by `stage`.
fn input(path: &Path, stage: &'static str) -> CliResult<BufReader<File>> {
    if !path.exists() {
        return Err(CliError::MissingArtifact { path: path.to_path_buf(), stage });
    }
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn write_with<F>(path: &Path, body: F) -> CliResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> prosynth::Result<()>,
{
    let io = |e: std::io::Error| CliError::Io { path: path.to_path_buf(), message: e.to_string() };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    body(&mut w).map_err(|e| CliError::at(path, e))?;
    w.flush().map_err(io)
}

fn save<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_with(path, |w| write_json(value, w))
}

fn load<T: DeserializeOwned>(path: &Path, stage: &'static str) -> CliResult<T> {
    serde_json::from_reader(input(path, stage)?)
        .map_err(|e| CliError::Io { path: path.to_path_buf(), message: format!("invalid JSON: {e}") })
}

fn load_profiles(path: &Path, stage: &'static str) -> CliResult<Vec<ProfileRecord>> {
    read_profiles_csv(input(path, stage)?).map_err(|e| CliError::at(path, e))
}

fn record_date(path: &Path, r: &ProfileRecord) -> CliResult<NaiveDate> {
    r.day.parse().map_err(|_| CliError::Io {
        path: path.to_path_buf(),
        message: format!("profile {} has unparseable date {:?}", r.prosumer_id, r.day),
    })
}

/// Day profiles of the configured day type from the ingested store.
fn observed_profiles(config: &ExperimentConfig) -> CliResult<Vec<DailyProfile>> {
    let path = out(config, PROFILES);
    let mut profiles = Vec::new();
    for r in load_profiles(&path, "ingest")? {
        let date = record_date(&path, &r)?;
        let day_type = config.calendar.day_type(date);
        if day_type == config.demand.day_type {
            profiles.push(DailyProfile::new(r.prosumer_id, date, day_type, r.kwh)?);
        }
    }
    Ok(profiles)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerSummary {
    pub customer_id: String,
    pub days: usize,
    /// Largest half-hour generation reading, if the customer reports any.
    pub peak_generation_kwh: Option<f64>,
    pub labels: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub customers: usize,
    pub profiles: usize,
    pub weekday_profiles: usize,
    pub weekend_profiles: usize,
    pub generation_profiles: usize,
    pub rejected_rows: usize,
    pub dropped_days: usize,
    pub dropped_slots: usize,
}

pub fn ingest(config: &ExperimentConfig) -> CliResult<IngestSummary> {
    let src = &config.paths.input;
    let file = File::open(src)
        .map_err(|e| CliError::Io { path: src.clone(), message: format!("cannot open meter data: {e}") })?;
    let parsed = parse_meter_csv(BufReader::new(file), &config.schema).map_err(|e| CliError::at(src, e))?;
    let mut profiles = Vec::new();
    let mut generation = Vec::new();
    let mut customers = Vec::new();
    let mut summary = IngestSummary {
        customers: parsed.traces.len(),
        profiles: 0,
        weekday_profiles: 0,
        weekend_profiles: 0,
        generation_profiles: 0,
        rejected_rows: parsed.rejected.len(),
        dropped_days: 0,
        dropped_slots: 0,
    };
    for trace in &parsed.traces {
        let split = split_days(trace, &config.calendar);
        summary.dropped_days += split.dropped_days;
        summary.dropped_slots += split.dropped_slots;
        let peak = trace.readings.iter().filter_map(|r| r.generation_kwh).reduce(f64::max);
        customers.push(CustomerSummary {
            customer_id: trace.customer_id.clone(),
            days: split.profiles.len(),
            peak_generation_kwh: peak,
            labels: trace.features.clone(),
        });
        for p in split.profiles {
            match p.day_type {
                DayType::Weekday => summary.weekday_profiles += 1,
                DayType::Weekend => summary.weekend_profiles += 1,
            }
            let day = p.date.to_string();
            if let Some(g) = p.generation_kwh {
                generation.push(ProfileRecord { prosumer_id: p.customer_id.clone(), day: day.clone(), kwh: g });
            }
            profiles.push(ProfileRecord { prosumer_id: p.customer_id, day, kwh: p.kwh });
        }
    }
    summary.profiles = profiles.len();
    summary.generation_profiles = generation.len();
    write_with(&out(config, PROFILES), |w| write_profiles_csv(&profiles, w))?;
    write_with(&out(config, GENERATION), |w| write_profiles_csv(&generation, w))?;
    write_with(&out(config, REJECTED), |w| write_diagnostics_csv(&parsed.rejected, w))?;
    save(&out(config, CUSTOMERS), &customers)?;
    save(&out(config, INGEST), &summary)?;
    Ok(summary)
}

/// A categorical feature with named categories and its Dirichlet parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub feature_id: String,
    pub categories: Vec<String>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub points: usize,
    pub k: usize,
    pub means: Vec<f64>,
    pub populations: Vec<usize>,
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

pub fn cluster(config: &ExperimentConfig) -> CliResult<ClusterSummary> {
    let customers: Vec<CustomerSummary> = load(&out(config, CUSTOMERS), "ingest")?;
    let points: Vec<f64> = customers.iter().filter_map(|c| c.peak_generation_kwh).filter(|p| *p > 0.0).collect();
    if points.is_empty() {
        return Err(CliError::Model("no customer reports generation, nothing to cluster".into()));
    }
    let p = &config.clustering;
    let (fit, method): (ClusterFit, FitMethod) = match p.method {
        ClusterMethod::Kmeans => {
            if p.k > points.len() {
                return Err(CliError::config(format!(
                    "clustering: k = {} exceeds the {} points available",
                    p.k,
                    points.len()
                )));
            }
            let init = match &p.init_means {
                Some(m) => m.clone(),
                None => {
                    let sorted = sorted(&points);
                    (0..p.k).map(|i| sorted[((2 * i + 1) * sorted.len()) / (2 * p.k)]).collect()
                }
            };
            (kmeans(&points, p.k, &init, p.max_iter)?, FitMethod::Kmeans { k: p.k })
        }
        ClusterMethod::MapDp => {
            let (mean, variance) = mean_and_variance(&points);
            let prior = MapDpPrior {
                prior_mean: p.prior_mean.unwrap_or(mean),
                prior_variance: p.prior_variance.unwrap_or(variance),
                new_cluster_variance: p.new_cluster_variance,
                alpha: p.alpha,
                variance_mode: p.variance_mode,
            };
            if !(prior.prior_variance > 0.0) {
                return Err(CliError::config("clustering: points have zero variance, set prior_variance"));
            }
            (map_dp(&points, &prior, p.max_iter)?, FitMethod::MapDp(prior))
        }
    };
    let file = ClusterModelFile::new(&fit, method);
    let mut features = vec![FeatureFile {
        feature_id: CAPACITY_FEATURE.into(),
        categories: fit.model.clusters.iter().map(|c| format!("{:.4}", c.mean)).collect(),
        alpha: cluster_counts(&fit.model),
    }];
    for feature in &config.assignment.features {
        let values: Vec<&str> = customers.iter().filter_map(|c| c.labels.get(feature)).map(String::as_str).collect();
        let mut categories: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        categories.sort();
        categories.dedup();
        let labels: Vec<usize> =
            values.iter().map(|v| categories.iter().position(|c| c == v).expect("category listed")).collect();
        let model = alpha_from_labels(feature.as_str(), &labels, categories.len())?;
        features.push(FeatureFile { feature_id: model.feature_id, categories, alpha: model.alpha });
    }
    save(&out(config, CLUSTERS), &file)?;
    save(&out(config, FEATURES), &features)?;
    Ok(ClusterSummary {
        points: points.len(),
        k: fit.model.k(),
        means: fit.model.clusters.iter().map(|c| c.mean).collect(),
        populations: fit.model.clusters.iter().map(|c| c.population).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignSummary {
    pub prosumers: usize,
    pub counts: BTreeMap<String, Vec<u64>>,
}

pub fn prosumer_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i:05}")).collect()
}

pub fn assign(config: &ExperimentConfig) -> CliResult<AssignSummary> {
    let features: Vec<FeatureFile> = load(&out(config, FEATURES), "cluster")?;
    let models = features
        .iter()
        .map(|f| DirichletFeatureModel::new(f.feature_id.as_str(), f.alpha.clone()))
        .collect::<prosynth::Result<Vec<_>>>()?;
    let ids = prosumer_ids(config.assignment.prosumers);
    let (counts, assignments) = sample_population(&models, &ids, config.seed)?;
    write_with(&out(config, ASSIGNMENTS), |w| write_assignments_csv(&assignments, w))?;
    let summary = AssignSummary { prosumers: ids.len(), counts };
    save(&out(config, ASSIGN), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSummary {
    pub day_type: DayType,
    pub profiles: usize,
    pub customers: usize,
    pub transitions: u64,
    pub cells: usize,
}

pub fn build_demand(config: &ExperimentConfig) -> CliResult<DemandSummary> {
    let day_type = config.demand.day_type;
    let profiles = observed_profiles(config)?;
    if profiles.is_empty() {
        return Err(CliError::Model(format!("no complete {day_type} profiles to build a tensor from")));
    }
    let tensor = build_tensor(&profiles, day_type, config.demand.n_max)?;
    let path = out(config, &tensor_file(day_type));
    save_tensor(&tensor, &path).map_err(|e| CliError::at(&path, e))?;
    Ok(DemandSummary {
        day_type,
        profiles: profiles.len(),
        customers: tensor.source_population(),
        transitions: (0..SLOTS_PER_DAY).map(|s| tensor.slot_total(s)).sum(),
        cells: tensor.triplets().count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSystem {
    pub customer_id: String,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolarSummary {
    pub systems: Vec<FittedSystem>,
    /// Customers whose generation never reached a usable daylight slot.
    pub unfitted: Vec<String>,
    pub sequences: usize,
    pub transitions: u64,
}

pub fn build_solar(config: &ExperimentConfig) -> CliResult<SolarSummary> {
    let path = out(config, GENERATION);
    let mut by_customer: BTreeMap<String, Vec<(u32, Vec<f64>)>> = BTreeMap::new();
    for r in load_profiles(&path, "ingest")? {
        let date = record_date(&path, &r)?;
        by_customer.entry(r.prosumer_id).or_default().push((date.ordinal(), r.kwh));
    }
    let solar = &config.solar;
    let mut summary = SolarSummary { systems: Vec::new(), unfitted: Vec::new(), sequences: 0, transitions: 0 };
    let mut sequences = Vec::new();
    for (id, days) in by_customer {
        // a day with no usable daylight reading cannot size the system
        let area = days
            .iter()
            .filter_map(|(doy, kwh)| fit_area(&solar.base(*doy), std::slice::from_ref(kwh), solar.min_tif).ok())
            .reduce(f64::max);
        let Some(area) = area else {
            summary.unfitted.push(id);
            continue;
        };
        for (doy, kwh) in &days {
            let system = SolarConfig { area, ..solar.base(*doy) };
            sequences.push(extract_ci_series(kwh, &system)?);
        }
        summary.systems.push(FittedSystem { customer_id: id, area });
    }
    if sequences.is_empty() {
        return Err(CliError::Model("no generation profiles to learn weather from".into()));
    }
    let matrix = build_ci_matrix(&sequences, solar.bandwidth)?;
    let clearness = out(config, CLEARNESS);
    save_clearness(&matrix, &clearness).map_err(|e| CliError::at(&clearness, e))?;
    summary.sequences = sequences.len();
    summary.transitions = matrix.total_transitions();
    save(&out(config, SOLAR), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenetrationLevel {
    pub penetration: f64,
    pub holders: usize,
    /// Lowest aggregate net demand in the midday window of any day.
    pub midday_trough: f64,
    pub peak_net: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub prosumers: usize,
    pub days: usize,
    pub day_type: DayType,
    pub levels: Vec<PenetrationLevel>,
}

fn day_of_year(first: u32, offset: usize) -> u32 {
    ((first as usize - 1 + offset) % 365) as u32 + 1
}

fn split_records<'a>(id: &str, series: &'a [f64]) -> impl Iterator<Item = ProfileRecord> + 'a {
    let id = id.to_string();
    series
        .chunks(SLOTS_PER_DAY)
        .enumerate()
        .map(move |(d, kwh)| ProfileRecord { prosumer_id: id.clone(), day: (d + 1).to_string(), kwh: kwh.to_vec() })
}

pub fn synth(config: &ExperimentConfig) -> CliResult<(SynthSummary, ValidationFile)> {
    let day_type = config.demand.day_type;
    let tensor_path = out(config, &tensor_file(day_type));
    input(&tensor_path, "build-demand")?;
    let tensor = load_tensor(&tensor_path).map_err(|e| CliError::at(&tensor_path, e))?;
    let clearness = out(config, CLEARNESS);
    input(&clearness, "build-solar")?;
    let matrix = load_clearness(&clearness).map_err(|e| CliError::at(&clearness, e))?;
    let clusters: ClusterModelFile = load(&out(config, CLUSTERS), "cluster")?;
    let assignments_path = out(config, ASSIGNMENTS);
    let assignments =
        read_assignments_csv(input(&assignments_path, "assign")?).map_err(|e| CliError::at(&assignments_path, e))?;
    if assignments.is_empty() {
        return Err(CliError::Model("no prosumers assigned".into()));
    }

    let model = Arc::new(DemandModel::new(tensor, config.demand.bandwidth)?);
    let days = config.synthesis.days;
    let mut demand = Vec::with_capacity(assignments.len());
    let mut peaks = Vec::with_capacity(assignments.len());
    for (i, a) in assignments.iter().enumerate() {
        let mut chain = personalize(model.clone(), a.prosumer_id.as_str(), config.demand.personalization(), config.seed)?;
        let mut rng = substream(config.seed, "synth-demand", i as u64);
        let states = sample_multiday(&mut chain, days, config.demand.reinforcement, &mut rng)?;
        demand.push(states.iter().map(|s| s.kwh()).collect::<Vec<f64>>());
        let class = *a.features.get(CAPACITY_FEATURE).ok_or_else(|| {
            CliError::Model(format!("prosumer {} has no {CAPACITY_FEATURE} class", a.prosumer_id))
        })?;
        let cluster = clusters
            .clusters
            .get(class)
            .ok_or_else(|| CliError::Model(format!("capacity class {class} not in {CLUSTERS}")))?;
        peaks.push(cluster.mean);
    }

    let mut generation: Vec<Vec<f64>> = vec![Vec::with_capacity(days * SLOTS_PER_DAY); assignments.len()];
    for d in 0..days {
        let doy = day_of_year(config.solar.day_of_year, d);
        let systems: Vec<SolarConfig> = peaks.iter().map(|&p| config.solar.sized(doy, p)).collect();
        let cohort =
            sample_cohort(&systems, &matrix, config.solar.shared_weather, config.solar.initial, config.seed, d as u64)?;
        for (g, day) in generation.iter_mut().zip(cohort) {
            g.extend(day.kwh);
        }
    }

    let levels = &config.synthesis.penetration;
    let sweep = penetration_sweep(&demand, &generation, levels, &mut substream(config.seed, "penetration", 0))?;

    let ids: Vec<&str> = assignments.iter().map(|a| a.prosumer_id.as_str()).collect();
    let records = |series: &[Vec<f64>]| -> Vec<ProfileRecord> {
        ids.iter().zip(series).flat_map(|(id, s)| split_records(id, s).collect::<Vec<_>>()).collect()
    };
    write_with(&out(config, SYNTHETIC_DEMAND), |w| write_profiles_csv(&records(&demand), w))?;
    write_with(&out(config, SYNTHETIC_GENERATION), |w| write_profiles_csv(&records(&generation), w))?;
    write_with(&out(config, NET_AGGREGATES), |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["penetration", "holders", "slot", "demand", "generation", "net"])?;
        for level in &sweep {
            for (k, ((d, g), n)) in
                level.aggregate_demand.iter().zip(&level.aggregate_generation).zip(&level.aggregate_net).enumerate()
            {
                csv.write_record([
                    level.penetration.to_string(),
                    level.holders.len().to_string(),
                    (k + 1).to_string(),
                    d.to_string(),
                    g.to_string(),
                    n.to_string(),
                ])?;
            }
        }
        csv.flush()?;
        Ok(())
    })?;

    let summary = SynthSummary {
        prosumers: assignments.len(),
        days,
        day_type,
        levels: sweep
            .iter()
            .map(|l| PenetrationLevel {
                penetration: l.penetration,
                holders: l.holders.len(),
                midday_trough: l
                    .aggregate_net
                    .chunks(SLOTS_PER_DAY)
                    .map(|day| trough(day, MIDDAY.0, MIDDAY.1))
                    .fold(f64::INFINITY, f64::min),
                peak_net: l.aggregate_net.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            })
            .collect(),
    };
    save(&out(config, SYNTH), &summary)?;
    let validation = validate(config)?;
    Ok((summary, validation))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFile {
    pub day_type: DayType,
    pub demand: ValidationReport,
    /// Observed against synthetic generation, when generation was observed.
    pub generation: Option<ValidationReport>,
    pub heatmap: String,
}

fn series_by_prosumer(records: &[ProfileRecord]) -> Vec<Vec<f64>> {
    let mut by_id: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        by_id.entry(r.prosumer_id.as_str()).or_default().extend(&r.kwh);
    }
    by_id.into_values().collect()
}

pub fn validate(config: &ExperimentConfig) -> CliResult<ValidationFile> {
    let observed: Vec<Vec<f64>> = observed_profiles(config)?.into_iter().map(|p| p.kwh).collect();
    let synthetic = load_profiles(&out(config, SYNTHETIC_DEMAND), "synth")?;
    if observed.is_empty() || synthetic.is_empty() {
        return Err(CliError::Model("validation needs observed and synthetic profiles".into()));
    }
    let day_kwh: Vec<&[f64]> = synthetic.iter().map(|r| r.kwh.as_slice()).collect();
    let demand = ValidationReport::compare(&observed, &day_kwh, &series_by_prosumer(&synthetic), &config.synthesis.lags)?;

    let observed_gen = load_profiles(&out(config, GENERATION), "ingest")?;
    let synthetic_gen = load_profiles(&out(config, SYNTHETIC_GENERATION), "synth")?;
    let generation = if observed_gen.is_empty() || synthetic_gen.is_empty() {
        None
    } else {
        let a: Vec<&[f64]> = observed_gen.iter().map(|r| r.kwh.as_slice()).collect();
        let b: Vec<&[f64]> = synthetic_gen.iter().map(|r| r.kwh.as_slice()).collect();
        Some(ValidationReport::compare(&a, &b, &[], &[])?)
    };

    let day_type = config.demand.day_type;
    let tensor_path = out(config, &tensor_file(day_type));
    input(&tensor_path, "build-demand")?;
    let tensor = load_tensor(&tensor_path).map_err(|e| CliError::at(&tensor_path, e))?;
    let slot = config.synthesis.heatmap_slot;
    let counts: BTreeMap<u32, BTreeMap<u32, u64>> = tensor.rows(slot - 1).map(|(f, r)| (f, r.clone())).collect();
    let grid = log_heatmap(&counts, 0..=config.synthesis.heatmap_max_state);
    let heatmap = heatmap_file(slot);
    write_with(&out(config, &heatmap), |w| write_heatmap_csv(&grid, 0, w))?;

    let file = ValidationFile { day_type, demand, generation, heatmap };
    save(&out(config, VALIDATION), &file)?;
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub ingest: IngestSummary,
    pub clusters: ClusterSummary,
    pub assignment: AssignSummary,
    pub synthesis: SynthSummary,
    pub validation: ValidationFile,
}

pub fn report(config: &ExperimentConfig) -> CliResult<Report> {
    let ingest: IngestSummary = load(&out(config, INGEST), "ingest")?;
    let model: ClusterModelFile = load(&out(config, CLUSTERS), "cluster")?;
    let report = Report {
        seed: config.seed,
        ingest,
        clusters: ClusterSummary {
            points: model.total_population,
            k: model.clusters.len(),
            means: model.clusters.iter().map(|c| c.mean).collect(),
            populations: model.clusters.iter().map(|c| c.population).collect(),
        },
        assignment: load(&out(config, ASSIGN), "assign")?,
        synthesis: load(&out(config, SYNTH), "synth")?,
        validation: load(&out(config, VALIDATION), "validate")?,
    };
    save(&out(config, REPORT), &report)?;
    Ok(report)
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let i = &self.ingest;
        writeln!(
            f,
            "ingest: {} customers, {} weekday + {} weekend days, {} rejected rows",
            i.customers, i.weekday_profiles, i.weekend_profiles, i.rejected_rows
        )?;
        let means: Vec<String> = self.clusters.means.iter().map(|m| format!("{m:.3}")).collect();
        writeln!(f, "capacity clusters: K = {} (means {})", self.clusters.k, means.join(", "))?;
        let s = &self.synthesis;
        writeln!(f, "synthesis: {} prosumers x {} {} days", s.prosumers, s.days, s.day_type)?;
        let v = &self.validation.demand;
        match &v.mae {
            Some(m) => writeln!(f, "demand MAE: {:.2}%", m.percent)?,
            None => writeln!(f, "demand MAE: undefined")?,
        }
        for (lag, r) in &v.autocorrelation_by_lag {
            writeln!(f, "autocorrelation lag {lag}: {r:.4}")?;
        }
        for l in &s.levels {
            writeln!(
                f,
                "penetration {:.3}: {} holders, midday trough {:.4} kWh, peak {:.4} kWh",
                l.penetration, l.holders, l.midday_trough, l.peak_net
            )?;
        }
        Ok(())
    }
}
