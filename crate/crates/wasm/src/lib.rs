//! Browser bindings: sample demand days, draw a solar day, sweep PV
//! penetration. Every function is pure given its seed and returns flat
//! `f64` arrays for the page to plot.

use std::cell::OnceCell;
use std::sync::Arc;

use chrono::NaiveDate;
use prosynth::data_model::{generate_ground_truth, split_days, Calendar, DayType, ProbabilityChain};
use prosynth::demand_chain::{build_tensor, personalize, sample_multiday, DemandModel, PersonalizationConfig};
use prosynth::rng::{root, substream};
use prosynth::solar_gen::{
    clear_sky_profile, penetration_sweep, sample_cohort, sample_generation_profile, ClearnessMatrix, InitialCi,
    SolarConfig, SOLAR_CONSTANT,
};
use prosynth::SLOTS_PER_DAY;
use wasm_bindgen::prelude::*;

thread_local! {
    static MODEL: OnceCell<Arc<DemandModel>> = const { OnceCell::new() };
}

/// Weekday model learned from a week of a known diurnal household chain.
fn model() -> Arc<DemandModel> {
    MODEL.with(|m| {
        m.get_or_init(|| {
            let chain = ProbabilityChain::diurnal(120, 6.0).expect("valid chain");
            let monday = NaiveDate::from_ymd_opt(2013, 1, 7).expect("valid date");
            let profiles: Vec<_> = generate_ground_truth(&chain, 200, 7, 1, monday)
                .expect("valid chain")
                .iter()
                .flat_map(|t| split_days(t, &Calendar::default()).profiles)
                .filter(|p| p.day_type == DayType::Weekday)
                .collect();
            let tensor = build_tensor(&profiles, DayType::Weekday, chain.n_max).expect("weekday profiles");
            Arc::new(DemandModel::new(tensor, 2.0).expect("nonempty tensor"))
        })
        .clone()
    })
}

fn js_err(e: prosynth::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `prosumers × days × 48` demand readings (kWh), prosumer-major, followed by
/// the 48-slot population mean.
#[wasm_bindgen]
pub fn sample_demand(prosumers: usize, days: usize, reinforcement: f64, seed: u64) -> Result<Vec<f64>, JsError> {
    let model = model();
    let mut out = Vec::with_capacity((prosumers * days + 1) * SLOTS_PER_DAY);
    let mut mean = vec![0.0; SLOTS_PER_DAY];
    for p in 0..prosumers {
        let mut chain =
            personalize(model.clone(), format!("p{p}"), PersonalizationConfig::default(), seed).map_err(js_err)?;
        let states = sample_multiday(&mut chain, days, reinforcement, &mut substream(seed, "demo", p as u64))
            .map_err(js_err)?;
        for (k, s) in states.iter().enumerate() {
            out.push(s.kwh());
            mean[k % SLOTS_PER_DAY] += s.kwh() / (prosumers * days) as f64;
        }
    }
    out.extend(mean);
    Ok(out)
}

fn system(latitude: f64, tilt: f64, azimuth: f64, day_of_year: u32, area: f64) -> Result<SolarConfig, JsError> {
    let config =
        SolarConfig { latitude, panel_tilt: tilt, panel_azimuth: azimuth, efficiency: 0.18, area, g: SOLAR_CONSTANT, day_of_year };
    config.validate().map_err(js_err)?;
    Ok(config)
}

fn weather(persistence: f64) -> Result<ClearnessMatrix, JsError> {
    ClearnessMatrix::persistent(persistence.clamp(0.0, 0.95), 0.04, 6.0).map_err(js_err)
}

/// Clear-sky curve then one stochastic day, 48 slots each (kWh).
#[wasm_bindgen]
pub fn solar_day(
    latitude: f64,
    tilt: f64,
    azimuth: f64,
    day_of_year: u32,
    area: f64,
    persistence: f64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    let config = system(latitude, tilt, azimuth, day_of_year, area)?;
    let day = sample_generation_profile(&config, &weather(persistence)?, InitialCi::Uniform, &mut root(seed))
        .map_err(js_err)?;
    let mut out = clear_sky_profile(&config);
    out.extend(day.kwh);
    Ok(out)
}

/// Aggregate net demand (mean kWh per prosumer) at each level, 48 slots per
/// level, for one day of `prosumers`. Each panel draws its own weather so one
/// overcast path does not darken the whole cohort.
#[wasm_bindgen]
pub fn net_sweep(levels: Vec<f64>, prosumers: usize, area: f64, persistence: f64, seed: u64) -> Result<Vec<f64>, JsError> {
    if prosumers == 0 {
        return Err(JsError::new("need at least one prosumer"));
    }
    let model = model();
    let mut rng = root(seed);
    let demand: Vec<Vec<f64>> =
        (0..prosumers).map(|_| model.sample_day(&mut rng).iter().map(|s| s.kwh()).collect()).collect();
    let systems = vec![system(-33.87, 30.0, 0.0, 70, area)?; prosumers];
    let generation: Vec<Vec<f64>> = sample_cohort(&systems, &weather(persistence)?, false, InitialCi::Uniform, seed, 0)
        .map_err(js_err)?
        .into_iter()
        .map(|g| g.kwh)
        .collect();
    let sweep = penetration_sweep(&demand, &generation, &levels, &mut substream(seed, "holders", 0)).map_err(js_err)?;
    Ok(sweep.into_iter().flat_map(|l| l.aggregate_net).collect())
}

/// Mean profile of the chain the demo model was learned from.
#[wasm_bindgen]
pub fn observed_mean() -> Vec<f64> {
    let chain = ProbabilityChain::diurnal(120, 6.0).expect("valid chain");
    chain.mean_profile_kwh()
}
