//! Generator for the bundled synthetic meter dataset.
//!
//! Demand follows two known diurnal chains (weekday, weekend); generation
//! comes from systems sized by a capacity mixture under independent
//! stochastic weather. Everything derives from one seed.

use std::io::Write;

use chrono::{Datelike, NaiveDate};
use prosynth::clustering::{resample_mixture, Cluster, ClusterModel};
use prosynth::data_model::{generate_ground_truth, Calendar, DayType, ProbabilityChain};
use prosynth::rng::substream;
use prosynth::solar_gen::{sample_generation_profile, ClearnessMatrix, InitialCi};
use prosynth::{Result, SLOTS_PER_DAY};
use rand::Rng;

use crate::config::SolarParams;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub customers: usize,
    pub days: usize,
    pub start: NaiveDate,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { customers: 60, days: 28, start: NaiveDate::from_ymd_opt(2013, 3, 4).expect("valid date"), seed: 2013 }
    }
}

/// Peak half-hour generation readings (kWh) per capacity group.
pub fn capacity_mixture() -> ClusterModel {
    ClusterModel::new(vec![
        Cluster { mean: 0.6368, variance: 0.0338, population: 165 },
        Cluster { mean: 1.3293, variance: 0.0104, population: 20 },
        Cluster { mean: 1.8843, variance: 0.016, population: 3 },
        Cluster { mean: 4.3960, variance: 0.0, population: 1 },
    ])
    .expect("valid mixture")
}

pub fn weekday_chain() -> ProbabilityChain {
    ProbabilityChain::diurnal(120, 6.0).expect("valid chain")
}

pub fn weekend_chain() -> ProbabilityChain {
    ProbabilityChain::diurnal(150, 8.0).expect("valid chain")
}

pub fn weather() -> ClearnessMatrix {
    ClearnessMatrix::persistent(0.5, 0.04, 6.0).expect("valid matrix")
}

/// Per-customer peak half-hour generation, drawn from [`capacity_mixture`].
pub fn sample_peaks(spec: &SampleSpec) -> Vec<f64> {
    let mut rng = substream(spec.seed, "sample-capacity", 0);
    let mut peaks = Vec::with_capacity(spec.customers);
    while peaks.len() < spec.customers {
        peaks.extend(resample_mixture(&capacity_mixture(), &mut rng).into_iter().map(|p| p.max(0.1)));
    }
    peaks.truncate(spec.customers);
    peaks
}

const TARIFFS: [&str; 2] = ["flat", "time_of_use"];

/// Writes `customer_id,timestamp,demand_kwh,generation_kwh,tariff` rows.
pub fn write_sample_meter_csv<W: Write>(spec: &SampleSpec, solar: &SolarParams, out: W) -> Result<()> {
    let weekday = generate_ground_truth(&weekday_chain(), spec.customers, spec.days, spec.seed, spec.start)?;
    let weekend = generate_ground_truth(&weekend_chain(), spec.customers, spec.days, spec.seed ^ 0x5eed, spec.start)?;
    let calendar = Calendar::default();
    let peaks = sample_peaks(spec);
    let matrix = weather();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["customer_id", "timestamp", "demand_kwh", "generation_kwh", "tariff"])?;
    for (c, &peak) in peaks.iter().enumerate() {
        let id = format!("c{c:03}");
        let tariff = TARIFFS[substream(spec.seed, "sample-tariff", c as u64).random_range(0..TARIFFS.len())];
        let mut weather_rng = substream(spec.seed, "sample-weather", c as u64);
        for d in 0..spec.days {
            let date = spec.start + chrono::Duration::days(d as i64);
            let source = match calendar.day_type(date) {
                DayType::Weekday => &weekday[c],
                DayType::Weekend => &weekend[c],
            };
            let config = solar.sized(date.ordinal(), peak);
            let generation = sample_generation_profile(&config, &matrix, InitialCi::Uniform, &mut weather_rng)?.kwh;
            let readings = &source.readings[d * SLOTS_PER_DAY..(d + 1) * SLOTS_PER_DAY];
            for (r, g) in readings.iter().zip(&generation) {
                w.write_record([
                    id.as_str(),
                    &r.timestamp.format("%Y-%m-%d %H:%M:%S").to_string(),
                    &format!("{:.2}", r.demand_kwh),
                    &format!("{g:.3}"),
                    tariff,
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
