//! Meter readings, demand states, day splitting and the ground-truth chain.
//!
//! Timestamps mark the *start* of a half-hour interval: a reading stamped
//! `00:00` covers 00:00–00:30 and lands in slot 1 (index 0).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::rng::{self, SimRng};
use crate::{Error, Result, SLOTS_PER_DAY};

/// Default cap on demand states (7 kWh per half hour).
pub const DEFAULT_N_MAX: u32 = 700;

/// One half-hourly reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterReading {
    pub customer_id: String,
    pub timestamp: NaiveDateTime,
    pub demand_kwh: f64,
    pub generation_kwh: Option<f64>,
}

impl MeterReading {
    /// Zero-based half-hour slot of the day.
    pub fn slot(&self) -> usize {
        (self.timestamp.hour() * 2 + self.timestamp.minute() / 30) as usize
    }
}

/// All readings of one customer, sorted by timestamp, plus any feature labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CustomerTrace {
    pub customer_id: String,
    pub readings: Vec<MeterReading>,
    pub features: BTreeMap<String, String>,
}

/// A discretized demand reading: `round(kWh × 100)` capped at `n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DemandState(pub u32);

impl DemandState {
    pub fn index(self) -> u32 {
        self.0
    }

    pub fn kwh(self) -> f64 {
        undiscretize(self)
    }
}

/// Maps a reading to its 0.01 kWh state, rounding half up and clamping at
/// `n_max`.
pub fn discretize_energy(kwh: f64, n_max: u32) -> Result<DemandState> {
    if !kwh.is_finite() || kwh < 0.0 {
        return Err(Error::domain(format!("energy must be finite and nonnegative, got {kwh}")));
    }
    // Decimal inputs such as 0.125 are stored a hair below the tie in binary;
    // the epsilon treats those as ties.
    let scaled = (kwh * 100.0 + 0.5 + 1e-9).floor();
    let index = if scaled >= f64::from(n_max) { n_max } else { scaled as u32 };
    Ok(DemandState(index))
}

/// Bin center of a state in kWh.
pub fn undiscretize(state: DemandState) -> f64 {
    f64::from(state.0) / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub fn as_str(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }
}

impl std::str::FromStr for DayType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "weekday" => Ok(DayType::Weekday),
            "weekend" => Ok(DayType::Weekend),
            other => Err(Error::domain(format!("unknown day type {other:?}"))),
        }
    }
}

impl std::fmt::Display for DayType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Weekday/weekend rules. Holidays are treated as weekend days.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Calendar {
    #[serde(default)]
    pub holidays: BTreeSet<NaiveDate>,
}

impl Calendar {
    pub fn day_type(&self, date: NaiveDate) -> DayType {
        if self.holidays.contains(&date) {
            return DayType::Weekend;
        }
        match date.weekday() {
            Weekday::Sat | Weekday::Sun => DayType::Weekend,
            _ => DayType::Weekday,
        }
    }
}

/// One complete midnight-to-midnight day of 48 readings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyProfile {
    pub customer_id: String,
    pub date: NaiveDate,
    pub day_type: DayType,
    pub kwh: Vec<f64>,
    /// Present only when every slot of the day carried a generation reading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_kwh: Option<Vec<f64>>,
}

impl DailyProfile {
    pub fn new(customer_id: impl Into<String>, date: NaiveDate, day_type: DayType, kwh: Vec<f64>) -> Result<Self> {
        if kwh.len() != SLOTS_PER_DAY {
            return Err(Error::domain(format!("a daily profile needs {SLOTS_PER_DAY} slots, got {}", kwh.len())));
        }
        Ok(Self { customer_id: customer_id.into(), date, day_type, kwh, generation_kwh: None })
    }

    pub fn states(&self, n_max: u32) -> Result<Vec<DemandState>> {
        self.kwh.iter().map(|&v| discretize_energy(v, n_max)).collect()
    }
}

/// Maps CSV header names onto reading fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub customer_id: String,
    pub timestamp: String,
    pub demand: String,
    #[serde(default)]
    pub generation: Option<String>,
    /// Per-customer label columns, copied into [`CustomerTrace::features`].
    #[serde(default)]
    pub features: Vec<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            customer_id: "customer_id".into(),
            timestamp: "timestamp".into(),
            demand: "demand_kwh".into(),
            generation: Some("generation_kwh".into()),
            features: Vec::new(),
        }
    }
}

/// A row that was read but not kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDiagnostic {
    /// 1-based line number in the source, header included.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedMeterData {
    pub traces: Vec<CustomerTrace>,
    pub rejected: Vec<RowDiagnostic>,
}

const TIMESTAMP_FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];

pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    TIMESTAMP_FORMATS.iter().find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

fn parse_energy(raw: &str, what: &str) -> std::result::Result<f64, String> {
    let v: f64 = raw.trim().parse().map_err(|_| format!("unparseable {what} {raw:?}"))?;
    if !v.is_finite() {
        return Err(format!("non-finite {what} {raw:?}"));
    }
    if v < 0.0 {
        return Err(format!("negative {what} {v}"));
    }
    Ok(v)
}

/// Reads a headered UTF-8 CSV into per-customer traces.
///
/// Missing mapped columns fail the whole parse. Bad rows (unparseable,
/// negative energy, off-grid timestamps) are skipped and reported.
pub fn parse_meter_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<ParsedMeterData> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column {name:?}")))
    };
    let id_col = column(&schema.customer_id)?;
    let ts_col = column(&schema.timestamp)?;
    let demand_col = column(&schema.demand)?;
    let gen_col = schema.generation.as_deref().map(column).transpose()?;
    let feature_cols = schema
        .features
        .iter()
        .map(|f| column(f).map(|c| (f.clone(), c)))
        .collect::<Result<Vec<_>>>()?;

    let mut by_customer: BTreeMap<String, CustomerTrace> = BTreeMap::new();
    let mut rejected = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let line = n as u64 + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RowDiagnostic { line, reason: e.to_string() });
                continue;
            }
        };
        let field = |c: usize| record.get(c).unwrap_or("");
        let row = (|| -> std::result::Result<MeterReading, String> {
            let customer_id = field(id_col).to_string();
            if customer_id.is_empty() {
                return Err("empty customer id".into());
            }
            let timestamp =
                parse_timestamp(field(ts_col)).ok_or_else(|| format!("unparseable timestamp {:?}", field(ts_col)))?;
            if timestamp.second() != 0 || timestamp.minute() % 30 != 0 {
                return Err(format!("timestamp {timestamp} not aligned to :00 or :30"));
            }
            let demand_kwh = parse_energy(field(demand_col), "demand")?;
            let generation_kwh = match gen_col {
                Some(c) if !field(c).is_empty() => Some(parse_energy(field(c), "generation")?),
                _ => None,
            };
            Ok(MeterReading { customer_id, timestamp, demand_kwh, generation_kwh })
        })();
        match row {
            Ok(reading) => {
                let trace = by_customer.entry(reading.customer_id.clone()).or_insert_with(|| CustomerTrace {
                    customer_id: reading.customer_id.clone(),
                    readings: Vec::new(),
                    features: feature_cols.iter().map(|(f, c)| (f.clone(), field(*c).to_string())).collect(),
                });
                trace.readings.push(reading);
            }
            Err(reason) => rejected.push(RowDiagnostic { line, reason }),
        }
    }
    let mut traces: Vec<CustomerTrace> = by_customer.into_values().collect();
    for t in &mut traces {
        t.readings.sort_by_key(|r| r.timestamp);
    }
    Ok(ParsedMeterData { traces, rejected })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DaySplit {
    pub profiles: Vec<DailyProfile>,
    pub dropped_days: usize,
    pub dropped_slots: usize,
}

/// Cuts a trace into complete 48-slot days.
///
/// A day survives only if it holds exactly one reading for each of the 48
/// slots; daylight-saving days (46 or 50 readings), gaps and duplicates are
/// dropped and counted.
pub fn split_days(trace: &CustomerTrace, calendar: &Calendar) -> DaySplit {
    let mut by_date: BTreeMap<NaiveDate, Vec<&MeterReading>> = BTreeMap::new();
    for r in &trace.readings {
        by_date.entry(r.timestamp.date()).or_default().push(r);
    }
    let mut out = DaySplit::default();
    for (date, readings) in by_date {
        let mut slots: [Option<&MeterReading>; SLOTS_PER_DAY] = [None; SLOTS_PER_DAY];
        let mut complete = readings.len() == SLOTS_PER_DAY;
        for r in &readings {
            let s = r.slot();
            if slots[s].is_some() {
                complete = false;
            }
            slots[s] = Some(r);
        }
        if !complete || slots.iter().any(Option::is_none) {
            out.dropped_days += 1;
            out.dropped_slots += readings.len();
            continue;
        }
        let day: Vec<&MeterReading> = slots.iter().flatten().copied().collect();
        let kwh = day.iter().map(|r| r.demand_kwh).collect();
        let generation_kwh = day.iter().map(|r| r.generation_kwh).collect::<Option<Vec<f64>>>();
        out.profiles.push(DailyProfile {
            customer_id: trace.customer_id.clone(),
            date,
            day_type: calendar.day_type(date),
            kwh,
            generation_kwh,
        });
    }
    out
}

/// A fully specified 48-slot chain over demand states, used to generate
/// ground-truth data with known statistics.
///
/// `transitions[k]` maps a from-state at slot `k + 1` (zero-based) to the
/// sparse distribution of the state at slot `k + 2`, so it has 47 entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityChain {
    pub n_max: u32,
    pub initial: Vec<(u32, f64)>,
    pub transitions: Vec<BTreeMap<u32, Vec<(u32, f64)>>>,
}

const ROW_TOLERANCE: f64 = 1e-9;

fn check_row(row: &[(u32, f64)], n_max: u32, what: &str) -> Result<()> {
    if row.is_empty() {
        return Err(Error::domain(format!("{what}: empty row")));
    }
    let mut total = 0.0;
    for &(s, p) in row {
        if s > n_max {
            return Err(Error::domain(format!("{what}: state {s} above n_max {n_max}")));
        }
        if !(p >= 0.0) {
            return Err(Error::domain(format!("{what}: invalid probability {p}")));
        }
        total += p;
    }
    if (total - 1.0).abs() > ROW_TOLERANCE {
        return Err(Error::domain(format!("{what}: row sums to {total}, not 1")));
    }
    Ok(())
}

impl ProbabilityChain {
    /// Checks normalization and that every reachable state has a row.
    pub fn validate(&self) -> Result<()> {
        if self.transitions.len() != SLOTS_PER_DAY - 1 {
            return Err(Error::domain(format!(
                "chain needs {} transition slots, got {}",
                SLOTS_PER_DAY - 1,
                self.transitions.len()
            )));
        }
        check_row(&self.initial, self.n_max, "initial distribution")?;
        for (k, slot) in self.transitions.iter().enumerate() {
            for (from, row) in slot {
                check_row(row, self.n_max, &format!("slot {} row {from}", k + 2))?;
            }
        }
        for (k, marginal) in self.marginals().iter().enumerate().take(SLOTS_PER_DAY - 1) {
            for &s in marginal.keys() {
                if !self.transitions[k].contains_key(&s) {
                    return Err(Error::domain(format!("state {s} reachable at slot {} has no row", k + 1)));
                }
            }
        }
        Ok(())
    }

    /// A household-like chain: each slot pulls the state part of the way
    /// towards a diurnal target (overnight base load, morning and evening
    /// peaks) with Gaussian steps of width `step` states, truncated to
    /// `±3·step` and to `[0, max_state]`.
    pub fn diurnal(max_state: u32, step: f64) -> Result<Self> {
        if max_state == 0 || !(step > 0.0) {
            return Err(Error::domain("diurnal chain needs max_state ≥ 1 and step > 0"));
        }
        let top = f64::from(max_state);
        let target = |slot: usize| -> f64 {
            let h = slot as f64 * 0.5 + 0.25;
            let bump = |centre: f64, width: f64| (-(h - centre).powi(2) / (2.0 * width * width)).exp();
            top * (0.15 + 0.35 * bump(7.5, 1.2) + 0.6 * bump(19.0, 1.8)).min(1.0)
        };
        let row = |centre: f64| -> Vec<(u32, f64)> {
            let reach = (3.0 * step).ceil();
            let lo = (centre - reach).floor().max(0.0) as u32;
            let hi = ((centre + reach).ceil() as u32).min(max_state);
            let w: Vec<(u32, f64)> =
                (lo..=hi).map(|j| (j, (-(f64::from(j) - centre).powi(2) / (2.0 * step * step)).exp())).collect();
            let total: f64 = w.iter().map(|&(_, p)| p).sum();
            w.into_iter().map(|(j, p)| (j, p / total)).collect()
        };
        let transitions = (1..SLOTS_PER_DAY)
            .map(|k| (0..=max_state).map(|i| (i, row(0.6 * f64::from(i) + 0.4 * target(k)))).collect())
            .collect();
        Ok(Self { n_max: DEFAULT_N_MAX.max(max_state), initial: row(target(0)), transitions })
    }

    /// Exact state distribution at every slot, by forward propagation.
    pub fn marginals(&self) -> Vec<BTreeMap<u32, f64>> {
        let mut out = Vec::with_capacity(SLOTS_PER_DAY);
        let mut current: BTreeMap<u32, f64> = BTreeMap::new();
        for &(s, p) in &self.initial {
            if p > 0.0 {
                *current.entry(s).or_default() += p;
            }
        }
        out.push(current.clone());
        for slot in &self.transitions {
            let mut next: BTreeMap<u32, f64> = BTreeMap::new();
            for (&from, &mass) in &current {
                if let Some(row) = slot.get(&from) {
                    for &(to, p) in row {
                        if p > 0.0 {
                            *next.entry(to).or_default() += mass * p;
                        }
                    }
                }
            }
            out.push(next.clone());
            current = next;
        }
        out
    }

    /// Exact expected kWh per slot.
    pub fn mean_profile_kwh(&self) -> Vec<f64> {
        self.marginals()
            .iter()
            .map(|m| m.iter().map(|(&s, &p)| p * undiscretize(DemandState(s))).sum())
            .collect()
    }
}

struct CompiledRow {
    states: Vec<u32>,
    dist: WeightedIndex<f64>,
}

impl CompiledRow {
    fn new(row: &[(u32, f64)]) -> Result<Self> {
        let dist = WeightedIndex::new(row.iter().map(|&(_, p)| p)).map_err(|e| Error::domain(e.to_string()))?;
        Ok(Self { states: row.iter().map(|&(s, _)| s).collect(), dist })
    }

    fn sample(&self, rng: &mut SimRng) -> u32 {
        self.states[self.dist.sample(rng)]
    }
}

/// Samples `customers × days` of consecutive calendar days from `chain`,
/// starting at `start`. Each customer draws from its own substream of `seed`,
/// and each day starts afresh from the chain's initial distribution.
pub fn generate_ground_truth(
    chain: &ProbabilityChain,
    customers: usize,
    days: usize,
    seed: u64,
    start: NaiveDate,
) -> Result<Vec<CustomerTrace>> {
    chain.validate()?;
    let initial = CompiledRow::new(&chain.initial)?;
    let rows = chain
        .transitions
        .iter()
        .map(|slot| {
            slot.iter()
                .map(|(&from, row)| CompiledRow::new(row).map(|r| (from, r)))
                .collect::<Result<BTreeMap<u32, CompiledRow>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut traces = Vec::with_capacity(customers);
    for c in 0..customers {
        let mut rng = rng::substream(seed, "ground-truth", c as u64);
        let customer_id = format!("gt-{c:05}");
        let mut readings = Vec::with_capacity(days * SLOTS_PER_DAY);
        for d in 0..days {
            let date = start + Duration::days(d as i64);
            let midnight = date.and_hms_opt(0, 0, 0).expect("valid midnight");
            let mut state = initial.sample(&mut rng);
            for slot in 0..SLOTS_PER_DAY {
                if slot > 0 {
                    // validate() guarantees a row for every reachable state
                    state = rows[slot - 1][&state].sample(&mut rng);
                }
                readings.push(MeterReading {
                    customer_id: customer_id.clone(),
                    timestamp: midnight + Duration::minutes(30 * slot as i64),
                    demand_kwh: undiscretize(DemandState(state)),
                    generation_kwh: None,
                });
            }
        }
        traces.push(CustomerTrace { customer_id, readings, features: BTreeMap::new() });
    }
    Ok(traces)
}
