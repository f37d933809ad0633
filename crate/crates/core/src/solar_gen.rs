//! Rooftop PV generation, `P = η·A·TIF·CI·G`.
//!
//! The time irradiance factor (TIF) is the cosine of the angle between the
//! sun and the panel normal, clipped at zero and zero whenever the sun is
//! below the horizon. It uses Cooper's declination and the hour angle at the
//! slot midpoint, with clock time taken as local solar time. The clearness
//! index (CI) is the stochastic part: a single 101-state chain over daylight
//! slots, learned from observed generation.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demand_chain::{kde_row_with, GaussianKernel, DEFAULT_BANDWIDTH};
use crate::rng::{self, SimRng};
use crate::validation::aggregate;
use crate::{Error, Result, SLOTS_PER_DAY, SLOT_HOURS};

/// Extraterrestrial irradiance (solar constant), W/m².
pub const SOLAR_CONSTANT: f64 = 1367.0;

/// CI states `0..=100`, one per 0.01 including both endpoints.
pub const CI_STATES: usize = 101;

fn default_g() -> f64 {
    SOLAR_CONSTANT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarConfig {
    /// Degrees, negative south of the equator.
    pub latitude: f64,
    /// Degrees from horizontal.
    pub panel_tilt: f64,
    /// Degrees clockwise from north that the panel faces.
    pub panel_azimuth: f64,
    pub efficiency: f64,
    /// Panel area, m².
    pub area: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    pub day_of_year: u32,
}

impl SolarConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::domain(format!("efficiency must be in (0, 1], got {}", self.efficiency)));
        }
        if !(self.area > 0.0) || !self.area.is_finite() {
            return Err(Error::domain(format!("area must be positive, got {}", self.area)));
        }
        if !(self.latitude.abs() <= 90.0) {
            return Err(Error::domain(format!("latitude out of range: {}", self.latitude)));
        }
        if !(1..=366).contains(&self.day_of_year) {
            return Err(Error::domain(format!("day of year out of range: {}", self.day_of_year)));
        }
        if !(self.g > 0.0) || !self.panel_tilt.is_finite() || !self.panel_azimuth.is_finite() {
            return Err(Error::domain("irradiance constant and panel angles must be finite, G positive"));
        }
        Ok(())
    }

    /// Panel area such that `η·A·G` equals `peak_kw`.
    pub fn with_peak_power(mut self, peak_kw: f64) -> Self {
        self.area = peak_kw * 1000.0 / (self.efficiency * self.g);
        self
    }

    /// Panel area such that the clear-sky energy at full normal incidence
    /// equals `peak_kwh` over one half-hour slot.
    pub fn with_peak_reading(self, peak_kwh: f64) -> Self {
        self.with_peak_power(peak_kwh / SLOT_HOURS)
    }
}

/// Cooper's declination in degrees.
pub fn declination_deg(day_of_year: u32) -> f64 {
    23.45 * (2.0 * PI * (284.0 + f64::from(day_of_year)) / 365.0).sin()
}

/// Hour angle in degrees at the midpoint of a 1-based slot.
pub fn hour_angle_deg(slot: usize) -> f64 {
    let hours = (slot as f64 - 0.5) * SLOT_HOURS;
    15.0 * (hours - 12.0)
}

/// Unit vector towards the sun in (east, north, up) coordinates.
pub fn sun_vector(latitude: f64, day_of_year: u32, slot: usize) -> [f64; 3] {
    let phi = latitude.to_radians();
    let delta = declination_deg(day_of_year).to_radians();
    let omega = hour_angle_deg(slot).to_radians();
    [
        -delta.cos() * omega.sin(),
        phi.cos() * delta.sin() - phi.sin() * delta.cos() * omega.cos(),
        phi.sin() * delta.sin() + phi.cos() * delta.cos() * omega.cos(),
    ]
}

/// Unit normal of a panel in (east, north, up) coordinates.
pub fn panel_normal(tilt: f64, azimuth: f64) -> [f64; 3] {
    let (b, g) = (tilt.to_radians(), azimuth.to_radians());
    [b.sin() * g.sin(), b.sin() * g.cos(), b.cos()]
}

/// Cosine of incidence on the panel at a 1-based slot, clipped to `[0, 1]`;
/// zero when the sun is below the horizon.
pub fn time_irradiance_factor(config: &SolarConfig, slot: usize) -> f64 {
    let s = sun_vector(config.latitude, config.day_of_year, slot);
    if s[2] <= 0.0 {
        return 0.0;
    }
    let n = panel_normal(config.panel_tilt, config.panel_azimuth);
    (s[0] * n[0] + s[1] * n[1] + s[2] * n[2]).clamp(0.0, 1.0)
}

pub fn tif_profile(config: &SolarConfig) -> Vec<f64> {
    (1..=SLOTS_PER_DAY).map(|k| time_irradiance_factor(config, k)).collect()
}

/// Slots where the panel receives direct irradiance.
pub fn daylight_mask(config: &SolarConfig) -> Vec<bool> {
    tif_profile(config).iter().map(|&t| t > 0.0).collect()
}

/// Clear-sky energy per slot in kWh: `η·A·TIF·G·Δt`.
pub fn clear_sky_profile(config: &SolarConfig) -> Vec<f64> {
    tif_profile(config)
        .iter()
        .map(|&tif| config.efficiency * config.area * tif * config.g * SLOT_HOURS / 1000.0)
        .collect()
}

/// CI state for a clearness index, rounding half up.
pub fn ci_state(ci: f64) -> u8 {
    ((ci.clamp(0.0, 1.0) * 100.0 + 0.5 + 1e-9).floor() as u8).min(100)
}

/// Per-slot CI states recovered from observed generation. Slots whose
/// clear-sky energy is zero are `None`.
pub fn extract_ci_series(generation_kwh: &[f64], config: &SolarConfig) -> Result<Vec<Option<u8>>> {
    if generation_kwh.len() != SLOTS_PER_DAY {
        return Err(Error::domain(format!("generation profile needs {SLOTS_PER_DAY} slots")));
    }
    config.validate()?;
    Ok(clear_sky_profile(config)
        .iter()
        .zip(generation_kwh)
        .map(|(&clear, &e)| (clear > 0.0).then(|| ci_state(e / clear)))
        .collect())
}

/// Panel area for `config` that makes the clearest observed slot fully
/// clear: `max E / (η·TIF·G·Δt)` over slots with `TIF ≥ min_tif` across all
/// observed days. Low-sun slots are skipped because small TIF amplifies
/// metering noise.
pub fn fit_area(config: &SolarConfig, days: &[Vec<f64>], min_tif: f64) -> Result<f64> {
    let tif = tif_profile(config);
    let mut best: f64 = 0.0;
    for day in days {
        if day.len() != SLOTS_PER_DAY {
            return Err(Error::domain(format!("generation profile needs {SLOTS_PER_DAY} slots")));
        }
        for (&e, &t) in day.iter().zip(&tif) {
            if t >= min_tif && t > 0.0 {
                best = best.max(e * 1000.0 / (config.efficiency * t * config.g * SLOT_HOURS));
            }
        }
    }
    if best > 0.0 {
        Ok(best)
    } else {
        Err(Error::Model("no daylight generation to size the system from".into()))
    }
}

/// Energy per slot for a CI trajectory: clear-sky energy times `CI`, zero
/// where the trajectory has no state.
pub fn generation_from_ci(config: &SolarConfig, ci: &[Option<u8>]) -> Vec<f64> {
    clear_sky_profile(config)
        .iter()
        .zip(ci)
        .map(|(&clear, s)| match s {
            Some(s) if clear > 0.0 => clear * (f64::from(*s) / 100.0),
            _ => 0.0,
        })
        .collect()
}

/// Time-homogeneous CI transition matrix over daylight slots.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearnessMatrix {
    counts: Vec<Vec<u64>>,
    bandwidth: Option<f64>,
    probabilities: Vec<Vec<f64>>,
}

impl ClearnessMatrix {
    /// Smooths each row of `counts` with the demand kernel; unobserved rows
    /// fall back to the smoothed destination marginal.
    pub fn from_counts(counts: Vec<Vec<u64>>, bandwidth: f64) -> Result<Self> {
        if counts.len() != CI_STATES || counts.iter().any(|r| r.len() != CI_STATES) {
            return Err(Error::domain("CI count matrix must be 101 × 101"));
        }
        let kernel = GaussianKernel::new(bandwidth, (CI_STATES - 1) as u32)?;
        let mut marginal = vec![0.0; CI_STATES];
        for row in &counts {
            for (m, &c) in marginal.iter_mut().zip(row) {
                *m += c as f64;
            }
        }
        let fallback = kde_row_with(&kernel, marginal.iter().enumerate().map(|(j, &c)| (j as u32, c)))
            .map_err(|_| Error::Model("no CI transitions observed".into()))?;
        let probabilities = counts
            .iter()
            .map(|row| {
                if row.iter().all(|&c| c == 0) {
                    Ok(fallback.probabilities.clone())
                } else {
                    kde_row_with(&kernel, row.iter().enumerate().map(|(j, &c)| (j as u32, c as f64)))
                        .map(|r| r.probabilities)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { counts, bandwidth: Some(bandwidth), probabilities })
    }

    /// A matrix given directly by its row probabilities.
    pub fn from_probabilities(probabilities: Vec<Vec<f64>>) -> Result<Self> {
        if probabilities.len() != CI_STATES || probabilities.iter().any(|r| r.len() != CI_STATES) {
            return Err(Error::domain("CI probability matrix must be 101 × 101"));
        }
        for (i, row) in probabilities.iter().enumerate() {
            if row.iter().any(|p| !(*p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("CI row {i} is not a probability vector")));
            }
        }
        Ok(Self { counts: vec![vec![0; CI_STATES]; CI_STATES], bandwidth: None, probabilities })
    }

    /// Weather-like rows: from state `i`, stay with probability `stay`, jump to
    /// fully clear or fully occluded with probability `edge / 2` each, and
    /// otherwise take a Gaussian step of width `step` states.
    pub fn persistent(stay: f64, edge: f64, step: f64) -> Result<Self> {
        if !(stay >= 0.0 && edge >= 0.0 && stay + edge <= 1.0 && step > 0.0) {
            return Err(Error::domain("persistent CI matrix needs stay, edge ≥ 0, stay + edge ≤ 1, step > 0"));
        }
        let rows = (0..CI_STATES)
            .map(|i| {
                let mut w: Vec<f64> =
                    (0..CI_STATES).map(|j| (-((j as f64 - i as f64) / step).powi(2) / 2.0).exp()).collect();
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|p| *p *= (1.0 - stay - edge) / total);
                w[i] += stay;
                w[0] += edge / 2.0;
                w[CI_STATES - 1] += edge / 2.0;
                let norm: f64 = w.iter().sum();
                w.into_iter().map(|p| p / norm).collect()
            })
            .collect();
        Self::from_probabilities(rows)
    }

    /// Every row moves to `state` with certainty.
    pub fn forcing(state: u8) -> Self {
        let mut row = vec![0.0; CI_STATES];
        row[state.min(100) as usize] = 1.0;
        Self::from_probabilities(vec![row; CI_STATES]).expect("point-mass rows are valid")
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn row(&self, from: u8) -> &[f64] {
        &self.probabilities[from as usize]
    }

    /// Row-normalized raw counts, `None` for an unobserved row.
    pub fn empirical_probability(&self, from: u8, to: u8) -> Option<f64> {
        let row = &self.counts[from as usize];
        let total: u64 = row.iter().sum();
        (total > 0).then(|| row[to as usize] as f64 / total as f64)
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn sample_from<R: Rng + ?Sized>(&self, from: u8, rng: &mut R) -> u8 {
        let row = self.row(from);
        let mut u = rng.random::<f64>() * row.iter().sum::<f64>();
        let mut last = 0;
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                if u < p {
                    return j as u8;
                }
                u -= p;
                last = j;
            }
        }
        last as u8
    }
}

/// Counts consecutive daylight CI pairs into a 101 × 101 matrix.
pub fn count_ci_transitions(sequences: &[Vec<Option<u8>>]) -> Result<Vec<Vec<u64>>> {
    let mut counts = vec![vec![0u64; CI_STATES]; CI_STATES];
    for seq in sequences {
        for w in seq.windows(2) {
            if let [Some(a), Some(b)] = w {
                if *a > 100 || *b > 100 {
                    return Err(Error::domain(format!("CI state out of range: {a} -> {b}")));
                }
                counts[*a as usize][*b as usize] += 1;
            }
        }
    }
    Ok(counts)
}

/// Builds a smoothed CI matrix from daylight CI sequences.
pub fn build_ci_matrix(sequences: &[Vec<Option<u8>>], bandwidth: f64) -> Result<ClearnessMatrix> {
    let counts = count_ci_transitions(sequences)?;
    if counts.iter().flatten().all(|&c| c == 0) {
        return Err(Error::domain("no consecutive daylight CI pairs"));
    }
    ClearnessMatrix::from_counts(counts, bandwidth)
}

/// Default CI kernel bandwidth, in CI states.
pub const DEFAULT_CI_BANDWIDTH: f64 = DEFAULT_BANDWIDTH;

/// How the first daylight CI state of a day is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "state")]
pub enum InitialCi {
    /// Uniform over all 101 states.
    #[default]
    Uniform,
    Fixed(u8),
}

/// Samples CI states over the `true` slots of `mask`; other slots are `None`.
/// The chain carries across gaps in the mask.
pub fn sample_ci_trajectory<R: Rng + ?Sized>(
    mask: &[bool],
    matrix: &ClearnessMatrix,
    initial: InitialCi,
    rng: &mut R,
) -> Vec<Option<u8>> {
    let mut state: Option<u8> = None;
    mask.iter()
        .map(|&lit| {
            if !lit {
                return None;
            }
            let next = match state {
                None => match initial {
                    InitialCi::Uniform => rng.random_range(0..=100u8),
                    InitialCi::Fixed(s) => s.min(100),
                },
                Some(prev) => matrix.sample_from(prev, rng),
            };
            state = Some(next);
            Some(next)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDay {
    pub kwh: Vec<f64>,
    pub ci: Vec<Option<u8>>,
}

/// One stochastic generation day for a single system.
pub fn sample_generation_profile<R: Rng + ?Sized>(
    config: &SolarConfig,
    matrix: &ClearnessMatrix,
    initial: InitialCi,
    rng: &mut R,
) -> Result<GeneratedDay> {
    config.validate()?;
    let ci = sample_ci_trajectory(&daylight_mask(config), matrix, initial, rng);
    Ok(GeneratedDay { kwh: generation_from_ci(config, &ci), ci })
}

/// Generation for every system of a cohort on day `day`.
///
/// With `shared_weather` one CI trajectory, drawn over the union of the
/// members' daylight slots, is applied to every member; members then differ
/// only through their own configuration. Otherwise each member draws its own
/// trajectory from an independent substream.
pub fn sample_cohort(
    configs: &[SolarConfig],
    matrix: &ClearnessMatrix,
    shared_weather: bool,
    initial: InitialCi,
    seed: u64,
    day: u64,
) -> Result<Vec<GeneratedDay>> {
    for c in configs {
        c.validate()?;
    }
    if shared_weather {
        let mut mask = vec![false; SLOTS_PER_DAY];
        for c in configs {
            for (m, d) in mask.iter_mut().zip(daylight_mask(c)) {
                *m |= d;
            }
        }
        let mut rng = rng::substream(seed, "cohort-weather", day);
        let ci = sample_ci_trajectory(&mask, matrix, initial, &mut rng);
        Ok(configs
            .iter()
            .map(|c| {
                let own: Vec<Option<u8>> = ci.iter().zip(daylight_mask(c)).map(|(s, d)| s.filter(|_| d)).collect();
                GeneratedDay { kwh: generation_from_ci(c, &own), ci: own }
            })
            .collect())
    } else {
        configs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut rng: SimRng = rng::substream(seed, &format!("weather/{day}"), i as u64);
                sample_generation_profile(c, matrix, initial, &mut rng)
            })
            .collect()
    }
}

/// Net demand of a population at one PV penetration level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetDemand {
    pub penetration: f64,
    /// Indices of prosumers holding PV, ascending.
    pub holders: Vec<usize>,
    pub net: Vec<Vec<f64>>,
    pub aggregate_demand: Vec<f64>,
    /// Pointwise mean over all prosumers of assigned generation (zero for
    /// prosumers without PV).
    pub aggregate_generation: Vec<f64>,
    pub aggregate_net: Vec<f64>,
}

fn net_for_holders(demand: &[Vec<f64>], generation: &[Vec<f64>], order: &[usize], penetration: f64) -> Result<NetDemand> {
    if !(0.0..=1.0).contains(&penetration) {
        return Err(Error::domain(format!("penetration must be in [0, 1], got {penetration}")));
    }
    let holders_n = (penetration * demand.len() as f64).round() as usize;
    let mut holders: Vec<usize> = order[..holders_n].to_vec();
    holders.sort_unstable();
    let mut has_pv = vec![false; demand.len()];
    for &h in &holders {
        has_pv[h] = true;
    }
    let zero = vec![0.0; demand.first().map_or(0, Vec::len)];
    let assigned: Vec<&Vec<f64>> = (0..demand.len()).map(|i| if has_pv[i] { &generation[i] } else { &zero }).collect();
    let net: Vec<Vec<f64>> =
        demand.iter().zip(&assigned).map(|(d, g)| d.iter().zip(g.iter()).map(|(d, g)| d - g).collect()).collect();
    Ok(NetDemand {
        penetration,
        holders,
        aggregate_demand: aggregate(demand)?.mean,
        aggregate_generation: aggregate(&assigned)?.mean,
        aggregate_net: aggregate(&net)?.mean,
        net,
    })
}

fn check_aligned(demand: &[Vec<f64>], generation: &[Vec<f64>]) -> Result<()> {
    if demand.is_empty() {
        return Err(Error::domain("no demand profiles"));
    }
    if demand.len() != generation.len() {
        return Err(Error::domain(format!("{} demand profiles but {} generation profiles", demand.len(), generation.len())));
    }
    let len = demand[0].len();
    if demand.iter().chain(generation).any(|p| p.len() != len) {
        return Err(Error::domain("profiles have mismatched slot counts"));
    }
    Ok(())
}

fn holder_order<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Gives PV to a uniformly random `round(penetration × N)` prosumers and
/// subtracts their generation from their demand. `generation[i]` is the
/// profile prosumer `i` would produce if it held PV.
pub fn net_demand<R: Rng + ?Sized>(
    demand: &[Vec<f64>],
    generation: &[Vec<f64>],
    penetration: f64,
    rng: &mut R,
) -> Result<NetDemand> {
    check_aligned(demand, generation)?;
    net_for_holders(demand, generation, &holder_order(demand.len(), rng), penetration)
}

/// [`net_demand`] at several levels with nested holder sets: raising the
/// penetration only adds holders.
pub fn penetration_sweep<R: Rng + ?Sized>(
    demand: &[Vec<f64>],
    generation: &[Vec<f64>],
    levels: &[f64],
    rng: &mut R,
) -> Result<Vec<NetDemand>> {
    check_aligned(demand, generation)?;
    let order = holder_order(demand.len(), rng);
    levels.iter().map(|&p| net_for_holders(demand, generation, &order, p)).collect()
}

/// Minimum of a profile over 1-based slots `from..=to`.
pub fn trough(profile: &[f64], from: usize, to: usize) -> f64 {
    profile[from - 1..to].iter().copied().fold(f64::INFINITY, f64::min)
}
