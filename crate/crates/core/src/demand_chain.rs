//! Time-inhomogeneous demand chains.
//!
//! A [`TransitionTensor`] holds raw counts `m[i][j][k]` of consecutive
//! demand states for each of the 48 slots. Slot 1 (index 0) counts the
//! transition from the last state of the previous day when that day was
//! observed for the same customer; otherwise it records a self-transition
//! into the day's first state. Rows are turned into sampling distributions by
//! a Gaussian kernel over state indices ([`kde_row`]), which makes every state
//! reachable even when it was never observed.
//!
//! [`DemandModel`] caches the smoothed rows of a tensor and samples single
//! days. [`PersonalizedChain`] draws a prosumer-specific copy of every row
//! from a Dirichlet, and [`sample_multiday`] samples consecutive days while
//! feeding each transition back into that row (a Pólya urn), so a synthetic
//! prosumer develops habits.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use crate::data_model::{DailyProfile, DayType, DemandState};
use crate::rng::{self, fnv1a_extend};
use crate::{Error, Result, SLOTS_PER_DAY};

/// Default kernel bandwidth in state-index units (0.02 kWh).
pub const DEFAULT_BANDWIDTH: f64 = 2.0;

/// Default Pólya-urn weight added per sampled transition.
pub const DEFAULT_REINFORCEMENT: f64 = 1.0;

/// Lower bound on a kernel weight. `exp(-d²/2h²)` underflows to zero beyond a
/// few hundred bandwidths; the floor keeps every state strictly positive.
pub const KERNEL_FLOOR: f64 = 1e-300;

/// Sparse count tensor over (slot, from-state, to-state).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTensor {
    n_max: u32,
    day_type: DayType,
    source_population: usize,
    source_hash: u64,
    slots: Vec<BTreeMap<u32, BTreeMap<u32, u64>>>,
}

impl TransitionTensor {
    pub fn empty(n_max: u32, day_type: DayType) -> Self {
        Self { n_max, day_type, source_population: 0, source_hash: 0, slots: vec![BTreeMap::new(); SLOTS_PER_DAY] }
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn day_type(&self) -> DayType {
        self.day_type
    }

    /// Distinct customers that contributed profiles.
    pub fn source_population(&self) -> usize {
        self.source_population
    }

    /// Order-independent digest of the profiles the tensor was built from.
    pub fn source_hash(&self) -> u64 {
        self.source_hash
    }

    pub fn set_source(&mut self, population: usize, hash: u64) {
        self.source_population = population;
        self.source_hash = hash;
    }

    /// Adds `count` observations of `from → to` at zero-based `slot`.
    pub fn add(&mut self, slot: usize, from: u32, to: u32, count: u64) -> Result<()> {
        if slot >= SLOTS_PER_DAY {
            return Err(Error::domain(format!("slot index {slot} out of range")));
        }
        if from > self.n_max || to > self.n_max {
            return Err(Error::domain(format!("state above n_max {}: {from} -> {to}", self.n_max)));
        }
        if count > 0 {
            *self.slots[slot].entry(from).or_default().entry(to).or_default() += count;
        }
        Ok(())
    }

    pub fn count(&self, slot: usize, from: u32, to: u32) -> u64 {
        self.slots[slot].get(&from).and_then(|r| r.get(&to)).copied().unwrap_or(0)
    }

    pub fn row(&self, slot: usize, from: u32) -> Option<&BTreeMap<u32, u64>> {
        self.slots[slot].get(&from).filter(|r| !r.is_empty())
    }

    /// Nonempty rows of one slot.
    pub fn rows(&self, slot: usize) -> impl Iterator<Item = (u32, &BTreeMap<u32, u64>)> {
        self.slots[slot].iter().map(|(&f, r)| (f, r))
    }

    /// Destination marginal of a slot: `Σ_i m[i][j][slot]`.
    pub fn column_sums(&self, slot: usize) -> BTreeMap<u32, u64> {
        let mut out = BTreeMap::new();
        for row in self.slots[slot].values() {
            for (&to, &c) in row {
                *out.entry(to).or_default() += c;
            }
        }
        out
    }

    pub fn slot_total(&self, slot: usize) -> u64 {
        self.slots[slot].values().flat_map(|r| r.values()).sum()
    }

    /// Adds the counts of a tensor built from a disjoint set of profiles.
    pub fn merge(&mut self, other: &TransitionTensor) -> Result<()> {
        if other.n_max != self.n_max || other.day_type != self.day_type {
            return Err(Error::domain("cannot merge tensors with different n_max or day type"));
        }
        for (slot, rows) in other.slots.iter().enumerate() {
            for (&from, row) in rows {
                for (&to, &c) in row {
                    self.add(slot, from, to, c)?;
                }
            }
        }
        self.source_population += other.source_population;
        self.source_hash = self.source_hash.wrapping_add(other.source_hash);
        Ok(())
    }

    /// `(slot, from, to, count)` with zero-based slot, in sorted order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, u32, u32, u64)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .flat_map(|(k, rows)| rows.iter().flat_map(move |(&f, r)| r.iter().map(move |(&t, &c)| (k, f, t, c))))
    }

    /// Row-normalized raw counts, without smoothing.
    pub fn empirical_probability(&self, slot: usize, from: u32, to: u32) -> Option<f64> {
        let row = self.row(slot, from)?;
        let total: u64 = row.values().sum();
        Some(row.get(&to).copied().unwrap_or(0) as f64 / total as f64)
    }
}

fn profile_hash(p: &DailyProfile, states: &[DemandState]) -> u64 {
    let mut h = fnv1a_extend(rng::fnv1a(p.customer_id.as_bytes()), p.date.to_string().as_bytes());
    for s in states {
        h = fnv1a_extend(h, &s.0.to_le_bytes());
    }
    h
}

/// Counts consecutive-state transitions over `profiles`, all of which must
/// carry `day_type`.
pub fn build_tensor(profiles: &[DailyProfile], day_type: DayType, n_max: u32) -> Result<TransitionTensor> {
    let mut tensor = TransitionTensor::empty(n_max, day_type);
    let mut states: BTreeMap<(&str, chrono::NaiveDate), Vec<DemandState>> = BTreeMap::new();
    for p in profiles {
        if p.day_type != day_type {
            return Err(Error::domain(format!(
                "profile {} {} is a {}, tensor is for {}",
                p.customer_id, p.date, p.day_type, day_type
            )));
        }
        let s = p.states(n_max)?;
        if s.len() != SLOTS_PER_DAY {
            return Err(Error::domain("profile does not have 48 slots"));
        }
        if states.insert((p.customer_id.as_str(), p.date), s).is_some() {
            return Err(Error::domain(format!("duplicate profile {} {}", p.customer_id, p.date)));
        }
    }
    let mut hash = 0u64;
    let mut customers = std::collections::BTreeSet::new();
    for (&(customer, date), day) in &states {
        customers.insert(customer);
        let previous_last = date.pred_opt().and_then(|d| states.get(&(customer, d))).map(|prev| prev[SLOTS_PER_DAY - 1]);
        let first_from = previous_last.unwrap_or(day[0]);
        tensor.add(0, first_from.0, day[0].0, 1)?;
        for k in 1..SLOTS_PER_DAY {
            tensor.add(k, day[k - 1].0, day[k].0, 1)?;
        }
    }
    for p in profiles {
        hash = hash.wrapping_add(profile_hash(p, &states[&(p.customer_id.as_str(), p.date)]));
    }
    tensor.set_source(customers.len(), hash);
    Ok(tensor)
}

/// Gaussian weights by integer state distance, `0..=n_max`.
#[derive(Debug, Clone)]
pub struct GaussianKernel {
    bandwidth: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(bandwidth: f64, n_max: u32) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::domain(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let weights = (0..=n_max)
            .map(|d| {
                let d = f64::from(d);
                (-(d * d) / (2.0 * bandwidth * bandwidth)).exp().max(KERNEL_FLOOR)
            })
            .collect();
        Ok(Self { bandwidth, weights })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n_max(&self) -> u32 {
        (self.weights.len() - 1) as u32
    }

    fn weight(&self, a: u32, b: u32) -> f64 {
        self.weights[a.abs_diff(b) as usize]
    }

    /// Unnormalized smoothed mass at every state.
    fn smooth<I: IntoIterator<Item = (u32, f64)>>(&self, counts: I) -> Vec<f64> {
        let counts: Vec<(u32, f64)> = counts.into_iter().filter(|&(_, c)| c > 0.0).collect();
        (0..=self.n_max()).map(|j| counts.iter().map(|&(js, c)| c * self.weight(j, js)).sum()).collect()
    }
}

/// A probability vector over `0..=n_max` produced by kernel smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedRow {
    pub probabilities: Vec<f64>,
    pub bandwidth: f64,
}

fn check_counts<I: IntoIterator<Item = (u32, f64)>>(counts: I, n_max: u32) -> Result<Vec<(u32, f64)>> {
    let counts: Vec<(u32, f64)> = counts.into_iter().collect();
    for &(j, c) in &counts {
        if j > n_max || !(c >= 0.0) || !c.is_finite() {
            return Err(Error::domain(format!("bad count {c} at state {j}")));
        }
    }
    if !counts.iter().any(|&(_, c)| c > 0.0) {
        return Err(Error::Model("empty row: no positive counts to smooth".into()));
    }
    Ok(counts)
}

/// Smooths sparse row counts into a full probability vector:
/// `p[j] ∝ Σ_{j*} m[j*]·exp(−(j−j*)²/2h²)`, normalized to sum to one.
///
/// An all-zero row returns [`Error::Model`], which callers treat as the
/// empty-row condition.
pub fn kde_row<I: IntoIterator<Item = (u32, f64)>>(counts: I, bandwidth: f64, n_max: u32) -> Result<SmoothedRow> {
    kde_row_with(&GaussianKernel::new(bandwidth, n_max)?, counts)
}

pub fn kde_row_with<I: IntoIterator<Item = (u32, f64)>>(kernel: &GaussianKernel, counts: I) -> Result<SmoothedRow> {
    let counts = check_counts(counts, kernel.n_max())?;
    let mut p = kernel.smooth(counts);
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(SmoothedRow { probabilities: p, bandwidth: kernel.bandwidth })
}

/// The kernel estimate with each state's numerator divided by the kernel
/// mass around it, `Σ_{j*} exp(−(j−j*)²/2h²)`, instead of normalizing the
/// row. It does not sum to one and is not used for sampling.
pub fn kde_row_kernel_normalized<I: IntoIterator<Item = (u32, f64)>>(
    counts: I,
    bandwidth: f64,
    n_max: u32,
) -> Result<Vec<f64>> {
    let kernel = GaussianKernel::new(bandwidth, n_max)?;
    let counts = check_counts(counts, n_max)?;
    let numerator = kernel.smooth(counts);
    Ok(numerator
        .iter()
        .enumerate()
        .map(|(j, &num)| {
            let mass: f64 = (0..=n_max).map(|js| kernel.weight(j as u32, js)).sum();
            num / mass
        })
        .collect())
}

fn as_f64(row: &BTreeMap<u32, u64>) -> impl Iterator<Item = (u32, f64)> + '_ {
    row.iter().map(|(&j, &c)| (j, c as f64))
}

/// Kernel-smoothed distribution of the first state of a day: the slot-1
/// destination marginal.
pub fn initial_distribution(tensor: &TransitionTensor, bandwidth: f64) -> Result<SmoothedRow> {
    let marginal = tensor.column_sums(0);
    if marginal.is_empty() {
        return Err(Error::Model("slot 1 has no observed transitions".into()));
    }
    kde_row(as_f64(&marginal), bandwidth, tensor.n_max)
}

#[derive(Debug, Clone)]
struct RowSampler {
    row: SmoothedRow,
    /// Raw count total behind the row.
    mass: f64,
    dist: WeightedIndex<f64>,
}

impl RowSampler {
    fn new(row: SmoothedRow, mass: f64) -> Result<Self> {
        let dist = WeightedIndex::new(&row.probabilities).map_err(|e| Error::Model(e.to_string()))?;
        Ok(Self { row, mass, dist })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.dist.sample(rng) as u32
    }
}

/// A tensor with every nonempty row smoothed and ready to sample.
///
/// Rows that were never observed fall back to the kernel-smoothed destination
/// marginal of their slot.
#[derive(Debug, Clone)]
pub struct DemandModel {
    tensor: TransitionTensor,
    kernel: GaussianKernel,
    initial: RowSampler,
    rows: Vec<BTreeMap<u32, RowSampler>>,
    fallback: Vec<RowSampler>,
}

impl DemandModel {
    pub fn new(tensor: TransitionTensor, bandwidth: f64) -> Result<Self> {
        let kernel = GaussianKernel::new(bandwidth, tensor.n_max)?;
        let mut fallback = Vec::with_capacity(SLOTS_PER_DAY);
        let mut rows = Vec::with_capacity(SLOTS_PER_DAY);
        for slot in 0..SLOTS_PER_DAY {
            let marginal = tensor.column_sums(slot);
            if marginal.is_empty() {
                return Err(Error::Model(format!("slot {} has no observed transitions", slot + 1)));
            }
            let mass = marginal.values().sum::<u64>() as f64;
            fallback.push(RowSampler::new(kde_row_with(&kernel, as_f64(&marginal))?, mass)?);
            let mut slot_rows = BTreeMap::new();
            for (from, row) in tensor.rows(slot) {
                let mass = row.values().sum::<u64>() as f64;
                slot_rows.insert(from, RowSampler::new(kde_row_with(&kernel, as_f64(row))?, mass)?);
            }
            rows.push(slot_rows);
        }
        let initial = fallback[0].clone();
        Ok(Self { tensor, kernel, initial, rows, fallback })
    }

    pub fn tensor(&self) -> &TransitionTensor {
        &self.tensor
    }

    pub fn n_max(&self) -> u32 {
        self.tensor.n_max
    }

    pub fn bandwidth(&self) -> f64 {
        self.kernel.bandwidth
    }

    pub fn initial_distribution(&self) -> &SmoothedRow {
        &self.initial.row
    }

    fn sampler(&self, slot: usize, from: u32) -> &RowSampler {
        self.rows[slot].get(&from).unwrap_or(&self.fallback[slot])
    }

    /// Sampling distribution for `from` at zero-based `slot`, falling back to
    /// the slot marginal when the row is empty.
    pub fn transition_row(&self, slot: usize, from: u32) -> &SmoothedRow {
        &self.sampler(slot, from).row
    }

    pub fn is_fallback(&self, slot: usize, from: u32) -> bool {
        !self.rows[slot].contains_key(&from)
    }

    /// Draws one 48-slot day.
    pub fn sample_day<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<DemandState> {
        let mut out = Vec::with_capacity(SLOTS_PER_DAY);
        let mut state = self.initial.sample(rng);
        out.push(DemandState(state));
        for slot in 1..SLOTS_PER_DAY {
            state = self.sampler(slot, state).sample(rng);
            out.push(DemandState(state));
        }
        out
    }
}

/// Convenience wrapper: smooths `tensor` and draws one day.
pub fn sample_day<R: Rng + ?Sized>(tensor: &TransitionTensor, bandwidth: f64, rng: &mut R) -> Result<Vec<DemandState>> {
    Ok(DemandModel::new(tensor.clone(), bandwidth)?.sample_day(rng))
}

/// Total Dirichlet concentration for a personalized row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Concentration {
    /// The raw count total of the source row; sparse rows personalize more.
    RowTotal,
    /// A fixed total `c` for every row.
    Scale(f64),
}

/// What the personalized Dirichlet is parametrized by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    /// Kernel-smoothed row probabilities scaled by the concentration.
    #[default]
    Smoothed,
    /// Raw nonzero counts scaled by the concentration. Unobserved states stay
    /// unreachable; empty rows still use the smoothed slot marginal.
    RawCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonalizationConfig {
    pub concentration: Concentration,
    #[serde(default)]
    pub parametrization: Parametrization,
}

impl Default for PersonalizationConfig {
    fn default() -> Self {
        Self { concentration: Concentration::RowTotal, parametrization: Parametrization::Smoothed }
    }
}

/// Draws `ln X` for `X ~ Gamma(shape, 1)`. Shapes below one use
/// `Gamma(shape + 1)·U^(1/shape)` in log space so tiny shapes do not
/// underflow to an all-zero vector.
pub(crate) fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("shape is positive and finite");
        return g.sample(rng).ln();
    }
    let g = Gamma::new(shape + 1.0, 1.0).expect("shape is positive and finite");
    let u: f64 = rng.random::<f64>();
    g.sample(rng).ln() + u.max(f64::MIN_POSITIVE).ln() / shape
}

/// A Dirichlet draw with parameters `alpha`, via normalized Gamma variates.
pub(crate) fn dirichlet_draw<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    if alpha.len() == 1 {
        return vec![1.0];
    }
    let logs: Vec<f64> = alpha.iter().map(|&a| ln_gamma_draw(a, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut q: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = q.iter().sum();
    for v in &mut q {
        *v /= total;
    }
    q
}

/// One urn: pseudo-counts over a support of states.
#[derive(Debug, Clone)]
struct UrnRow {
    states: Vec<u32>,
    pseudo_counts: Vec<f64>,
    mass: f64,
    dist: WeightedIndex<f64>,
}

impl UrnRow {
    fn new(states: Vec<u32>, pseudo_counts: Vec<f64>) -> Result<Self> {
        let mass = pseudo_counts.iter().sum();
        let dist = WeightedIndex::new(&pseudo_counts).map_err(|e| Error::Model(e.to_string()))?;
        Ok(Self { states, pseudo_counts, mass, dist })
    }

    fn probabilities(&self, n_max: u32) -> Vec<f64> {
        let mut p = vec![0.0; n_max as usize + 1];
        for (&s, &c) in self.states.iter().zip(&self.pseudo_counts) {
            p[s as usize] += c / self.mass;
        }
        p
    }
}

const INITIAL_KEY: u32 = u32::MAX;

/// A prosumer-specific copy of a [`DemandModel`].
///
/// Rows are drawn lazily the first time they are visited, each from its own
/// substream of the prosumer seed, so the draw for a row does not depend on
/// the order in which rows are visited.
#[derive(Debug, Clone)]
pub struct PersonalizedChain {
    model: Arc<DemandModel>,
    prosumer_id: String,
    seed: u64,
    config: PersonalizationConfig,
    rows: HashMap<(usize, u32), UrnRow>,
}

/// Personalizes `model` for one prosumer. Rows depend on both the seed and
/// the prosumer id, so one seed personalizes a whole population.
pub fn personalize(
    model: Arc<DemandModel>,
    prosumer_id: impl Into<String>,
    config: PersonalizationConfig,
    seed: u64,
) -> Result<PersonalizedChain> {
    if let Concentration::Scale(c) = config.concentration {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::domain(format!("concentration must be positive, got {c}")));
        }
    }
    Ok(PersonalizedChain { model, prosumer_id: prosumer_id.into(), seed, config, rows: HashMap::new() })
}

impl PersonalizedChain {
    pub fn prosumer_id(&self) -> &str {
        &self.prosumer_id
    }

    pub fn model(&self) -> &DemandModel {
        &self.model
    }

    fn draw_row(&self, slot: usize, from: u32) -> Result<UrnRow> {
        let n_max = self.model.n_max();
        let (base, raw) = if from == INITIAL_KEY {
            (&self.model.initial, Some(self.model.tensor.column_sums(0)))
        } else if let Some(row) = self.model.tensor.row(slot, from) {
            (self.model.sampler(slot, from), Some(row.clone()))
        } else {
            (&self.model.fallback[slot], None)
        };
        let c = match self.config.concentration {
            Concentration::RowTotal => base.mass,
            Concentration::Scale(c) => c,
        };
        let stream = if from == INITIAL_KEY { u64::MAX } else { slot as u64 * (u64::from(n_max) + 1) + u64::from(from) };
        let mut rng = rng::substream(self.seed, &format!("personal-row/{}", self.prosumer_id), stream);
        let (states, alpha): (Vec<u32>, Vec<f64>) = match (self.config.parametrization, raw) {
            (Parametrization::RawCounts, Some(raw)) => {
                let total = raw.values().sum::<u64>() as f64;
                raw.iter().map(|(&s, &n)| (s, c * n as f64 / total)).unzip()
            }
            _ => base.row.probabilities.iter().enumerate().map(|(s, &p)| (s as u32, c * p)).unzip(),
        };
        let q = dirichlet_draw(&alpha, &mut rng);
        UrnRow::new(states, q.iter().map(|&v| v * c).collect())
    }

    fn urn(&mut self, slot: usize, from: u32) -> Result<&UrnRow> {
        let key = (slot, from);
        if !self.rows.contains_key(&key) {
            let row = self.draw_row(slot, from)?;
            self.rows.insert(key, row);
        }
        Ok(&self.rows[&key])
    }

    /// Personalized probabilities for `from` at zero-based `slot`.
    pub fn row_probabilities(&mut self, slot: usize, from: u32) -> Result<Vec<f64>> {
        let n_max = self.model.n_max();
        Ok(self.urn(slot, from)?.probabilities(n_max))
    }

    pub fn initial_probabilities(&mut self) -> Result<Vec<f64>> {
        self.row_probabilities(0, INITIAL_KEY)
    }
}

#[derive(Debug, Default)]
struct Reinforcement {
    total: f64,
    added: Vec<(u32, f64)>,
}

impl Reinforcement {
    fn add(&mut self, state: u32, w: f64) {
        self.total += w;
        match self.added.iter_mut().find(|(s, _)| *s == state) {
            Some((_, v)) => *v += w,
            None => self.added.push((state, w)),
        }
    }

    fn pick(&self, mut u: f64) -> u32 {
        for &(s, v) in &self.added {
            if u < v {
                return s;
            }
            u -= v;
        }
        self.added.last().expect("nonempty reinforcement").0
    }
}

/// Samples `days × 48` consecutive states from a personalized chain.
///
/// Day 1 starts from the personalized initial distribution; later days start
/// from the slot-1 row of the previous day's last state. After every draw the
/// sampled transition gains `w` pseudo-counts in its row, so transitions taken
/// before become likelier. The urn is private to this call.
pub fn sample_multiday<R: Rng + ?Sized>(
    chain: &mut PersonalizedChain,
    days: usize,
    w: f64,
    rng: &mut R,
) -> Result<Vec<DemandState>> {
    if days == 0 {
        return Err(Error::domain("days must be at least 1"));
    }
    if !(w >= 0.0) || !w.is_finite() {
        return Err(Error::domain(format!("reinforcement weight must be nonnegative, got {w}")));
    }
    let mut urn: HashMap<(usize, u32), Reinforcement> = HashMap::new();
    let mut out = Vec::with_capacity(days * SLOTS_PER_DAY);
    let mut previous: Option<u32> = None;
    for _ in 0..days {
        for slot in 0..SLOTS_PER_DAY {
            let key = (slot, previous.unwrap_or(INITIAL_KEY));
            let base = chain.urn(key.0, key.1)?;
            let extra = urn.entry(key).or_default();
            let u = rng.random::<f64>() * (base.mass + extra.total);
            let next = if u < base.mass || extra.total == 0.0 {
                base.states[base.dist.sample(rng)]
            } else {
                extra.pick(u - base.mass)
            };
            if w > 0.0 {
                extra.add(next, w);
            }
            out.push(DemandState(next));
            previous = Some(next);
        }
    }
    Ok(out)
}
