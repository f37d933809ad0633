//! Univariate clustering of continuous customer features.
//!
//! [`kmeans`] is plain Lloyd iteration from given initial means. [`map_dp`]
//! is MAP inference for a Dirichlet-process mixture of Gaussians: points are
//! visited in input order and moved to whichever existing cluster, or a new
//! one, has the lowest negative log posterior predictive plus CRP cost. No
//! cluster count is fixed in advance; the concentration `α` sets how readily
//! new clusters open.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub mean: f64,
    /// Population variance of the member points.
    pub variance: f64,
    pub population: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub clusters: Vec<Cluster>,
    pub total_population: usize,
}

impl ClusterModel {
    pub fn new(clusters: Vec<Cluster>) -> Result<Self> {
        if clusters.is_empty() {
            return Err(Error::domain("a cluster model needs at least one cluster"));
        }
        if clusters.iter().any(|c| !(c.variance >= 0.0) || c.population == 0) {
            return Err(Error::domain("clusters need nonnegative variance and positive population"));
        }
        let total_population = clusters.iter().map(|c| c.population).sum();
        Ok(Self { clusters, total_population })
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    /// Index of the most populous cluster (earliest on ties).
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.clusters.iter().enumerate() {
            if c.population > self.clusters[best].population {
                best = i;
            }
        }
        best
    }

    /// Summaries computed from points and their labels `0..k`.
    fn from_labels(points: &[f64], labels: &[usize], k: usize) -> Result<Self> {
        let mut stats = vec![Moments::default(); k];
        for (&x, &l) in points.iter().zip(labels) {
            stats[l].push(x);
        }
        ClusterModel::new(stats.iter().filter(|s| s.n > 0).map(Moments::cluster).collect())
    }

    /// Label of the nearest cluster mean for `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, c) in self.clusters.iter().enumerate() {
            if (x - c.mean).abs() < (x - self.clusters[best].mean).abs() {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn pop(&mut self, x: f64) {
        self.n -= 1;
        self.sum -= x;
        self.sum_sq -= x * x;
        if self.n == 0 {
            self.sum = 0.0;
            self.sum_sq = 0.0;
        }
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn variance(&self) -> f64 {
        let m = self.mean();
        (self.sum_sq / self.n as f64 - m * m).max(0.0)
    }

    fn cluster(&self) -> Cluster {
        Cluster { mean: self.mean(), variance: self.variance(), population: self.n }
    }
}

/// Result of a clustering run plus fitting metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterFit {
    pub model: ClusterModel,
    /// Cluster index per input point, matching `model.clusters`.
    pub labels: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Within-cluster sum of absolute deviations from the cluster mean.
    pub error: f64,
    /// MAP-DP objective after each sweep (empty for k-means).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

fn check_points(points: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::domain("no points to cluster"));
    }
    if let Some(x) = points.iter().find(|x| !x.is_finite()) {
        return Err(Error::domain(format!("non-finite point {x}")));
    }
    Ok(())
}

fn absolute_deviation(points: &[f64], labels: &[usize], model: &ClusterModel) -> f64 {
    points.iter().zip(labels).map(|(x, &l)| (x - model.clusters[l].mean).abs()).sum()
}

/// Renumbers labels in order of first appearance and drops gaps.
fn compact(labels: &mut [usize]) -> usize {
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut next = 0;
    for l in labels.iter_mut() {
        if *l >= map.len() {
            map.resize(*l + 1, None);
        }
        *l = *map[*l].get_or_insert_with(|| {
            next += 1;
            next - 1
        });
    }
    next
}

/// Lloyd's algorithm in one dimension.
///
/// An emptied cluster is reseeded at the point farthest from its current
/// centroid (lowest index on ties).
pub fn kmeans(points: &[f64], k: usize, init_means: &[f64], max_iter: usize) -> Result<ClusterFit> {
    check_points(points)?;
    if k == 0 || k > points.len() {
        return Err(Error::domain(format!("k = {k} must be in 1..={}", points.len())));
    }
    if init_means.len() != k {
        return Err(Error::domain(format!("{} initial means for k = {k}", init_means.len())));
    }
    let mut means = init_means.to_vec();
    let mut labels = vec![usize::MAX; points.len()];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        for (i, &x) in points.iter().enumerate() {
            let mut best = 0;
            for c in 1..k {
                if (x - means[c]).abs() < (x - means[best]).abs() {
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        let mut stats = vec![Moments::default(); k];
        for (&x, &l) in points.iter().zip(&labels) {
            stats[l].push(x);
        }
        for c in 0..k {
            if stats[c].n == 0 {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = (points[a] - means[labels[a]]).abs();
                        let db = (points[b] - means[labels[b]]).abs();
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("points nonempty");
                stats[labels[far]].pop(points[far]);
                labels[far] = c;
                stats[c].push(points[far]);
                changed = true;
            }
        }
        for c in 0..k {
            if stats[c].n > 0 {
                means[c] = stats[c].mean();
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    let mut stats = vec![Moments::default(); k];
    for (&x, &l) in points.iter().zip(&labels) {
        stats[l].push(x);
    }
    let model = ClusterModel::new(stats.iter().map(Moments::cluster).collect())?;
    let error = absolute_deviation(points, &labels, &model);
    Ok(ClusterFit { model, labels, iterations, converged, error, objective_trace: Vec::new() })
}

/// How [`map_dp`] treats within-cluster variance while fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// Running sample variance of the cluster, floored at
    /// `new_cluster_variance`.
    #[default]
    Floored,
    /// Every cluster uses `new_cluster_variance`; the model is then exactly
    /// conjugate.
    Fixed,
}

/// Default within-cluster variance for a new cluster.
pub const DEFAULT_NEW_CLUSTER_VARIANCE: f64 = 0.05;

/// Priors for [`map_dp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapDpPrior {
    /// Prior mean of a cluster location.
    pub prior_mean: f64,
    /// Prior variance of a cluster location.
    pub prior_variance: f64,
    /// Within-cluster variance assumed for a new cluster; also the floor on
    /// the running variance of existing clusters during fitting.
    pub new_cluster_variance: f64,
    /// Dirichlet-process concentration `α`.
    pub alpha: f64,
    #[serde(default)]
    pub variance_mode: VarianceMode,
}

impl MapDpPrior {
    /// Prior from the sample mean and variance of the data, with the default
    /// new-cluster variance and the floored variance mode.
    pub fn naive(prior_mean: f64, prior_variance: f64, alpha: f64) -> Self {
        Self {
            prior_mean,
            prior_variance,
            new_cluster_variance: DEFAULT_NEW_CLUSTER_VARIANCE,
            alpha,
            variance_mode: VarianceMode::Floored,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.prior_mean.is_finite()
            && self.prior_variance > 0.0
            && self.new_cluster_variance > 0.0
            && self.alpha > 0.0
            && self.prior_variance.is_finite()
            && self.new_cluster_variance.is_finite()
            && self.alpha.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid MAP-DP prior {self:?}")))
        }
    }

    fn cluster_variance(&self, m: &Moments) -> f64 {
        match self.variance_mode {
            VarianceMode::Floored if m.n > 0 => m.variance().max(self.new_cluster_variance),
            _ => self.new_cluster_variance,
        }
    }
}

/// Negative log marginal likelihood of a cluster's points with the mean
/// integrated out, with the cluster variance taken from `variance_of`.
fn cluster_cost(m: &Moments, variance_of: &Moments, prior: &MapDpPrior) -> f64 {
    let n = m.n as f64;
    let (s2, t2) = (prior.cluster_variance(variance_of), prior.prior_variance);
    let scatter = (m.sum_sq - m.sum * m.sum / n).max(0.0);
    0.5 * n * (2.0 * PI * s2).ln()
        + 0.5 * (1.0 + n * t2 / s2).ln()
        + scatter / (2.0 * s2)
        + n * (m.mean() - prior.prior_mean).powi(2) / (2.0 * (s2 + n * t2))
}

/// Cost of seating `x` in a cluster with moments `m` (a new cluster when
/// empty): the change in the cluster's negative log marginal likelihood, each
/// side with its own (floored) variance. With a fixed variance this is the
/// negative log posterior predictive of `x`. Either way every reseat is an
/// exact coordinate step on [`map_dp_objective`], so sweeps never raise it.
fn seat_cost(x: f64, m: &Moments, prior: &MapDpPrior) -> f64 {
    let mut with = *m;
    with.push(x);
    let before = if m.n == 0 { 0.0 } else { cluster_cost(m, m, prior) };
    cluster_cost(&with, &with, prior) - before
}

fn ln_gamma_count(n: usize) -> f64 {
    (1..n).map(|i| (i as f64).ln()).sum()
}

/// Negative log joint of the data and the partition, up to a constant:
/// `Σ_k [−ln p(x_k) − ln α − ln (N_k − 1)!]`.
fn map_dp_objective(stats: &[Moments], prior: &MapDpPrior) -> f64 {
    stats
        .iter()
        .filter(|m| m.n > 0)
        .map(|m| cluster_cost(m, m, prior) - prior.alpha.ln() - ln_gamma_count(m.n))
        .sum()
}

fn cheapest_cluster(x: f64, stats: &[Moments], prior: &MapDpPrior) -> Option<usize> {
    let mut best = None;
    let mut best_cost = -prior.alpha.ln() + seat_cost(x, &Moments::default(), prior);
    for (k, m) in stats.iter().enumerate().filter(|(_, m)| m.n > 0) {
        let cost = -(m.n as f64).ln() + seat_cost(x, m, prior);
        if cost <= best_cost {
            best_cost = cost;
            best = Some(k);
        }
    }
    best
}

fn place(x: f64, stats: &mut Vec<Moments>, prior: &MapDpPrior) -> usize {
    let k = cheapest_cluster(x, stats, prior).unwrap_or_else(|| match stats.iter().position(|m| m.n == 0) {
        Some(empty) => empty,
        None => {
            stats.push(Moments::default());
            stats.len() - 1
        }
    });
    stats[k].push(x);
    k
}

/// Where a MAP-DP run starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapDpStart {
    /// Every point in one cluster.
    Single,
    /// Points seated in input order, each at the cheapest of the clusters
    /// opened so far or a new one.
    Sequential,
}

/// MAP-DP clustering from both starts, keeping the fit with the lower final
/// objective (the single-cluster start on ties).
///
/// Neither start dominates: from a single cluster, widely separated groups
/// stay merged because the running variance covers them all; from sequential
/// seating, a large `α` can leave the data stuck in many tiny clusters.
pub fn map_dp(points: &[f64], prior: &MapDpPrior, max_iter: usize) -> Result<ClusterFit> {
    let single = map_dp_from(points, prior, max_iter, MapDpStart::Single)?;
    let sequential = map_dp_from(points, prior, max_iter, MapDpStart::Sequential)?;
    let last = |f: &ClusterFit| *f.objective_trace.last().expect("trace nonempty");
    Ok(if last(&sequential) < last(&single) { sequential } else { single })
}

/// One MAP-DP run. Each sweep removes every point from its cluster in input
/// order and reseats it: an existing cluster `k` costs
/// `−ln N_k + (−ln predictive)`, a new cluster `−ln α + (−ln prior
/// predictive)`, with existing clusters favored on ties. Reported variances
/// are the raw cluster variances.
pub fn map_dp_from(points: &[f64], prior: &MapDpPrior, max_iter: usize, start: MapDpStart) -> Result<ClusterFit> {
    check_points(points)?;
    prior.validate()?;
    let mut stats: Vec<Moments> = Vec::new();
    let mut labels: Vec<usize> = match start {
        MapDpStart::Single => {
            let mut all = Moments::default();
            points.iter().for_each(|&x| all.push(x));
            stats.push(all);
            vec![0; points.len()]
        }
        MapDpStart::Sequential => points.iter().map(|&x| place(x, &mut stats, prior)).collect(),
    };
    let mut objective_trace = vec![map_dp_objective(&stats, prior)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        for (i, &x) in points.iter().enumerate() {
            let old = labels[i];
            stats[old].pop(x);
            let new = place(x, &mut stats, prior);
            if new != old {
                labels[i] = new;
                changed = true;
            }
        }
        objective_trace.push(map_dp_objective(&stats, prior));
        if !changed {
            converged = true;
            break;
        }
    }
    let k = compact(&mut labels);
    let model = ClusterModel::from_labels(points, &labels, k)?;
    let error = absolute_deviation(points, &labels, &model);
    Ok(ClusterFit { model, labels, iterations, converged, error, objective_trace })
}

/// Which mixture formula [`gmm_pdf`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureForm {
    /// `Σ n_i·N(x; x̄_i, s_i) / Σ n_i`, a proper density when all variances
    /// are positive.
    #[default]
    PopulationWeighted,
    /// `Σ (2π s_i²)^(-1/2)·exp(−(x−x̄_i)²/2s_i²) / Σ n_i` with `s_i` the
    /// reported variance, unweighted by population. Kept for comparison with
    /// published figures; it does not integrate to one.
    UnweightedLiteral,
}

/// Mixture density at `x`. Zero-variance clusters are point masses and are
/// left out of the smooth density (their share of the population is still in
/// the denominator); see [`dirac_components`].
pub fn gmm_pdf(model: &ClusterModel, x: f64, form: MixtureForm) -> f64 {
    let total = model.total_population as f64;
    model
        .clusters
        .iter()
        .filter(|c| c.variance > 0.0)
        .map(|c| match form {
            MixtureForm::PopulationWeighted => {
                c.population as f64 * (-(x - c.mean).powi(2) / (2.0 * c.variance)).exp()
                    / (2.0 * PI * c.variance).sqrt()
            }
            MixtureForm::UnweightedLiteral => {
                let s2 = c.variance * c.variance;
                (-(x - c.mean).powi(2) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt()
            }
        })
        .sum::<f64>()
        / total
}

/// Indices of zero-variance clusters, which [`gmm_pdf`] treats as point masses.
pub fn dirac_components(model: &ClusterModel) -> Vec<usize> {
    model.clusters.iter().enumerate().filter(|(_, c)| c.variance == 0.0).map(|(i, _)| i).collect()
}

/// Draws `population` points from each cluster's Gaussian (exact copies of
/// the mean for zero-variance clusters), in shuffled order.
pub fn resample_mixture<R: Rng + ?Sized>(model: &ClusterModel, rng: &mut R) -> Vec<f64> {
    let mut points = Vec::with_capacity(model.total_population);
    for c in &model.clusters {
        let normal = Normal::new(c.mean, c.variance.sqrt()).expect("finite cluster moments");
        points.extend((0..c.population).map(|_| normal.sample(rng)));
    }
    points.shuffle(rng);
    points
}

/// Dirichlet concentration vector: the cluster populations.
pub fn cluster_counts(model: &ClusterModel) -> Vec<f64> {
    model.clusters.iter().map(|c| c.population as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum FitMethod {
    Kmeans { k: usize },
    MapDp(MapDpPrior),
}

/// JSON form of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModelFile {
    pub clusters: Vec<Cluster>,
    pub total_population: usize,
    pub method: FitMethod,
    pub alpha: Vec<f64>,
    pub alpha0: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: f64,
}

impl ClusterModelFile {
    pub fn new(fit: &ClusterFit, method: FitMethod) -> Self {
        let alpha = cluster_counts(&fit.model);
        Self {
            clusters: fit.model.clusters.clone(),
            total_population: fit.model.total_population,
            method,
            alpha0: alpha.iter().sum(),
            alpha,
            iterations: fit.iterations,
            converged: fit.converged,
            error: fit.error,
        }
    }

    pub fn model(&self) -> Result<ClusterModel> {
        ClusterModel::new(self.clusters.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    pub(crate) fn table_one() -> ClusterModel {
        ClusterModel::new(vec![
            Cluster { mean: 0.6368, variance: 0.0338, population: 165 },
            Cluster { mean: 1.3293, variance: 0.0104, population: 20 },
            Cluster { mean: 1.8843, variance: 0.016, population: 3 },
            Cluster { mean: 4.3960, variance: 0.0, population: 1 },
        ])
        .unwrap()
    }

    const PRIOR: MapDpPrior =
        MapDpPrior {
        prior_mean: 0.7428,
        prior_variance: 0.17,
        new_cluster_variance: 0.01,
        alpha: 9.0,
        variance_mode: VarianceMode::Floored,
    };

    #[test]
    fn kmeans_separable() {
        let fit = kmeans(&[0.0, 0.0, 10.0, 10.0], 2, &[0.0, 10.0], 50).unwrap();
        assert_eq!(fit.model.clusters[0], Cluster { mean: 0.0, variance: 0.0, population: 2 });
        assert_eq!(fit.model.clusters[1], Cluster { mean: 10.0, variance: 0.0, population: 2 });
        assert_eq!(fit.error, 0.0);
        assert!(fit.converged);
    }

    #[test]
    fn kmeans_single_cluster_is_sample_mean() {
        let pts = [1.0, 2.0, 6.0];
        let fit = kmeans(&pts, 1, &[100.0], 10).unwrap();
        assert_relative_eq!(fit.model.clusters[0].mean, 3.0);
        assert_eq!(fit.model.clusters[0].population, 3);
    }

    #[test]
    fn kmeans_reseeds_empty_cluster() {
        let fit = kmeans(&[0.0, 0.1, 0.2, 9.0], 2, &[0.1, 100.0], 20).unwrap();
        assert_eq!(fit.model.clusters.iter().map(|c| c.population).collect::<Vec<_>>(), vec![3, 1]);
        assert_relative_eq!(fit.model.clusters[1].mean, 9.0);
    }

    #[test]
    fn kmeans_argument_errors() {
        assert!(kmeans(&[1.0], 2, &[0.0, 1.0], 5).is_err());
        assert!(kmeans(&[1.0, 2.0], 2, &[0.0], 5).is_err());
        assert!(kmeans(&[], 1, &[0.0], 5).is_err());
    }

    proptest! {
        #[test]
        fn kmeans_on_distinct_points_has_zero_error(mut pts in proptest::collection::btree_set(-1000i32..1000, 1..8)) {
            let pts: Vec<f64> = std::mem::take(&mut pts).into_iter().map(f64::from).collect();
            let fit = kmeans(&pts, pts.len(), &pts, 10).unwrap();
            prop_assert_eq!(fit.error, 0.0);
            prop_assert_eq!(fit.model.total_population, pts.len());
        }
    }

    #[test]
    fn map_dp_identical_points() {
        let fit = map_dp(&[0.5; 20], &PRIOR, 50).unwrap();
        assert_eq!(fit.model.k(), 1);
        assert_eq!(fit.model.clusters[0].variance, 0.0);
        assert_eq!(fit.model.total_population, 20);
    }

    #[test]
    fn map_dp_two_far_blobs() {
        let mut pts: Vec<f64> = (0..30).map(|i| 0.5 + 0.001 * f64::from(i % 7)).collect();
        pts.extend((0..30).map(|i| 8.0 + 0.001 * f64::from(i % 5)));
        for alpha in [0.1, 1.0, 9.0] {
            let fit = map_dp(&pts, &MapDpPrior { alpha, prior_variance: 10.0, ..PRIOR }, 100).unwrap();
            assert_eq!(fit.model.k(), 2, "alpha {alpha}");
        }
    }

    #[test]
    fn two_far_blobs_need_the_sequential_start() {
        let mut pts: Vec<f64> = (0..30).map(|i| 0.5 + 0.001 * f64::from(i % 7)).collect();
        pts.extend((0..30).map(|i| 8.0 + 0.001 * f64::from(i % 5)));
        let prior = MapDpPrior { prior_variance: 10.0, ..PRIOR };
        assert_eq!(map_dp_from(&pts, &prior, 100, MapDpStart::Single).unwrap().model.k(), 1);
        assert_eq!(map_dp_from(&pts, &prior, 100, MapDpStart::Sequential).unwrap().model.k(), 2);
    }

    #[test]
    fn fixed_variance_splits_wide_clusters() {
        let pts: Vec<f64> = (0..40).map(|i| f64::from(i) * 0.05).collect();
        let fixed = MapDpPrior { new_cluster_variance: 0.001, variance_mode: VarianceMode::Fixed, ..PRIOR };
        assert!(map_dp(&pts, &fixed, 100).unwrap().model.k() > 1);
        assert_eq!(map_dp(&pts, &MapDpPrior { prior_variance: 1.0, new_cluster_variance: 0.5, ..fixed }, 100).unwrap().model.k(), 1);
    }

    proptest! {
        #[test]
        fn map_dp_objective_never_increases(
            pts in proptest::collection::vec(-2.0f64..4.0, 1..60),
            alpha in 0.1f64..20.0,
            fixed in any::<bool>(),
        ) {
            let variance_mode = if fixed { VarianceMode::Fixed } else { VarianceMode::Floored };
            let prior = MapDpPrior { alpha, variance_mode, ..PRIOR };
            for start in [MapDpStart::Single, MapDpStart::Sequential] {
                let fit = map_dp_from(&pts, &prior, 50, start).unwrap();
                for w in fit.objective_trace.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", fit.objective_trace);
                }
                prop_assert_eq!(fit.model.total_population, pts.len());
                prop_assert_eq!(fit.labels.len(), pts.len());
            }
        }
    }

    #[test]
    fn map_dp_rejects_bad_input() {
        assert!(map_dp(&[1.0, f64::NAN], &PRIOR, 10).is_err());
        assert!(map_dp(&[1.0], &MapDpPrior { alpha: 0.0, ..PRIOR }, 10).is_err());
        assert!(map_dp(&[1.0], &MapDpPrior { prior_variance: -1.0, ..PRIOR }, 10).is_err());
    }

    #[test]
    fn gmm_standard_normal_peak() {
        let m = ClusterModel::new(vec![Cluster { mean: 0.0, variance: 1.0, population: 4 }]).unwrap();
        assert_relative_eq!(gmm_pdf(&m, 0.0, MixtureForm::PopulationWeighted), 0.398_942_280_4, epsilon = 1e-9);
    }

    #[test]
    fn gmm_symmetric_pair() {
        let m = ClusterModel::new(vec![
            Cluster { mean: -1.0, variance: 0.3, population: 5 },
            Cluster { mean: 3.0, variance: 0.3, population: 5 },
        ])
        .unwrap();
        for d in [0.0, 0.4, 1.7, 3.0] {
            assert_relative_eq!(
                gmm_pdf(&m, 1.0 - d, MixtureForm::PopulationWeighted),
                gmm_pdf(&m, 1.0 + d, MixtureForm::PopulationWeighted),
                max_relative = 1e-12
            );
        }
    }

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..=n).map(|i| f(lo + i as f64 * h) * if i == 0 || i == n { 0.5 } else { 1.0 }).sum::<f64>() * h
    }

    #[test]
    fn weighted_mixture_integrates_to_one() {
        let mut m = table_one();
        m.clusters[3].variance = 0.02;
        let area = trapezoid(|x| gmm_pdf(&m, x, MixtureForm::PopulationWeighted), -2.0, 7.0, 90_000);
        assert!((area - 1.0).abs() < 1e-3, "{area}");
        // the unweighted form does not integrate to one for unequal populations
        let lit = trapezoid(|x| gmm_pdf(&m, x, MixtureForm::UnweightedLiteral), -2.0, 7.0, 90_000);
        assert!((lit - 1.0).abs() > 0.5);
    }

    #[test]
    fn dirac_components_flagged() {
        let m = table_one();
        assert_eq!(dirac_components(&m), vec![3]);
        let area = trapezoid(|x| gmm_pdf(&m, x, MixtureForm::PopulationWeighted), -2.0, 7.0, 90_000);
        assert_relative_eq!(area, 188.0 / 189.0, epsilon = 1e-3);
    }

    #[test]
    fn cluster_counts_examples() {
        let alpha = cluster_counts(&table_one());
        assert_eq!(alpha, vec![165.0, 20.0, 3.0, 1.0]);
        assert_eq!(alpha.iter().sum::<f64>(), 189.0);
        let single = ClusterModel::new(vec![Cluster { mean: 2.0, variance: 0.1, population: 5 }]).unwrap();
        assert_eq!(cluster_counts(&single), vec![5.0]);
        let mut reversed = table_one();
        reversed.clusters.reverse();
        let mut expected = alpha.clone();
        expected.reverse();
        assert_eq!(cluster_counts(&reversed), expected);
    }

    #[test]
    fn cluster_file_round_trip() {
        let fit = kmeans(&[0.0, 0.0, 10.0, 10.0], 2, &[0.0, 10.0], 50).unwrap();
        let file = ClusterModelFile::new(&fit, FitMethod::Kmeans { k: 2 });
        let json = serde_json::to_string(&file).unwrap();
        let back: ClusterModelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.alpha0, 4.0);
        let mapdp = serde_json::to_string(&FitMethod::MapDp(PRIOR)).unwrap();
        assert!(mapdp.contains("\"method\":\"map_dp\""));
    }
}
