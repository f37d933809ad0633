//! Dirichlet-categorical feature assignment for unobserved prosumers.
//!
//! Observed category counts of each feature parametrize a Dirichlet. One
//! draw from it gives the category probabilities for the unobserved
//! population, a multinomial draw turns those into counts, and the counts are
//! dealt out to prosumers by a random permutation. Features are independent.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::demand_chain::dirichlet_draw;
use crate::rng;
use crate::{Error, Result};

/// Concentration given to categories never observed.
pub const ZERO_COUNT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletFeatureModel {
    pub feature_id: String,
    pub alpha: Vec<f64>,
}

impl DirichletFeatureModel {
    pub fn new(feature_id: impl Into<String>, alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::domain("a feature needs at least one category"));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::domain(format!("Dirichlet parameters must be positive, got {a}")));
        }
        Ok(Self { feature_id: feature_id.into(), alpha })
    }

    pub fn categories(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Analytic mean of component `k`.
    pub fn mean(&self, k: usize) -> f64 {
        self.alpha[k] / self.alpha0()
    }

    /// Analytic variance of component `k`.
    pub fn variance(&self, k: usize) -> f64 {
        let a0 = self.alpha0();
        self.alpha[k] * (a0 - self.alpha[k]) / (a0 * a0 * (a0 + 1.0))
    }
}

/// Counts labels into a model; categories with no label get
/// [`ZERO_COUNT_FLOOR`].
pub fn alpha_from_labels(feature_id: impl Into<String>, labels: &[usize], categories: usize) -> Result<DirichletFeatureModel> {
    if labels.is_empty() {
        return Err(Error::domain("no labels to count"));
    }
    let mut alpha = vec![0.0; categories];
    for &l in labels {
        *alpha
            .get_mut(l)
            .ok_or_else(|| Error::domain(format!("label {l} outside {categories} categories")))? += 1.0;
    }
    for a in &mut alpha {
        if *a == 0.0 {
            *a = ZERO_COUNT_FLOOR;
        }
    }
    DirichletFeatureModel::new(feature_id, alpha)
}

/// Draws a probability vector `q ~ Dir(α)`.
pub fn dirichlet_sample<R: Rng + ?Sized>(model: &DirichletFeatureModel, rng: &mut R) -> Vec<f64> {
    dirichlet_draw(&model.alpha, rng)
}

/// Draws `A* ~ Multinomial(n_star, q)` by sequential conditional binomials.
pub fn categorical_counts<R: Rng + ?Sized>(q: &[f64], n_star: u64, rng: &mut R) -> Result<Vec<u64>> {
    if q.is_empty() || q.iter().any(|p| !(*p >= 0.0)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::domain("q must be a probability vector"));
    }
    let mut counts = vec![0u64; q.len()];
    let mut remaining = n_star;
    let mut mass = 1.0;
    for (k, &p) in q.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == q.len() - 1 {
            counts[k] = remaining;
            break;
        }
        let conditional = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, conditional).map_err(|e| Error::domain(e.to_string()))?.sample(rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(counts)
}

/// Feature categories of one prosumer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureAssignment {
    pub prosumer_id: String,
    pub features: BTreeMap<String, usize>,
}

/// Deals the per-feature counts out to `prosumers`.
///
/// Each feature shuffles its count-expanded category list on its own
/// substream of `seed`, so features are independent and adding one does not
/// change the others.
pub fn assign_features(
    counts: &FeatureCounts,
    prosumers: &[String],
    seed: u64,
) -> Result<Vec<FeatureAssignment>> {
    let mut out: Vec<FeatureAssignment> = prosumers
        .iter()
        .map(|p| FeatureAssignment { prosumer_id: p.clone(), features: BTreeMap::new() })
        .collect();
    for (feature, per_category) in counts {
        let total: u64 = per_category.iter().sum();
        if total != prosumers.len() as u64 {
            return Err(Error::domain(format!(
                "feature {feature}: counts sum to {total} but there are {} prosumers",
                prosumers.len()
            )));
        }
        let mut deck: Vec<usize> =
            per_category.iter().enumerate().flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize)).collect();
        let mut rng = rng::substream(seed, &format!("assign/{feature}"), 0);
        deck.shuffle(&mut rng);
        for (a, k) in out.iter_mut().zip(deck) {
            a.features.insert(feature.clone(), k);
        }
    }
    Ok(out)
}

/// Category counts per feature id.
pub type FeatureCounts = BTreeMap<String, Vec<u64>>;

/// End-to-end assignment for a population: one Dirichlet draw and one
/// multinomial draw per feature, then [`assign_features`].
pub fn sample_population(
    models: &[DirichletFeatureModel],
    prosumers: &[String],
    seed: u64,
) -> Result<(FeatureCounts, Vec<FeatureAssignment>)> {
    let mut counts = BTreeMap::new();
    for m in models {
        let mut rng = rng::substream(seed, &format!("dirichlet/{}", m.feature_id), 0);
        let q = dirichlet_sample(m, &mut rng);
        counts.insert(m.feature_id.clone(), categorical_counts(&q, prosumers.len() as u64, &mut rng)?);
    }
    let assignments = assign_features(&counts, prosumers, seed)?;
    Ok((counts, assignments))
}

/// Writes assignments as `prosumer_id,feature_id,category` rows.
pub fn write_assignments_csv<W: Write>(assignments: &[FeatureAssignment], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["prosumer_id", "feature_id", "category"])?;
    for a in assignments {
        for (f, k) in &a.features {
            w.write_record([a.prosumer_id.as_str(), f.as_str(), &k.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_assignments_csv<R: std::io::Read>(source: R) -> Result<Vec<FeatureAssignment>> {
    let mut r = csv::Reader::from_reader(source);
    let mut by_id: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut order = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let (id, f, k) = (rec.get(0).unwrap_or(""), rec.get(1).unwrap_or(""), rec.get(2).unwrap_or(""));
        let k: usize = k.parse().map_err(|_| Error::Schema(format!("bad category {k:?}")))?;
        if !by_id.contains_key(id) {
            order.push(id.to_string());
        }
        by_id.entry(id.to_string()).or_default().insert(f.to_string(), k);
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let features = by_id.remove(&id).unwrap_or_default();
            FeatureAssignment { prosumer_id: id, features }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::root;

    const TABLE_ONE: [f64; 4] = [165.0, 20.0, 3.0, 1.0];

    #[test]
    fn single_category_is_certain() {
        let m = DirichletFeatureModel::new("f", vec![1.0]).unwrap();
        let mut rng = root(0);
        for _ in 0..10 {
            assert_eq!(dirichlet_sample(&m, &mut rng), vec![1.0]);
        }
    }

    #[test]
    fn dirichlet_moments_match_analytic() {
        let m = DirichletFeatureModel::new("cap", TABLE_ONE.to_vec()).unwrap();
        let mut rng = root(1);
        let n = 10_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| dirichlet_sample(&m, &mut rng)).collect();
        for k in 0..4 {
            let mean = draws.iter().map(|q| q[k]).sum::<f64>() / n as f64;
            let var = draws.iter().map(|q| (q[k] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (m.variance(k) / n as f64).sqrt();
            assert!((mean - m.mean(k)).abs() < 3.0 * se, "component {k}: {mean} vs {}", m.mean(k));
            assert!((var / m.variance(k) - 1.0).abs() < 0.1, "component {k}: var {var} vs {}", m.variance(k));
        }
        assert!(draws.iter().all(|q| (q.iter().sum::<f64>() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ten_draws_look_like_the_published_sequence() {
        let m = DirichletFeatureModel::new("cap", TABLE_ONE.to_vec()).unwrap();
        let mut rng = root(2);
        let q1: Vec<f64> = (0..10).map(|_| dirichlet_sample(&m, &mut rng)[0]).collect();
        let mean = q1.iter().sum::<f64>() / 10.0;
        // published draws span 0.804–0.899 with mean 0.860; sd of q1 is ~0.024
        assert!(q1.iter().all(|&v| (0.78..=0.94).contains(&v)), "{q1:?}");
        assert!((mean - 0.8730).abs() < 3.0 * (m.variance(0) / 10.0).sqrt());
    }

    #[test]
    fn categorical_counts_examples() {
        let mut rng = root(3);
        assert_eq!(categorical_counts(&[0.3, 0.7], 0, &mut rng).unwrap(), vec![0, 0]);
        assert_eq!(categorical_counts(&[1.0, 0.0], 7, &mut rng).unwrap(), vec![7, 0]);
        assert_eq!(categorical_counts(&[0.0, 1.0], 7, &mut rng).unwrap(), vec![0, 7]);
        let c = categorical_counts(&[0.5, 0.5], 10_000, &mut rng).unwrap();
        assert!((c[0] as f64 - 5000.0).abs() <= 3.0 * 2500f64.sqrt());
        assert!(categorical_counts(&[0.5, 0.6], 3, &mut rng).is_err());
    }

    #[test]
    fn alpha_from_labels_examples() {
        assert_eq!(alpha_from_labels("f", &[0, 0, 1], 2).unwrap().alpha, vec![2.0, 1.0]);
        assert_eq!(alpha_from_labels("f", &[0, 0, 0, 0], 3).unwrap().alpha, vec![4.0, 1e-3, 1e-3]);
        let labels: Vec<usize> = [(0, 165), (1, 20), (2, 3), (3, 1)]
            .iter()
            .flat_map(|&(k, n)| std::iter::repeat_n(k, n))
            .collect();
        let m = alpha_from_labels("cap", &labels, 4).unwrap();
        assert_eq!(m.alpha, TABLE_ONE.to_vec());
        assert_eq!(m.alpha0(), 189.0);
        assert!(alpha_from_labels("f", &[], 2).is_err());
        assert!(alpha_from_labels("f", &[2], 2).is_err());
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn forced_and_mismatched_assignment() {
        let forced = assign_features(&BTreeMap::from([("f".to_string(), vec![3])]), &ids(3), 0).unwrap();
        assert!(forced.iter().all(|a| a.features["f"] == 0));
        assert!(assign_features(&BTreeMap::from([("f".to_string(), vec![2, 1])]), &ids(2), 0).is_err());
    }

    #[test]
    fn features_assigned_independently() {
        let n = 10_000;
        let counts = BTreeMap::from([("a".to_string(), vec![3000, 7000]), ("b".to_string(), vec![5000, 5000])]);
        let out = assign_features(&counts, &ids(n), 17).unwrap();
        let both = out.iter().filter(|a| a.features["a"] == 0 && a.features["b"] == 0).count() as f64;
        // hypergeometric overlap: mean 1500, sd ≈ 23
        let expected = 0.3 * 0.5 * n as f64;
        let sd = (expected * 0.7 * 0.5).sqrt();
        assert!((both - expected).abs() < 3.0 * sd, "{both}");
        // adding a feature leaves existing ones untouched
        let mut more = counts.clone();
        more.insert("c".into(), vec![n as u64]);
        let out2 = assign_features(&more, &ids(n), 17).unwrap();
        assert!(out.iter().zip(&out2).all(|(x, y)| x.features["a"] == y.features["a"]));
    }

    #[test]
    fn pipeline_conserves_population() {
        let m = DirichletFeatureModel::new("cap", TABLE_ONE.to_vec()).unwrap();
        let m2 = alpha_from_labels("dwelling", &[0, 1, 1, 2], 3).unwrap();
        let people = ids(1000);
        let (counts, assigned) = sample_population(&[m, m2], &people, 5).unwrap();
        assert!(counts.values().all(|c| c.iter().sum::<u64>() == 1000));
        assert_eq!(assigned.len(), 1000);
        for (f, c) in &counts {
            for (k, &n) in c.iter().enumerate() {
                assert_eq!(assigned.iter().filter(|a| a.features[f] == k).count() as u64, n);
            }
        }
        let mut buf = Vec::new();
        write_assignments_csv(&assigned, &mut buf).unwrap();
        assert_eq!(read_assignments_csv(buf.as_slice()).unwrap(), assigned);
    }
}
