//! Error metrics, autocorrelation, heatmap grids and profile aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative mean absolute error of a synthetic mean profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub percent: f64,
    /// Slots skipped because the observed value was zero.
    pub excluded_slots: usize,
    pub used_slots: usize,
}

/// `(1/n)·Σ |x_i − x*_i| / x_i` in percent, over slots where the observed
/// `x_i` is nonzero.
pub fn mean_absolute_error(observed: &[f64], synthetic: &[f64]) -> Result<MaeReport> {
    if observed.len() != synthetic.len() {
        return Err(Error::domain(format!("length mismatch: {} vs {}", observed.len(), synthetic.len())));
    }
    let used: Vec<f64> = observed
        .iter()
        .zip(synthetic)
        .filter(|(&x, _)| x != 0.0)
        .map(|(&x, &y)| (x - y).abs() / x.abs())
        .collect();
    if used.is_empty() {
        return Err(Error::UndefinedMetric("every observed value is zero".into()));
    }
    Ok(MaeReport {
        percent: 100.0 * used.iter().sum::<f64>() / used.len() as f64,
        excluded_slots: observed.len() - used.len(),
        used_slots: used.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxAbsError {
    pub value: f64,
    /// 1-based slot; ties go to the earliest slot.
    pub slot: usize,
}

pub fn max_absolute_error(observed: &[f64], synthetic: &[f64]) -> Result<MaxAbsError> {
    if observed.len() != synthetic.len() || observed.is_empty() {
        return Err(Error::domain("profiles must be nonempty and of equal length"));
    }
    let mut best = MaxAbsError { value: 0.0, slot: 1 };
    for (i, (x, y)) in observed.iter().zip(synthetic).enumerate() {
        let d = (x - y).abs();
        if d > best.value {
            best = MaxAbsError { value: d, slot: i + 1 };
        }
    }
    Ok(best)
}

/// `R(x, n) = 1/((N−n)s²) · Σ_{t=1}^{N−n} (x_t − x̄)(x_{t+n} − x̄)` with mean
/// and variance over the whole series. The variance divides by `N`, so lag 0
/// gives exactly one.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    let n = series.len();
    if lag >= n {
        return Err(Error::domain(format!("lag {lag} needs more than {n} samples")));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(Error::UndefinedMetric("series has zero variance".into()));
    }
    let cov: f64 = series[..n - lag].iter().zip(&series[lag..]).map(|(a, b)| (a - mean) * (b - mean)).sum();
    Ok(cov / ((n - lag) as f64 * var))
}

/// `log10(count + 1)` over the square window `range` of a count matrix.
pub fn log_heatmap(counts: &BTreeMap<u32, BTreeMap<u32, u64>>, range: std::ops::RangeInclusive<u32>) -> Vec<Vec<f64>> {
    range
        .clone()
        .map(|i| {
            range
                .clone()
                .map(|j| {
                    let c = counts.get(&i).and_then(|r| r.get(&j)).copied().unwrap_or(0);
                    (c as f64 + 1.0).log10()
                })
                .collect()
        })
        .collect()
}

/// Writes a heatmap grid as CSV with row/column state labels.
pub fn write_heatmap_csv<W: std::io::Write>(
    grid: &[Vec<f64>],
    first_state: u32,
    mut out: W,
) -> Result<()> {
    let width = grid.first().map_or(0, Vec::len);
    let header: Vec<String> = (0..width).map(|j| (first_state + j as u32).to_string()).collect();
    writeln!(out, "from\\to,{}", header.join(","))?;
    for (i, row) in grid.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(out, "{},{}", first_state + i as u32, cells.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    pub sum: Vec<f64>,
    pub count: usize,
}

/// Pointwise mean and sum of equal-length profiles.
pub fn aggregate<P: AsRef<[f64]>>(profiles: &[P]) -> Result<Aggregate> {
    let first = profiles.first().ok_or_else(|| Error::domain("cannot aggregate an empty collection"))?;
    let len = first.as_ref().len();
    let mut sum = vec![0.0; len];
    for p in profiles {
        let p = p.as_ref();
        if p.len() != len {
            return Err(Error::domain(format!("profile length {} differs from {len}", p.len())));
        }
        for (s, v) in sum.iter_mut().zip(p) {
            *s += v;
        }
    }
    let n = profiles.len() as f64;
    Ok(Aggregate { mean: sum.iter().map(|s| s / n).collect(), sum, count: profiles.len() })
}

/// Summary of a synthetic-against-observed comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mae: Option<MaeReport>,
    pub max_abs_error: MaxAbsError,
    /// Mean over profiles of the per-profile autocorrelation at each lag.
    pub autocorrelation_by_lag: BTreeMap<usize, f64>,
    pub observed_profiles: usize,
    pub synthetic_profiles: usize,
}

impl ValidationReport {
    /// Compares aggregate mean profiles and, for multi-day series, their
    /// autocorrelation at `lags`.
    pub fn compare<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
        observed: &[P],
        synthetic: &[Q],
        series: &[Vec<f64>],
        lags: &[usize],
    ) -> Result<Self> {
        let obs = aggregate(observed)?;
        let syn = aggregate(synthetic)?;
        let mae = match mean_absolute_error(&obs.mean, &syn.mean) {
            Ok(m) => Some(m),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        let mut autocorrelation_by_lag = BTreeMap::new();
        for &lag in lags {
            let values: Vec<f64> = series.iter().filter_map(|s| autocorrelation(s, lag).ok()).collect();
            if !values.is_empty() {
                autocorrelation_by_lag.insert(lag, values.iter().sum::<f64>() / values.len() as f64);
            }
        }
        Ok(Self {
            mae,
            max_abs_error: max_absolute_error(&obs.mean, &syn.mean)?,
            autocorrelation_by_lag,
            observed_profiles: obs.count,
            synthetic_profiles: syn.count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn ramp() -> Vec<f64> {
        (0..48).map(|i| 0.2 + 0.01 * i as f64).collect()
    }

    #[test]
    fn mae_examples() {
        let x = ramp();
        assert_eq!(mean_absolute_error(&x, &x).unwrap().percent, 0.0);
        let y: Vec<f64> = x.iter().map(|v| v * 1.1).collect();
        assert_relative_eq!(mean_absolute_error(&x, &y).unwrap().percent, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn mae_skips_zero_slots() {
        let mut x = ramp();
        x[0] = 0.0;
        x[1] = 0.0;
        let r = mean_absolute_error(&x, &ramp()).unwrap();
        assert_eq!((r.excluded_slots, r.used_slots), (2, 46));
        assert_eq!(r.percent, 0.0);
        assert!(matches!(mean_absolute_error(&[0.0; 48], &ramp()), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn max_abs_error_examples() {
        let x = ramp();
        assert_eq!(max_absolute_error(&x, &x).unwrap(), MaxAbsError { value: 0.0, slot: 1 });
        let mut y = x.clone();
        y[15] += 5.0;
        let e = max_absolute_error(&x, &y).unwrap();
        assert_relative_eq!(e.value, 5.0, epsilon = 1e-12);
        assert_eq!(e.slot, 16);
        let shifted_x: Vec<f64> = x.iter().map(|v| v + 3.0).collect();
        let shifted_y: Vec<f64> = y.iter().map(|v| v + 3.0).collect();
        let s = max_absolute_error(&shifted_x, &shifted_y).unwrap();
        assert_eq!(s.slot, 16);
        assert_relative_eq!(s.value, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn periodic_series_autocorrelates() {
        let series: Vec<f64> = (0..48 * 30).map(|t| (2.0 * std::f64::consts::PI * t as f64 / 48.0).sin()).collect();
        assert!(autocorrelation(&series, 48).unwrap() > 0.99);
        assert_relative_eq!(autocorrelation(&series, 0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn white_noise_has_no_daily_autocorrelation() {
        let mut rng = crate::rng::root(21);
        let n = 48 * 400;
        let series: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let r = autocorrelation(&series, 48).unwrap();
        assert!(r.abs() < 3.0 / (n as f64).sqrt(), "{r}");
    }

    #[test]
    fn autocorrelation_errors() {
        assert!(matches!(autocorrelation(&[1.0; 100], 48), Err(Error::UndefinedMetric(_))));
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn heatmap_values() {
        let counts = BTreeMap::from([(1, BTreeMap::from([(1, 99u64), (2, 9)]))]);
        let grid = log_heatmap(&counts, 0..=2);
        assert_eq!(grid[1][1], 2.0);
        assert_eq!(grid[1][2], 1.0);
        assert_eq!(grid[0][0], 0.0);
        let mut csv = Vec::new();
        write_heatmap_csv(&grid, 0, &mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("from\\to,0,1,2\n0,0.000000"));
    }

    proptest! {
        #[test]
        fn heatmap_is_monotone(a in 0u64..100_000, b in 0u64..100_000) {
            let cell = |c: u64| log_heatmap(&BTreeMap::from([(0, BTreeMap::from([(0, c)]))]), 0..=0)[0][0];
            prop_assert_eq!(a <= b, cell(a) <= cell(b));
        }

        #[test]
        fn aggregate_commutes_with_affine_maps(
            profiles in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 6), 1..6),
            scale in -3.0f64..3.0,
            shift in -3.0f64..3.0,
        ) {
            let mapped: Vec<Vec<f64>> = profiles.iter().map(|p| p.iter().map(|v| scale * v + shift).collect()).collect();
            let a = aggregate(&profiles).unwrap();
            let b = aggregate(&mapped).unwrap();
            for (x, y) in a.mean.iter().zip(&b.mean) {
                prop_assert!((scale * x + shift - y).abs() < 1e-9);
            }
            let mut reversed = profiles.clone();
            reversed.reverse();
            let r = aggregate(&reversed).unwrap();
            for (x, y) in a.sum.iter().zip(&r.sum) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[vec![1.0; 48], vec![3.0; 48]]).unwrap();
        assert!(a.mean.iter().all(|&v| v == 2.0));
        assert!(a.sum.iter().all(|&v| v == 4.0));
        let one = aggregate(&[ramp()]).unwrap();
        assert_eq!(one.mean, ramp());
        assert!(aggregate::<Vec<f64>>(&[]).is_err());
        assert!(aggregate(&[vec![1.0; 48], vec![1.0; 47]]).is_err());
    }

    #[test]
    fn report_compares_means() {
        let obs = vec![ramp(); 3];
        let syn: Vec<Vec<f64>> = vec![ramp().iter().map(|v| v * 1.1).collect()];
        let series: Vec<Vec<f64>> = vec![(0..480).map(|t| (t % 48) as f64).collect()];
        let r = ValidationReport::compare(&obs, &syn, &series, &[48]).unwrap();
        assert_relative_eq!(r.mae.unwrap().percent, 10.0, epsilon = 1e-9);
        assert_relative_eq!(r.autocorrelation_by_lag[&48], 1.0, epsilon = 1e-12);
        assert_eq!((r.observed_profiles, r.synthetic_profiles), (3, 1));
    }
}
