//! The nine acceptance criteria, one PASS/FAIL line each, runtime included.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use prosynth::clustering::{map_dp, resample_mixture, Cluster, ClusterModel, MapDpPrior};
use prosynth::data_model::{
    discretize_energy, generate_ground_truth, split_days, undiscretize, Calendar, DailyProfile, DayType, DemandState,
    ProbabilityChain,
};
use prosynth::demand_chain::{
    build_tensor, kde_row, personalize, sample_multiday, Concentration, DemandModel, PersonalizationConfig,
};
use prosynth::feature_assignment::{dirichlet_sample, DirichletFeatureModel};
use prosynth::rng::{root, substream};
use prosynth::solar_gen::{
    build_ci_matrix, clear_sky_profile, extract_ci_series, generation_from_ci, net_demand, penetration_sweep,
    sample_ci_trajectory, sample_cohort, sample_generation_profile, tif_profile, trough, ClearnessMatrix, InitialCi,
    SolarConfig,
};
use prosynth::validation::{aggregate, autocorrelation, mean_absolute_error};
use prosynth_cli::commands::MIDDAY;
use prosynth_cli::config::{ExperimentConfig, Overrides, SolarParams};
use prosynth_cli::dataset::SampleSpec;
use prosynth_cli::{run_all, write_sample};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn table_one() -> ClusterModel {
    ClusterModel::new(vec![
        Cluster { mean: 0.6368, variance: 0.0338, population: 165 },
        Cluster { mean: 1.3293, variance: 0.0104, population: 20 },
        Cluster { mean: 1.8843, variance: 0.016, population: 3 },
        Cluster { mean: 4.3960, variance: 0.0, population: 1 },
    ])
    .unwrap()
}

fn monday() -> NaiveDate {
    NaiveDate::from_ymd_opt(2013, 1, 7).unwrap()
}

fn weekday_profiles(chain: &ProbabilityChain, customers: usize, days: usize, seed: u64) -> Vec<DailyProfile> {
    generate_ground_truth(chain, customers, days, seed, monday())
        .unwrap()
        .iter()
        .flat_map(|t| split_days(t, &Calendar::default()).profiles)
        .filter(|p| p.day_type == DayType::Weekday)
        .collect()
}

fn kwh(states: &[DemandState]) -> Vec<f64> {
    states.iter().map(|s| s.kwh()).collect()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn discretization() -> Outcome {
    let s = discretize_energy(1.023, 700).unwrap();
    let round_trip = (0..=700u32).all(|k| discretize_energy(undiscretize(DemandState(k)), 700).unwrap().0 == k);
    outcome(s.0 == 102 && round_trip, format!("1.023 kWh -> state {}, round trip over 0..=700 {round_trip}", s.0))
}

fn dirichlet_moments() -> Outcome {
    let model = DirichletFeatureModel::new("capacity", vec![165.0, 20.0, 3.0, 1.0]).unwrap();
    let n = 10_000;
    let mut rng = root(2);
    let draws: Vec<Vec<f64>> = (0..n).map(|_| dirichlet_sample(&model, &mut rng)).collect();
    let a0 = model.alpha0();
    let mut worst_var: f64 = 0.0;
    let mut mean_ok = true;
    let mut first_mean = 0.0;
    for k in 0..4 {
        let xs: Vec<f64> = draws.iter().map(|q| q[k]).collect();
        let (m, sd) = mean_sd(&xs);
        let var = model.alpha[k] * (a0 - model.alpha[k]) / (a0 * a0 * (a0 + 1.0));
        if k == 0 {
            first_mean = m;
            mean_ok = (m - model.mean(0)).abs() <= 3.0 * (var / n as f64).sqrt();
        }
        worst_var = worst_var.max((sd * sd - var).abs() / var);
    }
    outcome(
        mean_ok && worst_var <= 0.10,
        format!("mean q1 {first_mean:.4} vs {:.4}, worst variance error {:.1}%", 165.0 / 189.0, 100.0 * worst_var),
    )
}

fn map_dp_recovery() -> Outcome {
    let prior = MapDpPrior::naive(0.7428, 0.17, 9.0);
    let mut ks = BTreeMap::new();
    let mut dominant_ok = 0;
    let mut dominant_means = Vec::new();
    for seed in 0..20 {
        let points = resample_mixture(&table_one(), &mut root(seed));
        let fit = map_dp(&points, &prior, 200).unwrap();
        *ks.entry(fit.model.k()).or_insert(0) += 1;
        let d = &fit.model.clusters[fit.model.dominant()];
        dominant_means.push(d.mean);
        if (d.mean - 0.637).abs() < 0.1 && d.population as f64 >= 0.8 * points.len() as f64 {
            dominant_ok += 1;
        }
    }
    let modal = ks.iter().max_by_key(|(k, n)| (**n, std::cmp::Reverse(**k))).map(|(k, _)| *k).unwrap();
    let (m, _) = mean_sd(&dominant_means);
    outcome(
        (3..=4).contains(&modal) && dominant_ok == 20,
        format!("K counts {ks:?}, modal K {modal}, dominant cluster ok in {dominant_ok}/20 (mean {m:.3})"),
    )
}

fn demand_round_trip() -> Outcome {
    let chain = ProbabilityChain::diurnal(120, 6.0).unwrap();
    let profiles = weekday_profiles(&chain, 2000, 7, 41);
    let model = DemandModel::new(build_tensor(&profiles, DayType::Weekday, chain.n_max).unwrap(), 2.0).unwrap();
    let mut rng = root(42);
    let days: Vec<Vec<f64>> = (0..10_000).map(|_| kwh(&model.sample_day(&mut rng))).collect();
    let mae = mean_absolute_error(&chain.mean_profile_kwh(), &aggregate(&days).unwrap().mean).unwrap();
    outcome(
        profiles.len() == 10_000 && mae.percent <= 10.0,
        format!("{} source days, MAE {:.2}%", profiles.len(), mae.percent),
    )
}

fn kde_soundness() -> Outcome {
    let rows = (10u32..=700)
        .prop_flat_map(|n_max| (Just(n_max), prop::collection::vec((0..=n_max, 1u32..50), 1..12), 0.3f64..10.0));
    let mut runner = TestRunner::new(Config { cases: 300, failure_persistence: None, ..Config::default() });
    let result = runner.run(&rows, |(n_max, counts, h)| {
        let row = kde_row(counts.iter().map(|&(j, c)| (j, f64::from(c))), h, n_max).unwrap();
        prop_assert_eq!(row.probabilities.len(), n_max as usize + 1);
        prop_assert!((row.probabilities.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(row.probabilities.iter().all(|&p| p > 0.0));
        Ok(())
    });
    match result {
        Ok(()) => outcome(true, "300 random sparse rows: sums 1 ± 1e-9, every state positive"),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn reinforcement_direction() -> Outcome {
    // a sparse household-scale source, like one tariff class of a trial
    let chain = ProbabilityChain::diurnal(120, 6.0).unwrap();
    let profiles = weekday_profiles(&chain, 10, 7, 60);
    let model = Arc::new(DemandModel::new(build_tensor(&profiles, DayType::Weekday, chain.n_max).unwrap(), 2.0).unwrap());
    let config = PersonalizationConfig { concentration: Concentration::Scale(1.0), ..Default::default() };
    let mut diffs = Vec::new();
    let (mut plain, mut reinforced) = (0.0, 0.0);
    let seeds = 30;
    for seed in 0..seeds {
        let mut ac = [0.0; 2];
        for (slot, w) in [0.0, 1.0].into_iter().enumerate() {
            for p in 0..10u64 {
                let mut personal = personalize(model.clone(), format!("p{p}"), config, seed).unwrap();
                let states = sample_multiday(&mut personal, 20, w, &mut substream(seed, "habit", p)).unwrap();
                ac[slot] += autocorrelation(&kwh(&states), 48).unwrap() / 10.0;
            }
        }
        plain += ac[0] / seeds as f64;
        reinforced += ac[1] / seeds as f64;
        diffs.push(ac[1] - ac[0]);
    }
    let (m, sd) = mean_sd(&diffs);
    let se = sd / (diffs.len() as f64).sqrt();
    outcome(
        m - 3.0 * se > 0.0,
        format!("lag-48 w=0 {plain:.4}, w=1 {reinforced:.4}, paired gain {m:.4} ± {se:.4} (z = {:.1})", m / se),
    )
}

fn sydney(area: f64) -> SolarConfig {
    SolarConfig { area, ..SolarParams::default().base(70) }
}

fn solar_identities() -> Outcome {
    let config = sydney(12.0);
    let tif = tif_profile(&config);
    let weather = ClearnessMatrix::persistent(0.5, 0.04, 6.0).unwrap();
    let mut rng = root(70);
    let night_zero = (0..200).all(|_| {
        let g = sample_generation_profile(&config, &weather, InitialCi::Uniform, &mut rng).unwrap();
        g.kwh.iter().zip(&tif).all(|(e, t)| *t > 0.0 || *e == 0.0)
    });

    let forced = sample_generation_profile(&config, &ClearnessMatrix::forcing(100), InitialCi::Fixed(100), &mut rng)
        .unwrap()
        .kwh;
    let clear_exact = forced == clear_sky_profile(&config);

    let known: Vec<Option<u8>> = tif.iter().enumerate().map(|(k, &t)| (t > 0.0).then_some((k * 7 % 101) as u8)).collect();
    let extracted = extract_ci_series(&generation_from_ci(&config, &known), &config).unwrap();
    let ci_round_trip = extracted == known;

    let oracle = ClearnessMatrix::persistent(0.4, 0.06, 5.0).unwrap();
    let mask = vec![true; 48];
    let sequences: Vec<_> = (0..4000).map(|_| sample_ci_trajectory(&mask, &oracle, InitialCi::Uniform, &mut rng)).collect();
    let learned = build_ci_matrix(&sequences, 2.0).unwrap();
    let (mut within, mut cells, mut worst): (usize, usize, f64) = (0, 0, 0.0);
    for from in 0..=100u8 {
        let row = &learned.counts()[from as usize];
        let n = row.iter().sum::<u64>() as f64;
        for (to, &count) in row.iter().enumerate() {
            let p = oracle.row(from)[to];
            if n * p < 5.0 {
                continue;
            }
            let z = (count as f64 / n - p).abs() / (p * (1.0 - p) / n).sqrt();
            cells += 1;
            within += usize::from(z <= 3.0);
            worst = worst.max(z);
        }
    }
    let matrix_ok = within as f64 > 0.99 * cells as f64 && worst <= 5.0;
    outcome(
        night_zero && clear_exact && ci_round_trip && matrix_ok,
        format!(
            "night zero {night_zero}, clear sky exact {clear_exact}, CI round trip {ci_round_trip}, \
             CI matrix {within}/{cells} cells within 3 SE (worst {worst:.2})"
        ),
    )
}

fn net_demand_sweep() -> Outcome {
    let chain = ProbabilityChain::diurnal(120, 6.0).unwrap();
    let model = DemandModel::new(build_tensor(&weekday_profiles(&chain, 300, 7, 80), DayType::Weekday, 700).unwrap(), 2.0)
        .unwrap();
    let mut rng = root(81);
    let demand: Vec<Vec<f64>> = (0..1000).map(|_| kwh(&model.sample_day(&mut rng))).collect();
    let solar = SolarParams::default();
    let systems: Vec<SolarConfig> = (0..1000).map(|i| solar.sized(70, [0.64, 1.33, 1.88][i % 3])).collect();
    let weather = ClearnessMatrix::persistent(0.5, 0.04, 6.0).unwrap();
    let generation: Vec<Vec<f64>> =
        sample_cohort(&systems, &weather, true, InitialCi::Uniform, 82, 0).unwrap().into_iter().map(|g| g.kwh).collect();

    let zero = net_demand(&demand, &generation, 0.0, &mut rng).unwrap();
    let zero_exact = zero.net == demand;
    let mut worst: f64 = 0.0;
    for p in [0.271, 0.5, 1.0] {
        let n = net_demand(&demand, &generation, p, &mut rng).unwrap();
        let a = aggregate(&n.net).unwrap().mean;
        for (k, v) in a.iter().enumerate() {
            worst = worst.max((v - (n.aggregate_demand[k] - n.aggregate_generation[k])).abs());
        }
    }
    let levels = [0.271, 0.4, 0.5, 0.6, 0.8, 1.0];
    let sweep = penetration_sweep(&demand, &generation, &levels, &mut rng).unwrap();
    let troughs: Vec<f64> = sweep.iter().map(|s| trough(&s.aggregate_net, MIDDAY.0, MIDDAY.1)).collect();
    let deeper = troughs.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = troughs.iter().map(|t| format!("{t:.3}")).collect();
    outcome(
        zero_exact && worst <= 1e-9 && deeper,
        format!(
            "p = 0 exact {zero_exact}, linearity error {worst:.1e}, midday troughs [{}] kWh",
            shown.join(", ")
        ),
    )
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn end_to_end_determinism() -> Outcome {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let scratch = tempfile::TempDir::new().unwrap();
    let regenerated = scratch.path().join("sample_meter.csv");
    write_sample(&SampleSpec::default(), &SolarParams::default(), &regenerated).unwrap();
    let bundled_matches = std::fs::read(&regenerated).unwrap() == std::fs::read(data.join("sample_meter.csv")).unwrap();
    let mut runs = Vec::new();
    for name in ["first", "second"] {
        let overrides = Overrides { out: Some(scratch.path().join(name)), ..Overrides::default() };
        let config = ExperimentConfig::load(&data.join("experiment.toml"), &overrides).unwrap();
        run_all(&config).unwrap();
        runs.push(files(&scratch.path().join(name)));
    }
    let identical = runs[0] == runs[1];
    outcome(
        bundled_matches && identical && !runs[0].is_empty(),
        format!("bundled data regenerates {bundled_matches}, {} exports byte-identical {identical}", runs[0].len()),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("discretization exactness", Duration::from_secs(1), discretization),
        ("Dirichlet sampler moments", Duration::from_secs(5), dirichlet_moments),
        ("MAP-DP recovery", Duration::from_secs(30), map_dp_recovery),
        ("demand oracle round trip", Duration::from_secs(120), demand_round_trip),
        ("KDE soundness", Duration::from_secs(10), kde_soundness),
        ("reinforcement direction", Duration::from_secs(120), reinforcement_direction),
        ("solar identities", Duration::from_secs(60), solar_identities),
        ("net demand and penetration sweep", Duration::from_secs(120), net_demand_sweep),
        ("end-to-end determinism", Duration::from_secs(300), end_to_end_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= *budget;
        failed += usize::from(!pass);
        println!(
            "criterion {} {name}: {} ({}; {:.2}s of {}s)",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
