//! Stage plumbing through the binary and the library entry points.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use prosynth::clustering::resample_mixture;
use prosynth::rng::root;
use prosynth_cli::commands::{self, CustomerSummary, CLUSTERS, CUSTOMERS, NET_AGGREGATES, PROFILES};
use prosynth_cli::config::{ClusterMethod, ExperimentConfig, Overrides, SolarParams};
use prosynth_cli::dataset::{capacity_mixture, SampleSpec};
use prosynth_cli::{write_sample, CliError};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prosynth"))
}

fn small_spec() -> SampleSpec {
    SampleSpec { customers: 24, days: 14, ..SampleSpec::default() }
}

/// A small dataset plus a config pointing at it, inside a fresh directory.
fn workspace(prosumers: usize) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    write_sample(&small_spec(), &SolarParams::default(), &dir.path().join("meter.csv")).unwrap();
    let config = dir.path().join("experiment.toml");
    fs::write(
        &config,
        format!(
            "seed = 5\n[paths]\ninput = \"meter.csv\"\noutput = \"out\"\n\
             [schema]\ncustomer_id = \"customer_id\"\ntimestamp = \"timestamp\"\ndemand = \"demand_kwh\"\n\
             generation = \"generation_kwh\"\nfeatures = [\"tariff\"]\n\
             [clustering]\nalpha = 1.0\n[assignment]\nprosumers = {prosumers}\nfeatures = [\"tariff\"]\n"
        ),
    )
    .unwrap();
    (dir, config)
}

fn load(config: &Path) -> ExperimentConfig {
    ExperimentConfig::load(config, &Overrides::default()).unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn missing_input_fails_with_path() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("experiment.toml");
    fs::write(&config, "seed = 1\n[paths]\ninput = \"nowhere.csv\"\noutput = \"out\"\n").unwrap();
    let run = bin().arg("--config").arg(&config).arg("ingest").output().unwrap();
    assert_eq!(run.status.code(), Some(CliError::IO_EXIT));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("nowhere.csv"), "{stderr}");
}

#[test]
fn missing_config_and_bad_values_are_config_errors() {
    let run = bin().args(["--config", "/no/such/experiment.toml", "ingest"]).output().unwrap();
    assert_eq!(run.status.code(), Some(CliError::IO_EXIT));
    let (_dir, config) = workspace(10);
    let text = fs::read_to_string(&config).unwrap().replace("alpha = 1.0", "alpha = 0.0");
    fs::write(&config, text).unwrap();
    let run = bin().arg("--config").arg(&config).arg("cluster").output().unwrap();
    assert_eq!(run.status.code(), Some(CliError::CONFIG_EXIT));
    assert!(String::from_utf8_lossy(&run.stderr).contains("alpha"));
    let run = bin().arg("--config").arg(&config).args(["--penetration", "0,2", "synth"]).output().unwrap();
    assert_eq!(run.status.code(), Some(2), "clap rejects out-of-range penetration");
}

#[test]
fn downstream_stage_names_missing_artifact() {
    let (_dir, config) = workspace(10);
    let run = bin().arg("--config").arg(&config).arg("synth").output().unwrap();
    assert_eq!(run.status.code(), Some(CliError::IO_EXIT));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("tensor_weekday.csv") && stderr.contains("build-demand"), "{stderr}");
    let c = load(&config);
    commands::ingest(&c).unwrap();
    match commands::assign(&c) {
        Err(CliError::MissingArtifact { path, stage }) => {
            assert!(path.ends_with("features.json"));
            assert_eq!(stage, "cluster");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn ingest_is_idempotent() {
    let (_dir, config) = workspace(10);
    let c = load(&config);
    let summary = commands::ingest(&c).unwrap();
    assert_eq!(summary.customers, 24);
    assert_eq!(summary.profiles, 24 * 14);
    assert_eq!(summary.weekday_profiles, 24 * 10);
    let first = fs::read(c.paths.output.join(PROFILES)).unwrap();
    commands::ingest(&c).unwrap();
    assert_eq!(fs::read(c.paths.output.join(PROFILES)).unwrap(), first);
}

fn clustering_config(method: ClusterMethod, k: usize) -> (TempDir, ExperimentConfig) {
    let dir = TempDir::new().unwrap();
    let mut c: ExperimentConfig =
        toml::from_str("seed = 3\n[paths]\ninput = \"unused.csv\"\noutput = \"out\"\n").unwrap();
    c.paths.output = dir.path().join("out");
    c.clustering.method = method;
    c.clustering.k = k;
    let points = resample_mixture(&capacity_mixture(), &mut root(3));
    let customers: Vec<CustomerSummary> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| CustomerSummary {
            customer_id: format!("c{i}"),
            days: 1,
            peak_generation_kwh: Some(p),
            labels: Default::default(),
        })
        .collect();
    fs::create_dir_all(&c.paths.output).unwrap();
    fs::write(c.paths.output.join(CUSTOMERS), serde_json::to_vec(&customers).unwrap()).unwrap();
    (dir, c)
}

#[test]
fn capacity_mixture_clusters() {
    let (_d, c) = clustering_config(ClusterMethod::Kmeans, 4);
    let s = commands::cluster(&c).unwrap();
    assert_eq!(s.k, 4);
    assert_eq!(s.populations.iter().sum::<usize>(), 189);
    let json: serde_json::Value = serde_json::from_slice(&fs::read(c.paths.output.join(CLUSTERS)).unwrap()).unwrap();
    assert_eq!(json["clusters"].as_array().unwrap().len(), 4);

    let (_d, c) = clustering_config(ClusterMethod::MapDp, 4);
    let s = commands::cluster(&c).unwrap();
    assert!((3..=4).contains(&s.k), "{s:?}");

    let (_d, c) = clustering_config(ClusterMethod::Kmeans, 1);
    let s = commands::cluster(&c).unwrap();
    assert_eq!((s.k, s.populations[0]), (1, 189));

    let (_d, c) = clustering_config(ClusterMethod::Kmeans, 190);
    assert!(matches!(commands::cluster(&c), Err(CliError::Config(_))));
}

#[test]
fn synth_exports_are_reproducible_and_sweep_has_four_levels() {
    let (dir, config) = workspace(200);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let run = bin()
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(out)
            .args(["--penetration", "0,0.271,0.8,1.0", "all"])
            .output()
            .unwrap();
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    }
    assert_eq!(read_dir_sorted(&out_a), read_dir_sorted(&out_b));

    let net = fs::read_to_string(out_a.join(NET_AGGREGATES)).unwrap();
    let levels: std::collections::BTreeSet<&str> =
        net.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(levels.len(), 4);
    assert!(levels.contains("0.271"));

    // deleting outputs and rerunning a stage reproduces them
    let tensor = out_a.join("tensor_weekday.csv");
    let before = fs::read(&tensor).unwrap();
    fs::remove_file(&tensor).unwrap();
    let run = bin().arg("--config").arg(&config).arg("--out").arg(&out_a).arg("build-demand").output().unwrap();
    assert!(run.status.success());
    assert_eq!(fs::read(&tensor).unwrap(), before);
}

#[test]
fn overrides_change_outputs() {
    let (dir, config) = workspace(50);
    let run = |seed: &str, out: &str| {
        let status = bin()
            .arg("--config")
            .arg(&config)
            .args(["--seed", seed, "--day-type", "weekend", "--out"])
            .arg(dir.path().join(out))
            .arg("all")
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        fs::read(dir.path().join(out).join("synthetic_demand.csv")).unwrap()
    };
    assert_ne!(run("1", "x"), run("2", "y"));
    assert!(dir.path().join("x/tensor_weekend.csv").exists());
}
