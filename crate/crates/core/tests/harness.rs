use std::collections::BTreeMap;

use excd::discovery::{discover, DiscoveryConfig};
use excd::graphs::Dag;
use excd::harness::{
    default_prior, read_config_file, run_experiment, write_outputs, ConfigSource, ExperimentConfig,
    ExperimentKind,
};
use excd::process::sample_dataset;

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::defaults(kind, false);
    c.repeats = 3;
    c.envs = vec![300, 600];
    c.seed = 17;
    c
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [ExperimentKind::BivariateSweep, ExperimentKind::Multivariate] {
        let cfg = small(kind);
        let (csv1, json1) = run_experiment(&cfg).unwrap();
        let (a, b) = write_outputs(dir.path(), "x", &csv1, &json1).unwrap();
        let first = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let (csv2, json2) = run_experiment(&cfg).unwrap();
        write_outputs(dir.path(), "x", &csv2, &json2).unwrap();
        assert_eq!(first, (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap()));
    }
}

#[test]
fn manifest_reproduces_its_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(ExperimentKind::BivariateSweep);
    let (csv, json) = run_experiment(&cfg).unwrap();
    let (_, manifest) = write_outputs(dir.path(), "run", &csv, &json).unwrap();
    match read_config_file(&manifest).unwrap() {
        ConfigSource::Full(back) => assert_eq!(back, cfg),
        ConfigSource::Flat(_) => panic!("manifest should carry a full config"),
    }
}

#[test]
fn flat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "# sweep\nseed = 4\nenvs = 100,200 # grid\nrepeats=2\n").unwrap();
    let ConfigSource::Flat(map) = read_config_file(&path).unwrap() else {
        panic!("expected flat settings")
    };
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::BivariateSweep, false);
    cfg.apply(&map).unwrap();
    assert_eq!((cfg.seed, cfg.envs.clone(), cfg.repeats), (4, vec![100, 200], 2));
    let mut bad = BTreeMap::new();
    bad.insert("alpha".to_string(), "lots".to_string());
    assert!(cfg.apply(&bad).is_err());
}

#[test]
fn identifiability_counts() {
    let (csv, _) = run_experiment(&ExperimentConfig::defaults(ExperimentKind::IdentifiabilitySweep, false)).unwrap();
    assert!(csv.contains("\n3,25,25,11,6,300\n"), "{csv}");
}

#[test]
fn fork_recovered_from_simulated_data() {
    let g = Dag::new(3, [(0, 1), (0, 2)]).unwrap();
    let hits = (0..5)
        .filter(|&s| {
            let ds = sample_dataset(&g, &default_prior(&g), 10_000, 2, 100 + s).unwrap();
            discover(&ds, DiscoveryConfig::default()).map_or(false, |r| r.graph == g)
        })
        .count();
    assert!(hits >= 3, "{hits}/5");
}
