use std::fs::File;

use fairdispatch_core::data::{
    load_availabilities, load_tasks, load_workload, synth_records, synth_workload, write_checkins,
    write_trips, CapacityMode, DatasetConfig, SynthParams,
};

fn params(seed: u64) -> SynthParams {
    SynthParams {
        tasks: 400,
        workers: 30,
        seed,
        ..SynthParams::default()
    }
}

#[test]
fn files_round_trip_to_same_workload() {
    let dir = tempfile::tempdir().unwrap();
    let p = params(11);
    let config = DatasetConfig { seed: 11, ..DatasetConfig::default() };
    let (trips, checkins) = synth_records(&p);
    write_trips(File::create(dir.path().join("t.csv")).unwrap(), &trips).unwrap();
    write_checkins(File::create(dir.path().join("c.csv")).unwrap(), &checkins).unwrap();

    let (loaded, bad) = load_workload(
        File::open(dir.path().join("t.csv")).unwrap(),
        File::open(dir.path().join("c.csv")).unwrap(),
        &config,
    )
    .unwrap();
    assert!(bad.is_empty());
    assert_eq!(loaded, synth_workload(&p, &config).unwrap());

    let (tasks, stats) = load_tasks(File::open(dir.path().join("t.csv")).unwrap(), &config).unwrap();
    assert_eq!(tasks, loaded.tasks);
    assert_eq!(stats, loaded.stats);
    let avails = load_availabilities(File::open(dir.path().join("c.csv")).unwrap(), &stats, &config).unwrap();
    let grouped: usize = loaded.workers.iter().map(|w| w.availabilities().len()).sum();
    assert_eq!(avails.len(), grouped);
}

#[test]
fn workload_invariants() {
    for seed in 0..5 {
        let config = DatasetConfig { seed, ..DatasetConfig::default() };
        let w = synth_workload(&params(seed), &config).unwrap();
        assert_eq!(w.tasks.len(), 400);
        assert!(w.workers.len() <= 30);
        for t in &w.tasks {
            assert!(t.source_period.len() >= 1 && t.dest_period.len() >= 1);
            assert!(t.source_period.begin() <= t.dest_period.begin());
        }
        for wk in &w.workers {
            assert!(!wk.availabilities().is_empty());
            assert!(wk.availabilities().iter().all(|a| a.radius_km() > 0.0 && a.worker_id == wk.id));
        }
        let mean_cap = w.workers.iter().map(|x| x.capacity as f64).sum::<f64>() / w.workers.len() as f64;
        let target = 400.0 / w.workers.len() as f64;
        assert!((mean_cap - target).abs() < target * 0.5, "{mean_cap} vs {target}");
    }
}

#[test]
fn fixed_delta_t_gives_constant_periods() {
    let config = DatasetConfig {
        fixed_delta_t: true,
        delta_t: 900,
        capacity_mode: CapacityMode::Fixed(3),
        ..DatasetConfig::default()
    };
    let w = synth_workload(&params(2), &config).unwrap();
    assert!(w.tasks.iter().all(|t| t.source_period.len() == 900 && t.dest_period.len() == 900));
    assert!(w.workers.iter().all(|x| x.capacity == 3));
    assert!(w
        .workers
        .iter()
        .flat_map(|x| x.availabilities())
        .all(|a| a.period.len() == 900));
}

#[test]
fn seed_changes_samples_but_not_records() {
    let a = synth_workload(&params(0), &DatasetConfig { seed: 1, ..DatasetConfig::default() }).unwrap();
    let b = synth_workload(&params(0), &DatasetConfig { seed: 2, ..DatasetConfig::default() }).unwrap();
    assert_eq!(a.tasks.len(), b.tasks.len());
    assert!(a.tasks.iter().zip(&b.tasks).all(|(x, y)| x.source_loc == y.source_loc));
    assert_ne!(a.tasks, b.tasks);
}
