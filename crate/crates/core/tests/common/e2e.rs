//! Full wrist pipeline on a generated multi-subject store.

use selfcare_core::config::{self, KvConfig};
use selfcare_core::dataset::synth::{wrist_stress_scenario, ProtocolPlan};
use selfcare_core::dataset::{generate_synthetic, write_store, DatasetStore};
use selfcare_core::dsp::PreprocessPlan;
use selfcare_core::eval::{run_benchmark, run_majority, run_selfcare, tables_from_store, SubjectTables};
use selfcare_core::features::FeatureConfig;
use selfcare_core::fusion::{BranchCatalog, FusionConfig, LateFusion};
use selfcare_core::{Device, Task};

pub struct EndToEnd {
    pub selfcare: f64,
    pub branches: Vec<(String, f64)>,
    pub majority: f64,
}

impl EndToEnd {
    pub fn best_branch(&self) -> f64 {
        self.branches.iter().map(|b| b.1).fold(0.0, f64::max)
    }
}

/// Writes a wrist store, reloads it and extracts features. Odd-numbered
/// subjects run the stress condition first.
pub fn synthetic_wrist_tables(subjects: usize, seed: u64) -> SubjectTables {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<_> = (0..subjects)
        .map(|i| {
            let plan = ProtocolPlan {
                stress_first: i % 2 == 1,
                ..ProtocolPlan::default()
            };
            let sc = wrist_stress_scenario(&format!("S{}", i + 1), plan, seed + i as u64);
            generate_synthetic(&sc, seed.wrapping_mul(31) + i as u64).unwrap()
        })
        .collect();
    write_store(dir.path(), &records).unwrap();
    let store = DatasetStore::load(dir.path()).unwrap();
    tables_from_store(&store, Device::Wrist, &PreprocessPlan::default(), &FeatureConfig::default()).unwrap()
}

pub fn run(tables: &SubjectTables, seed: u64) -> EndToEnd {
    let learners = KvConfig::parse(config::LEARNERS).unwrap();
    let cfg = FusionConfig::default_for(Device::Wrist, Task::ThreeClass);
    let selfcare = run_selfcare(tables, &cfg, LateFusion::Kalman, &learners, seed).unwrap();
    let shortlist = BranchCatalog::for_device(Device::Wrist, cfg.branch_family)
        .select(&cfg.shortlist)
        .unwrap();
    let bench = run_benchmark(tables, &shortlist, &[cfg.branch_family], Task::ThreeClass, &learners, seed).unwrap();
    let majority = run_majority(tables, Device::Wrist, Task::ThreeClass).unwrap();
    EndToEnd {
        selfcare: 100.0 * selfcare.aggregate.pooled.accuracy,
        branches: bench
            .cells
            .iter()
            .map(|c| (c.branch.clone(), 100.0 * c.aggregate.pooled.accuracy))
            .collect(),
        majority: 100.0 * majority.aggregate.pooled.accuracy,
    }
}

/// Short-protocol wrist records, generated in memory.
pub fn short_wrist_records(subjects: usize, seed: u64) -> Vec<selfcare_core::dataset::SubjectRecord> {
    (0..subjects)
        .map(|i| {
            let sc = wrist_stress_scenario(&format!("S{}", i + 1), ProtocolPlan::short(), seed + i as u64);
            generate_synthetic(&sc, seed.wrapping_mul(31) + i as u64).unwrap()
        })
        .collect()
}

pub fn short_wrist_tables(subjects: usize, seed: u64) -> SubjectTables {
    selfcare_core::eval::tables_from_records(
        &short_wrist_records(subjects, seed),
        &PreprocessPlan::default(),
        &FeatureConfig::default(),
    )
    .unwrap()
}

/// Shipped learner settings with small ensembles, for quick runs.
pub fn small_learners() -> KvConfig {
    let mut kv = KvConfig::parse(config::LEARNERS).unwrap();
    kv.set("n_estimators", 10);
    kv
}
