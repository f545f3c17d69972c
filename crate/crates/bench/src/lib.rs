//! Fixtures shared by the benchmarks.

use selfcare_core::dataset::synth::{wrist_stress_scenario, ProtocolPlan};
use selfcare_core::dataset::{generate_synthetic, SubjectRecord};

/// Short-protocol wrist recordings of `n` subjects.
pub fn wrist_records(n: usize) -> Vec<SubjectRecord> {
    (0..n)
        .map(|i| {
            let sc = wrist_stress_scenario(&format!("S{}", i + 1), ProtocolPlan::short(), 100 + i as u64);
            generate_synthetic(&sc, 7 + i as u64).expect("synthetic record")
        })
        .collect()
}
