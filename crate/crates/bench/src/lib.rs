//! Workloads shared by the criterion benchmarks.

use phasealloc::formulation::{build_model, CaseConfig, MilpModel};
use phasealloc::synthetic::random_feeder;
use phasealloc::{fixtures, Network};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A feeder with its case-`k` model at the feeder's voltage band.
pub fn case_model(net: &Network, case: u32) -> (CaseConfig, MilpModel) {
    let cfg = CaseConfig::case(case).with_band(net.voltage_band());
    let model = build_model(net, &cfg).expect("bundled feeders build");
    (cfg, model)
}

pub fn feeders() -> Vec<(&'static str, Network)> {
    fixtures::all()
}

/// A reproducible random feeder with exactly `n` buses.
pub fn sized_feeder(n: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    random_feeder(&mut rng, n, &format!("sized-{n}"))
}
