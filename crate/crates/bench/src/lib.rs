//! Shared workloads for the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use muxrisk::{
    build_network, generate_synthetic, Attribute, LoanRecord, MultilayerNetwork, SynthConfig,
};

/// `n_loans` synthetic loans over one window-sized span.
pub fn window_records(n_loans: usize, seed: u64) -> Vec<LoanRecord> {
    generate_synthetic(&SynthConfig {
        n_loans,
        span_months: 60,
        seed,
        ..SynthConfig::default()
    })
    .expect("valid bench config")
}

pub fn window_network(n_loans: usize, seed: u64) -> MultilayerNetwork {
    build_network(&window_records(n_loans, seed), &Attribute::DEFAULT_LAYERS)
        .expect("non-empty records")
}

/// Seeded random series in `[0, 1)`.
pub fn series(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen()).collect()
}
