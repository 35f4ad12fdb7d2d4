//! Benchmark-only crate; see `benches/maps.rs`.

use relpend::model::{ForcingSeries, PendulumParams};

use std::f64::consts::TAU;

/// The forced configuration the benchmarks run against.
pub fn benchmark_params() -> PendulumParams {
    PendulumParams::new(0.2, TAU, 0, ForcingSeries::first_harmonic(0.1, 0.0))
        .expect("valid benchmark params")
}
