//! Fixtures shared by the kernel benchmarks.

use attractlab::experiment::sample_ball;
use attractlab::semigroup::KernelTerm;
use attractlab::{Ensemble, MetricSpec, WaveSystem, WaveSystemConfig};

/// Forced cubic wave system with a rank-one kernel on `n` modes.
pub fn forced_wave(n: usize) -> WaveSystem {
    WaveSystem::new(WaveSystemConfig {
        k: 1.0,
        p: 2.0,
        l: 2.0,
        f_coeffs: vec![0.0, -1.0, 0.0, 1.0],
        kernel: vec![KernelTerm {
            weight: 0.1,
            g: vec![1.0],
        }],
        h_coeffs: vec![5.0],
        mode_count: n,
        dt: (0.5 / n as f64).min(0.01),
        collocation_points: None,
    })
    .expect("fixture config is valid")
}

pub fn ball(spec: &MetricSpec, count: usize, seed: u64) -> Ensemble {
    sample_ball(spec, count, 1.0, None, seed).expect("fixture sample is valid")
}
