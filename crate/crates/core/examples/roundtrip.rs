//! Simulates an eight-time experiment, reconstructs it and compares the
//! recovered Rabi frequency, diagonal mass and blur width with the truth.
//!
//! `cargo run --release -p qdt --example roundtrip -- [seed]`

use std::time::Instant;

use qdt::analysis::resolution_stats;
use qdt::rabi::{DarkCountModel, RabiParams};
use qdt::simulator::{build_detector, sample_dataset, ExperimentPlan, SyntheticDetectorSpec};
use qdt::state::DiagonalState;
use qdt::tomography::reconstruct;
use qdt::TomographyConfig;

const TIMES_US: [f64; 8] = [0.0, 2.52, 3.64, 5.6, 8.4, 12.6, 18.48, 28.0];

fn main() -> qdt::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let rabi = RabiParams::from_cyclic_khz(8.2)?;
    let state = DiagonalState::gaussian(35.4, 6.4)?;
    let spec =
        SyntheticDetectorSpec::new(0.4, DarkCountModel::new(0.27)?, 0.0, state.n_max() + 10)?;
    let v_true = build_detector(&spec)?;
    let truth = resolution_stats(&v_true, &state, &rabi, &TIMES_US)?;
    let plan = ExperimentPlan {
        times_us: TIMES_US.to_vec(),
        shots_per_time: 1100,
        rabi,
        state,
        rng_seed: seed,
    };
    let data = sample_dataset(&plan, &v_true)?;

    let start = Instant::now();
    let result = reconstruct(&data, &TomographyConfig::default().with_seed(seed))?;
    let stats = resolution_stats(&result.v, &result.rho, &result.rabi, data.times_us())?;
    println!(
        "seed {seed}: cost {:.4}, converged {} after {} iterations in {:.1?}",
        result.final_cost,
        result.converged,
        result.outer_iterations,
        start.elapsed()
    );
    println!(
        "  omega ratio {:.4}  diagonal {:.3} (true {:.3})  sigma {:.3} (true {:.3})",
        result.omega_r() / rabi.omega_r(),
        stats.diagonal_mass,
        truth.diagonal_mass,
        stats.sigma,
        truth.sigma
    );
    println!(
        "  rho mean {:.2} std {:.2}",
        result.rho.mean(),
        result.rho.std()
    );
    Ok(())
}
