use serde::Serialize;

use qdt::io::{write_dataset_csv, write_detector_csv, write_rho_csv};
use qdt::simulator::{build_detector, sample_dataset};
use qdt::{DarkCountModel, DiagonalState, ExperimentPlan, RabiParams, SyntheticDetectorSpec};

use super::{CliError, CliResult, Outcome, Run};
use crate::cli::SimulateArgs;

/// Extra detector rows above the largest atom number.
const DETECTOR_MARGIN: usize = 10;

#[derive(Serialize)]
struct Truth {
    times_us: Vec<f64>,
    shots: u64,
    omega_khz: f64,
    omega_r_rad_per_s: f64,
    n_mean: f64,
    n_std: f64,
    sigma: f64,
    dark: f64,
    loss: f64,
    kernel: String,
    detector_nmax: usize,
    seed: u64,
}

pub fn run(args: &SimulateArgs, seed: u64) -> CliResult<Outcome> {
    if args.times.is_empty() {
        return Err(CliError::Usage("--times needs at least one value".into()));
    }
    let rabi = RabiParams::from_cyclic_khz(args.omega_khz)?;
    let state = DiagonalState::gaussian(args.n_mean, args.n_std)?;
    let n_max = args
        .detector_nmax
        .unwrap_or(state.n_max() + DETECTOR_MARGIN);
    if n_max < state.n_max() {
        return Err(CliError::Usage(format!(
            "--detector-nmax {n_max} is below the largest atom number {}",
            state.n_max()
        )));
    }
    let noise = &args.detector;
    let spec = SyntheticDetectorSpec::new(
        noise.sigma,
        DarkCountModel::new(noise.dark)?,
        noise.loss,
        n_max,
    )?
    .with_kernel(noise.kernel.into());
    let v = build_detector(&spec)?;
    let plan = ExperimentPlan {
        times_us: args.times.clone(),
        shots_per_time: args.shots,
        rabi,
        state: state.clone(),
        rng_seed: seed,
    };
    let data = sample_dataset(&plan, &v)?;

    let truth = Truth {
        times_us: args.times.clone(),
        shots: args.shots,
        omega_khz: args.omega_khz,
        omega_r_rad_per_s: rabi.omega_r(),
        n_mean: args.n_mean,
        n_std: args.n_std,
        sigma: noise.sigma,
        dark: noise.dark,
        loss: noise.loss,
        kernel: format!("{:?}", noise.kernel).to_lowercase(),
        detector_nmax: n_max,
        seed,
    };
    let mut run = Run::start("simulate", &args.out, &truth, seed)?;
    write_dataset_csv(&data, run.create("dataset.csv")?)?;
    write_detector_csv(&v, run.create("v_true.csv")?)?;
    write_rho_csv(state.as_slice(), run.create("rho_true.csv")?)?;
    run.json("truth.json", &truth)?;
    run.finish()?;
    Ok(Outcome::Done)
}
