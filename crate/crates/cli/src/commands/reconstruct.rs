use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use qdt::analysis::resolution_stats;
use qdt::io::{fmt_real, ingest, write_detector_csv, write_rho_csv};
use qdt::tomography::{bootstrap, learning_test_detailed, reconstruct, Spread};
use qdt::{HistogramDataset, TomographyConfig, TomographyResult};

use super::{parse_indices, read_input, CliError, CliResult, Outcome, Run};
use crate::cli::ReconstructArgs;

#[derive(Serialize)]
struct InitialFit {
    mean_n: f64,
    std_n: f64,
    offset: f64,
    omega_r_rad_per_s: f64,
    rms_residual: f64,
    std_fallback: bool,
}

#[derive(Serialize)]
struct BootstrapReport {
    replicas: usize,
    converged: usize,
    omega_r_rad_per_s: Spread,
    cyclic_khz: Spread,
    sigma: Spread,
    diagonal_mass: Spread,
    final_cost: Spread,
}

#[derive(Serialize)]
pub struct LearningRow {
    pub held_out: usize,
    pub time_us: f64,
    pub fidelity: f64,
    pub final_cost: f64,
    pub converged: bool,
}

#[derive(Serialize)]
struct Report {
    data: String,
    times_us: Vec<f64>,
    shots: Vec<u64>,
    n_max: usize,
    omega_r_rad_per_s: f64,
    cyclic_khz: f64,
    mean_n: f64,
    std_n: f64,
    diagonal_mass: f64,
    sigma: f64,
    initial_fit: InitialFit,
    initial_cost: f64,
    final_cost: f64,
    converged: bool,
    outer_iterations: usize,
    cost_trace: Vec<f64>,
    fidelities: Vec<f64>,
    config: TomographyConfig,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bootstrap: Option<BootstrapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    learning: Option<Vec<LearningRow>>,
}

/// Leave-one-out fidelities for the selected times, in index order.
pub fn learning_rows(
    data: &HistogramDataset,
    indices: &[usize],
    config: &TomographyConfig,
) -> CliResult<Vec<LearningRow>> {
    let rows = indices
        .par_iter()
        .map(|&j| {
            learning_test_detailed(data, j, config).map(|o| LearningRow {
                held_out: j,
                time_us: o.time_us,
                fidelity: o.fidelity,
                final_cost: o.training.final_cost,
                converged: o.training.converged,
            })
        })
        .collect::<qdt::Result<Vec<_>>>()?;
    Ok(rows)
}

pub fn run(args: &ReconstructArgs, seed: u64) -> CliResult<Outcome> {
    let data = read_input(&args.data, ingest)?;
    let mut config = args.tomography.config(seed);
    config.bootstrap_replicas = args.bootstrap;
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let learn = args
        .learn_test
        .as_deref()
        .map(|spec| parse_indices(spec, data.len()))
        .transpose()?;

    let result = reconstruct(&data, &config)?;
    let boot = if args.bootstrap > 0 && result.converged {
        Some(bootstrap(&result, &data, &config)?)
    } else {
        if args.bootstrap > 0 {
            eprintln!("warning: skipping bootstrap of an unconverged reconstruction");
        }
        None
    };
    let learning = learn
        .map(|idx| learning_rows(&data, &idx, &config))
        .transpose()?;

    let mut run = Run::start("reconstruct", &args.out, &config, seed)?;
    run.input(&args.data);
    write_detector_csv(&result.v, run.create("v.csv")?)?;
    write_rho_csv(result.rho.as_slice(), run.create("rho.csv")?)?;
    run.table(
        "predicted.csv",
        &["time_us", "n", "p_model", "p_data"],
        prediction_rows(&result, &data),
    )?;
    if let Some(b) = &boot {
        write_matrix(&mut run, "v_std.csv", &b.summary.v_std, result.v.dim())?;
    }
    let stats = resolution_stats(&result.v, &result.rho, &result.rabi, data.times_us())?;
    let report = Report {
        data: args.data.display().to_string(),
        times_us: data.times_us().to_vec(),
        shots: data.shot_counts(),
        n_max: result.v.n_max(),
        omega_r_rad_per_s: result.omega_r(),
        cyclic_khz: result.rabi.cyclic_khz(),
        mean_n: result.rho.mean(),
        std_n: result.rho.std(),
        diagonal_mass: stats.diagonal_mass,
        sigma: stats.sigma,
        initial_fit: initial_fit(&result),
        initial_cost: result.initial_cost,
        final_cost: result.final_cost,
        converged: result.converged,
        outer_iterations: result.outer_iterations,
        cost_trace: result.cost_trace.clone(),
        fidelities: result.fidelities(&data),
        config: config.clone(),
        seed,
        bootstrap: boot.map(|b| BootstrapReport {
            replicas: b.replicas.len(),
            converged: b.summary.converged,
            omega_r_rad_per_s: b.summary.omega_r,
            cyclic_khz: b.summary.cyclic_khz,
            sigma: b.summary.sigma,
            diagonal_mass: b.summary.diagonal_mass,
            final_cost: b.summary.final_cost,
        }),
        learning,
    };
    run.json("report.json", &report)?;
    run.finish()?;
    Ok(if result.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn initial_fit(result: &TomographyResult) -> InitialFit {
    let fit = &result.initial_fit;
    InitialFit {
        mean_n: fit.mean_n,
        std_n: fit.std_n,
        offset: fit.offset,
        omega_r_rad_per_s: fit.rabi.omega_r(),
        rms_residual: fit.rms_residual,
        std_fallback: fit.std_fallback,
    }
}

fn prediction_rows(result: &TomographyResult, data: &HistogramDataset) -> Vec<Vec<f64>> {
    let mut rows = Vec::new();
    for (&t, hist) in data.times_us().iter().zip(data.histograms()) {
        let model = result.predict(t);
        for n in 0..model.len().max(hist.len()) {
            rows.push(vec![t, n as f64, model.prob(n), hist.prob(n)]);
        }
    }
    rows
}

fn write_matrix(run: &mut Run, name: &str, entries: &[f64], dim: usize) -> CliResult<()> {
    let path = run.path(name);
    let io = |source| CliError::Io {
        path: path.clone(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io)?);
    for row in entries.chunks(dim.max(1)) {
        let line: Vec<String> = row.iter().map(|&x| fmt_real(x)).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Whether `dir` holds the files `analyze` needs.
pub fn missing_outputs(dir: &Path) -> Vec<&'static str> {
    ["v.csv", "rho.csv", "report.json"]
        .into_iter()
        .filter(|f| !dir.join(f).is_file())
        .collect()
}
