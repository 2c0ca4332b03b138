use std::fs::File;

use serde::{Deserialize, Serialize};

use qdt::analysis::{
    assignment_fidelity, fisher_sweep, linspace, resolution_stats, wigner, PovmSet,
    WIGNER_HALF_WIDTH,
};
use qdt::io::{read_detector_csv, read_json, read_rho_csv};
use qdt::RabiParams;

use super::reconstruct::missing_outputs;
use super::{read_input, CliError, CliResult, Outcome, Run};
use crate::cli::AnalyzeArgs;

/// The fields of `report.json` that analysis depends on.
#[derive(Deserialize)]
struct ReportHeader {
    omega_r_rad_per_s: f64,
    times_us: Vec<f64>,
}

#[derive(Serialize)]
struct WignerSummary {
    n: usize,
    min: f64,
    max: f64,
    file: String,
}

#[derive(Serialize)]
struct FisherSummary {
    ideal: bool,
    mean_n: f64,
    max_fisher: f64,
    theta_at_max: f64,
}

#[derive(Serialize)]
struct Analysis {
    n_max: usize,
    completeness_residual: f64,
    diagonal_mass: f64,
    sigma: f64,
    offset_min: i64,
    offset_dist: Vec<f64>,
    /// `V[m][m]` for every arrival number `m`.
    assignment_fidelities: Vec<f64>,
    wigner: Vec<WignerSummary>,
    fisher: FisherSummary,
}

pub fn run(args: &AnalyzeArgs, seed: u64) -> CliResult<Outcome> {
    let dir = &args.result;
    let missing = missing_outputs(dir);
    if !missing.is_empty() {
        return Err(CliError::MissingFiles {
            dir: dir.clone(),
            files: missing,
        });
    }
    let v_path = dir.join("v.csv");
    let rho_path = dir.join("rho.csv");
    let report_path = dir.join("report.json");
    let v = read_input(&v_path, |p| read_detector_csv(File::open(p)?))?;
    let rho = read_input(&rho_path, |p| read_rho_csv(File::open(p)?))?;
    let header: ReportHeader = read_input(&report_path, read_json)?;
    if let Some(&n) = args.wigner.iter().find(|&&n| n > v.n_max()) {
        return Err(CliError::Usage(format!(
            "--wigner {n} beyond detector n_max {}",
            v.n_max()
        )));
    }
    if args.theta_points < 2 || !(args.theta_min < args.theta_max) {
        return Err(CliError::Usage(
            "theta sweep needs >= 2 points and theta-min < theta-max".into(),
        ));
    }
    let rabi = RabiParams::new(header.omega_r_rad_per_s)?;
    let povm = PovmSet::from_matrix(&v);
    let stats = resolution_stats(&v, &rho, &rabi, &header.times_us)?;
    let assignment = (0..=v.n_max())
        .map(|m| assignment_fidelity(&v, m))
        .collect::<qdt::Result<Vec<_>>>()?;
    let axis = linspace(-WIGNER_HALF_WIDTH, WIGNER_HALF_WIDTH, args.wigner_points);
    let grids = args
        .wigner
        .iter()
        .map(|&n| wigner(&povm, n, &axis, &axis))
        .collect::<qdt::Result<Vec<_>>>()?;
    let thetas = linspace(args.theta_min, args.theta_max, args.theta_points);
    let sweep = fisher_sweep(if args.ideal { None } else { Some(&v) }, &rho, &thetas);

    let out = args.out.as_ref().unwrap_or(dir);
    let mut run = Run::start("analyze", out, args_echo(args), seed)?;
    for input in [&v_path, &rho_path, &report_path] {
        run.input(input);
    }
    let mut wigner_summary = Vec::new();
    for grid in &grids {
        let file = format!("wigner_n{}.csv", grid.n);
        let rows = grid
            .x_axis
            .iter()
            .enumerate()
            .flat_map(|(i, &x)| {
                grid.p_axis
                    .iter()
                    .enumerate()
                    .map(move |(j, &p)| (i, j, x, p))
            })
            .map(|(i, j, x, p)| vec![x, p, grid.get(i, j)]);
        run.table(&file, &["x", "p", "value"], rows)?;
        wigner_summary.push(WignerSummary {
            n: grid.n,
            min: grid.min(),
            max: grid.max(),
            file,
        });
    }
    run.table(
        "fisher.csv",
        &["theta", "F", "F_ideal"],
        sweep
            .iter()
            .map(|pt| vec![pt.theta, pt.fisher, pt.fisher_ideal]),
    )?;
    let peak = sweep
        .iter()
        .max_by(|a, b| a.fisher.total_cmp(&b.fisher))
        .expect("at least two sweep points");
    let analysis = Analysis {
        n_max: v.n_max(),
        completeness_residual: povm.completeness_residual(),
        diagonal_mass: stats.diagonal_mass,
        sigma: stats.sigma,
        offset_min: stats.offset_min,
        offset_dist: stats.offset_dist.clone(),
        assignment_fidelities: assignment,
        wigner: wigner_summary,
        fisher: FisherSummary {
            ideal: args.ideal,
            mean_n: rho.mean(),
            max_fisher: peak.fisher,
            theta_at_max: peak.theta,
        },
    };
    run.json("analysis.json", &analysis)?;
    run.finish()?;
    Ok(Outcome::Done)
}

fn args_echo(args: &AnalyzeArgs) -> serde_json::Value {
    serde_json::json!({
        "ideal": args.ideal,
        "wigner": args.wigner,
        "wigner_points": args.wigner_points,
        "theta_min": args.theta_min,
        "theta_max": args.theta_max,
        "theta_points": args.theta_points,
    })
}
