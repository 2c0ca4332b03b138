use serde::Serialize;

use qdt::io::ingest;
use qdt::TomographyConfig;

use super::reconstruct::{learning_rows, LearningRow};
use super::{parse_indices, read_input, CliError, CliResult, Outcome, Run};
use crate::cli::LearnTestArgs;

#[derive(Serialize)]
struct Report {
    data: String,
    config: TomographyConfig,
    seed: u64,
    rows: Vec<LearningRow>,
}

pub fn run(args: &LearnTestArgs, seed: u64) -> CliResult<Outcome> {
    let data = read_input(&args.data, ingest)?;
    let config = args.tomography.config(seed);
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let indices = parse_indices(&args.held_out, data.len())?;
    let rows = learning_rows(&data, &indices, &config)?;

    let mut run = Run::start("learn-test", &args.out, &config, seed)?;
    run.input(&args.data);
    run.table(
        "learning.csv",
        &["held_out", "time_us", "fidelity", "final_cost"],
        rows.iter()
            .map(|r| vec![r.held_out as f64, r.time_us, r.fidelity, r.final_cost]),
    )?;
    let all_converged = rows.iter().all(|r| r.converged);
    run.json(
        "learning.json",
        &Report {
            data: args.data.display().to_string(),
            config,
            seed,
            rows,
        },
    )?;
    run.finish()?;
    Ok(if all_converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}
