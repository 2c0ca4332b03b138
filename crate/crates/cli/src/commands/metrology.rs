use std::fs::File;

use rayon::prelude::*;
use serde::Serialize;

use qdt::analysis::linspace;
use qdt::io::read_detector_csv;
use qdt::metrology::{
    gain_map_with, gain_scaling_with, log_axis, optimize_squeezing, power_law_exponent,
    PhaseEstimator, ScalingPoint, SectorCache, MAX_ATOMS, S_MAX, S_MIN,
};
use qdt::simulator::build_detector;
use qdt::{DarkCountModel, DetectorMatrix, SqueezedEnsemble, SyntheticDetectorSpec};

use super::{read_input, CliError, CliResult, Outcome, Run};
use crate::cli::MetrologyArgs;

/// Detectors are enlarged to this many counts so every ensemble fits.
const DETECTOR_NMAX: usize = MAX_ATOMS + 20;
const S_SWEEP_POINTS: usize = 25;

#[derive(Serialize)]
struct WorkingPoint {
    s: f64,
    gain_ideal: f64,
    gain_noisy: f64,
    theta_ideal: f64,
    theta_noisy: f64,
}

#[derive(Serialize)]
struct MapSummary {
    max_gain: f64,
    s_at_max: f64,
    dn_at_max: f64,
    theta_at_max: f64,
}

#[derive(Serialize)]
struct ScalingSummary {
    exponent_ideal: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent_noisy: Option<f64>,
    points_ideal: Vec<ScalingPoint<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points_noisy: Option<Vec<ScalingPoint<f64>>>,
}

#[derive(Serialize)]
struct Report {
    source: String,
    n_mean: f64,
    dn: f64,
    sweep: Vec<WorkingPoint>,
    best_ideal: ScalingPoint<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_noisy: Option<ScalingPoint<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    map: Option<MapSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaling: Option<ScalingSummary>,
}

pub fn run(args: &MetrologyArgs, seed: u64) -> CliResult<Outcome> {
    let s_axis = args
        .s
        .clone()
        .unwrap_or_else(|| log_axis(S_MIN, S_MAX, S_SWEEP_POINTS));
    if s_axis.is_empty() || s_axis.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(CliError::Usage("--s values must be positive".into()));
    }
    if !args.no_map
        && (args.map_s_points == 0 || args.map_dn_points == 0 || !(args.map_dn_max >= 0.0))
    {
        return Err(CliError::Usage(
            "gain map needs >= 1 point per axis and --map-dn-max >= 0".into(),
        ));
    }
    if !args.no_scaling && args.scaling_n.len() < 2 {
        return Err(CliError::Usage(
            "--scaling-n needs at least two mean atom numbers".into(),
        ));
    }
    let (source, detector) = load_detector(args)?;
    let noisy = detector.as_ref();
    let cache = SectorCache::new();

    let sweep = s_axis
        .par_iter()
        .map(|&s| {
            let ensemble = SqueezedEnsemble::gaussian(s, args.n_mean, args.dn)?;
            let ideal = PhaseEstimator::new(&ensemble, None, &cache)?.optimize()?;
            let real = match noisy {
                Some(v) => PhaseEstimator::new(&ensemble, Some(v), &cache)?.optimize()?,
                None => ideal,
            };
            Ok(WorkingPoint {
                s,
                gain_ideal: ideal.gain,
                gain_noisy: real.gain,
                theta_ideal: ideal.theta,
                theta_noisy: real.theta,
            })
        })
        .collect::<qdt::Result<Vec<_>>>()?;
    let best_ideal = optimize_squeezing(args.n_mean, args.dn, None, &cache)?;
    let best_noisy = noisy
        .map(|v| optimize_squeezing(args.n_mean, args.dn, Some(v), &cache))
        .transpose()?;

    let map = if args.no_map {
        None
    } else {
        let dn_axis = linspace(0.0, args.map_dn_max, args.map_dn_points);
        Some(gain_map_with(
            args.n_mean,
            noisy,
            &log_axis(S_MIN, S_MAX, args.map_s_points),
            &dn_axis,
            &cache,
        )?)
    };
    let scaling = if args.no_scaling {
        None
    } else {
        let ideal = gain_scaling_with(None, &args.scaling_n, &cache)?;
        let real = noisy
            .map(|v| gain_scaling_with(Some(v), &args.scaling_n, &cache))
            .transpose()?;
        Some((ideal, real))
    };

    let mut run = Run::start("metrology", &args.out, args_echo(args, &source), seed)?;
    if let Some(path) = &args.detector {
        run.input(path);
    }
    run.table(
        "gain_vs_s.csv",
        &["s", "G_ideal", "G_noisy", "theta_ideal", "theta_noisy"],
        sweep.iter().map(|w| {
            vec![
                w.s,
                w.gain_ideal,
                w.gain_noisy,
                w.theta_ideal,
                w.theta_noisy,
            ]
        }),
    )?;
    let map_summary = match &map {
        Some(m) => {
            let cells = m
                .s_axis
                .iter()
                .flat_map(|&s| m.dn_axis.iter().map(move |&d| (s, d)));
            run.table(
                "gain_map.csv",
                &["s", "dn", "G", "theta"],
                cells
                    .zip(m.gain.iter().zip(&m.theta_opt))
                    .map(|((s, d), (&g, &t))| vec![s, d, g, t]),
            )?;
            let best = (0..m.gain.len())
                .max_by(|&a, &b| m.gain[a].total_cmp(&m.gain[b]))
                .expect("non-empty map");
            let dn_len = m.dn_axis.len();
            Some(MapSummary {
                max_gain: m.gain[best],
                s_at_max: m.s_axis[best / dn_len],
                dn_at_max: m.dn_axis[best % dn_len],
                theta_at_max: m.theta_opt[best],
            })
        }
        None => None,
    };
    let scaling_summary = match scaling {
        Some((ideal, real)) => {
            run.table(
                "gain_scaling.csv",
                &["n_mean", "dn", "G_ideal", "G_noisy", "s_ideal", "s_noisy"],
                ideal.iter().enumerate().map(|(i, p)| {
                    let q = real.as_ref().map_or(p, |r| &r[i]);
                    vec![p.n_mean, p.dn, p.gain, q.gain, p.s_opt, q.s_opt]
                }),
            )?;
            Some(ScalingSummary {
                exponent_ideal: exponent(&ideal)?,
                exponent_noisy: real.as_deref().map(exponent).transpose()?,
                points_ideal: ideal,
                points_noisy: real,
            })
        }
        None => None,
    };
    let report = Report {
        source,
        n_mean: args.n_mean,
        dn: args.dn,
        sweep,
        best_ideal,
        best_noisy,
        map: map_summary,
        scaling: scaling_summary,
    };
    run.json("report.json", &report)?;
    run.finish()?;
    Ok(Outcome::Done)
}

fn exponent(points: &[ScalingPoint<f64>]) -> qdt::Result<f64> {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.n_mean, p.gain)).collect();
    power_law_exponent(&xy)
}

fn load_detector(args: &MetrologyArgs) -> CliResult<(String, Option<DetectorMatrix>)> {
    if args.ideal {
        return Ok(("ideal".into(), None));
    }
    if args.synthetic {
        let noise = &args.noise;
        let spec = SyntheticDetectorSpec::new(
            noise.sigma,
            DarkCountModel::new(noise.dark)?,
            noise.loss,
            DETECTOR_NMAX,
        )?
        .with_kernel(noise.kernel.into());
        return Ok(("synthetic".into(), Some(build_detector(&spec)?)));
    }
    let path = args
        .detector
        .as_ref()
        .expect("clap enforces one detector source");
    let v = read_input(path, |p| read_detector_csv(File::open(p)?))?;
    let v = if v.n_max() < DETECTOR_NMAX {
        let template = args.template.unwrap_or(v.n_max() / 2);
        v.extend_shift_invariant(DETECTOR_NMAX, template)
            .map_err(|e| CliError::Usage(e.to_string()))?
    } else {
        v
    };
    Ok((path.display().to_string(), Some(v)))
}

fn args_echo(args: &MetrologyArgs, source: &str) -> serde_json::Value {
    serde_json::json!({
        "source": source,
        "sigma": args.noise.sigma,
        "dark": args.noise.dark,
        "loss": args.noise.loss,
        "template": args.template,
        "n_mean": args.n_mean,
        "dn": args.dn,
        "s": args.s,
        "map": !args.no_map,
        "map_s_points": args.map_s_points,
        "map_dn_max": args.map_dn_max,
        "map_dn_points": args.map_dn_points,
        "scaling": !args.no_scaling,
        "scaling_n": args.scaling_n,
    })
}
