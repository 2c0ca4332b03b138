//! Resampling error bars for a converged reconstruction.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::resolution_stats;
use crate::dataset::HistogramDataset;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::simulator::sample_histograms;

use super::config::TomographyConfig;
use super::engine::{reconstruct, TomographyResult};

/// Mean and sample standard deviation of one quantity over the replicas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub omega_r: Spread,
    pub cyclic_khz: Spread,
    pub sigma: Spread,
    pub diagonal_mass: Spread,
    pub final_cost: Spread,
    /// Replicas that reached the cost cutoff.
    pub converged: usize,
    /// Entry-wise mean and spread of `V` (row-major) over replicas sharing
    /// the reference dimension.
    pub v_mean: Vec<f64>,
    pub v_std: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BootstrapEnsemble<T> {
    pub replicas: Vec<TomographyResult<T>>,
    pub summary: BootstrapSummary,
}

/// Resamples each histogram from the fitted model at its original shot
/// count and reconstructs again. Replica `k = 1 ..= K` samples and
/// initializes with seed `config.rng_seed + k`. Replicas run in parallel and
/// are returned in index order.
pub fn bootstrap<T: Real>(
    result: &TomographyResult<T>,
    data: &HistogramDataset<T>,
    config: &TomographyConfig,
) -> Result<BootstrapEnsemble<T>> {
    config.validate()?;
    if !result.converged {
        return Err(Error::InvalidParameter(
            "bootstrap needs a converged reconstruction".into(),
        ));
    }
    let shots = data.shot_counts();
    let replicas = (1..=config.bootstrap_replicas as u64)
        .into_par_iter()
        .map(|k| {
            let seed = config.rng_seed.wrapping_add(k);
            let sample = sample_histograms(
                &result.v,
                &result.rho,
                &result.rabi,
                data.times_us(),
                &shots,
                seed,
            )?;
            reconstruct(&sample, &config.clone().with_seed(seed))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(result, &replicas, data.times_us())?;
    Ok(BootstrapEnsemble { replicas, summary })
}

fn summarize<T: Real>(
    reference: &TomographyResult<T>,
    replicas: &[TomographyResult<T>],
    times_us: &[T],
) -> Result<BootstrapSummary> {
    let collect =
        |f: &dyn Fn(&TomographyResult<T>) -> f64| replicas.iter().map(f).collect::<Vec<_>>();
    let stats = replicas
        .iter()
        .map(|r| resolution_stats(&r.v, &r.rho, &r.rabi, times_us))
        .collect::<Result<Vec<_>>>()?;
    let dim = reference.v.dim();
    let same_dim: Vec<&TomographyResult<T>> =
        replicas.iter().filter(|r| r.v.dim() == dim).collect();
    let (v_mean, v_std) = (0..dim * dim)
        .map(|i| {
            let s = Spread::of(
                &same_dim
                    .iter()
                    .map(|r| r.v.as_slice()[i].f64())
                    .collect::<Vec<_>>(),
            );
            (s.mean, s.std)
        })
        .unzip();
    Ok(BootstrapSummary {
        omega_r: Spread::of(&collect(&|r| r.omega_r().f64())),
        cyclic_khz: Spread::of(&collect(&|r| r.rabi.cyclic_khz().f64())),
        sigma: Spread::of(&stats.iter().map(|s| s.sigma.f64()).collect::<Vec<_>>()),
        diagonal_mass: Spread::of(
            &stats
                .iter()
                .map(|s| s.diagonal_mass.f64())
                .collect::<Vec<_>>(),
        ),
        final_cost: Spread::of(&collect(&|r| r.final_cost.f64())),
        converged: replicas.iter().filter(|r| r.converged).count(),
        v_mean,
        v_std,
    })
}
