//! Leave-one-out prediction of held-out histograms.

use rayon::prelude::*;

use crate::dataset::HistogramDataset;
use crate::error::{Error, Result};
use crate::prob::fidelity;
use crate::scalar::Real;

use super::config::TomographyConfig;
use super::engine::{reconstruct, TomographyResult};

#[derive(Clone, Debug)]
pub struct LearningOutcome<T> {
    pub held_out: usize,
    pub time_us: T,
    /// Fidelity of the prediction with the held-out histogram.
    pub fidelity: T,
    pub training: TomographyResult<T>,
}

/// Reconstructs without time `j` and returns the fidelity of the predicted
/// `P_V(n | t_j)` with the held-out histogram.
pub fn learning_test<T: Real>(
    data: &HistogramDataset<T>,
    j: usize,
    config: &TomographyConfig,
) -> Result<T> {
    learning_test_detailed(data, j, config).map(|o| o.fidelity)
}

pub fn learning_test_detailed<T: Real>(
    data: &HistogramDataset<T>,
    j: usize,
    config: &TomographyConfig,
) -> Result<LearningOutcome<T>> {
    if data.len() < 3 {
        return Err(Error::InvalidDataset(format!(
            "learning test needs at least 3 times, got {}",
            data.len()
        )));
    }
    let training = reconstruct(&data.without(j)?, config)?;
    let time_us = data.times_us()[j];
    let held_out = &data.histograms()[j];
    let mut predicted = training.predict(time_us).into_vec();
    let mut target = held_out.to_vec();
    let len = predicted.len().max(target.len());
    predicted.resize(len, T::zero());
    target.resize(len, T::zero());
    Ok(LearningOutcome {
        held_out: j,
        time_us,
        fidelity: fidelity(&predicted, &target),
        training,
    })
}

/// Learning-test fidelity for every time, computed in parallel.
pub fn learning_curve<T: Real>(
    data: &HistogramDataset<T>,
    config: &TomographyConfig,
) -> Result<Vec<T>> {
    (0..data.len())
        .into_par_iter()
        .map(|j| learning_test(data, j, config))
        .collect()
}
