//! Per-pulse-duration count histograms.

use crate::error::{Error, Result};
use crate::prob::ProbVector;
use crate::scalar::Real;

/// Histograms `P_exp(n | t_j)` with their raw counts. Times are pulse
/// durations in microseconds, strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramDataset<T> {
    times_us: Vec<T>,
    counts: Vec<Vec<u64>>,
    histograms: Vec<ProbVector<T>>,
}

impl<T: Real> HistogramDataset<T> {
    /// Builds from raw counts; `counts[j][n]` is the number of shots at time
    /// `j` that registered `n` atoms. Every histogram is stored with the
    /// common width `0 ..= n_max`, so trailing zeros carry no meaning.
    pub fn from_counts(times_us: Vec<T>, mut counts: Vec<Vec<u64>>) -> Result<Self> {
        if times_us.is_empty() {
            return Err(Error::InvalidDataset("no time points".into()));
        }
        if times_us.len() != counts.len() {
            return Err(Error::InvalidDataset(format!(
                "{} times but {} histograms",
                times_us.len(),
                counts.len()
            )));
        }
        for (j, &t) in times_us.iter().enumerate() {
            if !t.is_finite() || t < T::zero() {
                return Err(Error::InvalidDataset(format!(
                    "time {j} is {t}, expected >= 0"
                )));
            }
            if j > 0 && t <= times_us[j - 1] {
                return Err(Error::InvalidDataset(format!(
                    "times must be strictly increasing ({} then {t})",
                    times_us[j - 1]
                )));
            }
        }
        let width = counts
            .iter()
            .map(|c| c.iter().rposition(|&x| x > 0).map_or(1, |n| n + 1))
            .max()
            .unwrap_or(1);
        for c in &mut counts {
            c.resize(width, 0);
        }
        let histograms = counts
            .iter()
            .enumerate()
            .map(|(j, c)| {
                ProbVector::from_counts(c)
                    .map_err(|_| Error::InvalidDataset(format!("histogram {j} has no shots")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            times_us,
            counts,
            histograms,
        })
    }

    /// Builds from `(time, counts)` rows in any order. Rows sharing a time are
    /// merged by summing their counts.
    pub fn from_rows(mut rows: Vec<(T, Vec<u64>)>) -> Result<Self> {
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut times: Vec<T> = Vec::new();
        let mut counts: Vec<Vec<u64>> = Vec::new();
        for (t, c) in rows {
            match times.last() {
                Some(&last) if last == t => {
                    let merged = counts.last_mut().expect("counts track times");
                    if merged.len() < c.len() {
                        merged.resize(c.len(), 0);
                    }
                    for (slot, x) in merged.iter_mut().zip(c) {
                        *slot += x;
                    }
                }
                _ => {
                    times.push(t);
                    counts.push(c);
                }
            }
        }
        Self::from_counts(times, counts)
    }

    /// Builds from probabilities, attributing `shots` repetitions to each
    /// histogram; counts are rounded.
    pub fn from_histograms(
        times_us: Vec<T>,
        histograms: Vec<ProbVector<T>>,
        shots: Vec<u64>,
    ) -> Result<Self> {
        if histograms.len() != shots.len() {
            return Err(Error::InvalidDataset(
                "one shot count per histogram required".into(),
            ));
        }
        if let Some(j) = shots.iter().position(|&s| s == 0) {
            return Err(Error::InvalidDataset(format!(
                "histogram {j} has zero shots"
            )));
        }
        let counts = histograms
            .iter()
            .zip(&shots)
            .map(|(h, &s)| {
                h.iter()
                    .map(|&p| (p * T::of(s as usize)).round().to_u64().unwrap_or(0))
                    .collect()
            })
            .collect();
        let mut data = Self::from_counts(times_us, counts)?;
        data.histograms = histograms;
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.times_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_us.is_empty()
    }

    pub fn times_us(&self) -> &[T] {
        &self.times_us
    }

    pub fn histograms(&self) -> &[ProbVector<T>] {
        &self.histograms
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn shot_counts(&self) -> Vec<u64> {
        self.counts.iter().map(|c| c.iter().sum()).collect()
    }

    /// Largest count observed at any time.
    pub fn n_max(&self) -> usize {
        self.histograms
            .iter()
            .map(|h| h.support_max())
            .max()
            .unwrap_or(0)
    }

    /// The dataset with time index `j` removed.
    pub fn without(&self, j: usize) -> Result<Self> {
        if j >= self.len() {
            return Err(Error::InvalidParameter(format!(
                "time index {j} out of range"
            )));
        }
        let mut out = self.clone();
        out.times_us.remove(j);
        out.counts.remove(j);
        out.histograms.remove(j);
        if out.is_empty() {
            return Err(Error::InvalidDataset("no time points left".into()));
        }
        Ok(out)
    }

    /// Mean and second moment of the counts at each time.
    pub fn count_moments(&self) -> Vec<(T, T)> {
        self.histograms
            .iter()
            .map(|h| {
                let mean = h.mean();
                (mean, h.variance() + mean * mean)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_merge_duplicate_times() {
        let rows = vec![(2.0f64, vec![1, 2]), (0.0, vec![5]), (2.0, vec![3, 0, 4])];
        let d = HistogramDataset::from_rows(rows).unwrap();
        assert_eq!(d.times_us(), &[0.0, 2.0]);
        assert_eq!(d.counts()[1], vec![4, 2, 4]);
        assert_eq!(d.shot_counts(), vec![5, 10]);
        assert_eq!(d.n_max(), 2);
    }

    #[test]
    fn rejects_non_increasing_times() {
        let r = HistogramDataset::from_counts(vec![1.0f64, 1.0], vec![vec![1], vec![1]]);
        assert!(r.is_err());
        let r = HistogramDataset::from_counts(vec![-1.0f64], vec![vec![1]]);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_empty_histogram() {
        assert!(HistogramDataset::from_counts(vec![0.0f64], vec![vec![0, 0]]).is_err());
    }
}
