use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Statistical distance minimized by the reconstruction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// Summed squared Hellinger distance over all times.
    #[default]
    Hellinger,
    /// Summed Kullback–Leibler divergence `D(P_exp ‖ P_V)`.
    KullbackLeibler,
}

/// How a block moves along its negative gradient while staying on the simplex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Euclidean step followed by projection onto the simplex.
    Projected,
    /// Multiplicative (exponentiated-gradient) step followed by
    /// renormalization, the relative-entropy projection onto the simplex.
    #[default]
    Multiplicative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TomographyConfig {
    /// The loop stops once the cost falls to this value.
    pub cost_cutoff: f64,
    pub max_outer_iters: usize,
    pub inner_iters_v: usize,
    pub inner_iters_rho: usize,
    pub inner_iters_omega: usize,
    /// Initial step sizes; each block adapts its own by backtracking.
    pub step_v: f64,
    pub step_rho: f64,
    pub step_log_omega: f64,
    /// Step multiplier applied after every accepted step.
    pub step_growth: f64,
    /// Halvings tried before a block gives up on the current iterate.
    pub max_halvings: usize,
    pub rng_seed: u64,
    pub bootstrap_replicas: usize,
    pub cost: CostKind,
    pub update: UpdateRule,
    /// Divide the gradient of column `m` of `V` by the summed arrival
    /// probability of `m` over all times, so rarely excited columns move as
    /// fast as frequently excited ones.
    pub precondition_v: bool,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            cost_cutoff: 0.01,
            max_outer_iters: 5000,
            inner_iters_v: 50,
            inner_iters_rho: 20,
            inner_iters_omega: 5,
            step_v: 1.0,
            step_rho: 0.1,
            step_log_omega: 1e-3,
            step_growth: 1.5,
            max_halvings: 30,
            rng_seed: 0,
            bootstrap_replicas: 20,
            cost: CostKind::Hellinger,
            update: UpdateRule::Multiplicative,
            precondition_v: true,
        }
    }
}

impl TomographyConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.cost_cutoff > 0.0 && self.cost_cutoff.is_finite()) {
            return bad("cost cutoff must be > 0");
        }
        if self.max_outer_iters == 0
            || self.inner_iters_v == 0
            || self.inner_iters_rho == 0
            || self.inner_iters_omega == 0
        {
            return bad("iteration counts must be >= 1");
        }
        for step in [self.step_v, self.step_rho, self.step_log_omega] {
            if !(step > 0.0 && step.is_finite()) {
                return bad("step sizes must be > 0");
            }
        }
        if !(self.step_growth >= 1.0 && self.step_growth.is_finite()) {
            return bad("step growth must be >= 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TomographyConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_zero_iterations() {
        let cfg = TomographyConfig {
            inner_iters_rho: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_fills_missing_fields() {
        let cfg: TomographyConfig =
            serde_json::from_str(r#"{"rng_seed": 9, "cost": "kullback_leibler"}"#).unwrap();
        assert_eq!(cfg.rng_seed, 9);
        assert_eq!(cfg.cost, CostKind::KullbackLeibler);
        assert_eq!(cfg.inner_iters_v, 50);
    }
}
