//! Block-coordinate descent over `V`, `ρ` and `Ω_R`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::HistogramDataset;
use crate::detector::DetectorMatrix;
use crate::error::{Error, Result};
use crate::prob::{fidelity, project_simplex_in_place, ProbVector};
use crate::rabi::{ideal_distribution, RabiParams};
use crate::scalar::Real;
use crate::state::DiagonalState;

use super::config::{TomographyConfig, UpdateRule};
use super::fit::{fit_moments, initial_state, MomentFit};
use super::problem::TomographyProblem;

/// Clamp on the exponent of a multiplicative update.
const MAX_LOG_STEP: f64 = 50.0;
/// Smallest arrival weight used when rescaling a column gradient.
const PRECONDITION_FLOOR: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct TomographyResult<T> {
    pub v: DetectorMatrix<T>,
    pub rho: DiagonalState<T>,
    pub rabi: RabiParams<T>,
    /// Moment fits that seeded `ρ` and `Ω_R`.
    pub initial_fit: MomentFit<T>,
    pub initial_cost: T,
    pub final_cost: T,
    /// Cost before the first and after every outer iteration.
    pub cost_trace: Vec<T>,
    pub converged: bool,
    pub outer_iterations: usize,
}

impl<T: Real> TomographyResult<T> {
    pub fn omega_r(&self) -> T {
        self.rabi.omega_r()
    }

    /// Predicted detection distribution `P_V(n | t)`.
    pub fn predict(&self, t_us: T) -> ProbVector<T> {
        self.v
            .apply_dist(&ideal_distribution(&self.rho, &self.rabi, t_us))
    }

    /// Fidelity of the model prediction with each histogram of `data`.
    pub fn fidelities(&self, data: &HistogramDataset<T>) -> Vec<T> {
        data.times_us()
            .iter()
            .zip(data.histograms())
            .map(|(&t, h)| fidelity(&pad(&self.predict(t), h.len()), &pad(h, self.v.dim())))
            .collect()
    }
}

fn pad<T: Real>(p: &[T], len: usize) -> Vec<T> {
    let mut out = p.to_vec();
    if out.len() < len {
        out.resize(len, T::zero());
    }
    out
}

/// Starting point of a reconstruction.
#[derive(Clone, Debug)]
pub struct InitialGuess<T> {
    pub v: DetectorMatrix<T>,
    pub rho: DiagonalState<T>,
    pub rabi: RabiParams<T>,
}

/// Full reconstruction: moment-fit initialization, random `V`, then
/// block-coordinate descent until the cost reaches `config.cost_cutoff`.
pub fn reconstruct<T: Real>(
    data: &HistogramDataset<T>,
    config: &TomographyConfig,
) -> Result<TomographyResult<T>> {
    config.validate()?;
    let fit = fit_moments(data)?;
    let n_max = data.n_max();
    let rho = initial_state(&fit, n_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let guess = InitialGuess {
        v: DetectorMatrix::random(n_max, &mut rng),
        rho,
        rabi: fit.rabi,
    };
    reconstruct_from(data, config, guess, fit)
}

/// Descent from an explicit starting point.
pub fn reconstruct_from<T: Real>(
    data: &HistogramDataset<T>,
    config: &TomographyConfig,
    guess: InitialGuess<T>,
    initial_fit: MomentFit<T>,
) -> Result<TomographyResult<T>> {
    config.validate()?;
    if guess.v.n_max() < data.n_max() {
        return Err(Error::InvalidParameter(format!(
            "initial detector n_max {} below observed {}",
            guess.v.n_max(),
            data.n_max()
        )));
    }
    let problem = TomographyProblem::new(
        data,
        guess.v.n_max(),
        guess.rho.as_slice().len(),
        config.cost,
    )?;
    let mut state = Descent::new(&problem, config, guess);
    let initial_cost = state.cost;
    let mut trace = vec![initial_cost];
    let cutoff = T::lit(config.cost_cutoff);
    let mut outer = 0;
    while outer < config.max_outer_iters && state.cost > cutoff {
        outer += 1;
        let moved = state.v_block(config.inner_iters_v)
            | state.rho_block(config.inner_iters_rho)
            | state.omega_block(config.inner_iters_omega);
        trace.push(state.cost);
        if !moved {
            break;
        }
    }
    let final_cost = state.cost;
    let Descent { v, rho, omega, .. } = state;
    Ok(TomographyResult {
        v: DetectorMatrix::new(problem.dim() - 1, v)?,
        rho: DiagonalState::new(rho)?,
        rabi: RabiParams::new(omega)?,
        initial_fit,
        initial_cost,
        final_cost,
        cost_trace: trace,
        converged: final_cost <= cutoff,
        outer_iterations: outer,
    })
}

struct Descent<'a, T> {
    problem: &'a TomographyProblem<T>,
    rule: UpdateRule,
    precondition: bool,
    cutoff: T,
    growth: T,
    max_halvings: usize,
    v: Vec<T>,
    rho: Vec<T>,
    omega: T,
    binom: Vec<Vec<T>>,
    cost: T,
    step_v: T,
    step_rho: T,
    step_log_omega: T,
}

impl<'a, T: Real> Descent<'a, T> {
    fn new(
        problem: &'a TomographyProblem<T>,
        config: &TomographyConfig,
        guess: InitialGuess<T>,
    ) -> Self {
        let omega = guess.rabi.omega_r();
        let binom = problem.binomials(omega);
        let v = guess.v.as_slice().to_vec();
        let rho = guess.rho.as_slice().to_vec();
        let cost = problem.cost_of(&problem.detected(&v, &problem.ideal(&binom, &rho)));
        Self {
            problem,
            rule: config.update,
            precondition: config.precondition_v,
            cutoff: T::lit(config.cost_cutoff),
            growth: T::lit(config.step_growth),
            max_halvings: config.max_halvings,
            v,
            rho,
            omega,
            binom,
            cost,
            step_v: T::lit(config.step_v),
            step_rho: T::lit(config.step_rho),
            step_log_omega: T::lit(config.step_log_omega),
        }
    }

    fn v_block(&mut self, iters: usize) -> bool {
        let p = self.problem;
        let dim = p.dim();
        let ideal = p.ideal(&self.binom, &self.rho);
        let rule = self.rule;
        let column_scale = self.precondition.then(|| {
            let floor = T::lit(PRECONDITION_FLOOR);
            (0..dim)
                .map(|m| T::one() / ideal.iter().map(|pid| pid[m]).sum::<T>().max(floor))
                .collect::<Vec<T>>()
        });
        let mut moved = false;
        let mut scratch = Vec::with_capacity(dim);
        let mut column = vec![T::zero(); dim];
        for _ in 0..iters {
            if self.cost <= self.cutoff {
                break;
            }
            let residual = p.residual_grad(&p.detected(&self.v, &ideal));
            let mut grad = p.grad_v(&residual, &ideal);
            if let Some(scale) = &column_scale {
                for row in grad.chunks_mut(dim) {
                    for (g, &s) in row.iter_mut().zip(scale) {
                        *g *= s;
                    }
                }
            }
            let propose = |x: &[T], step: T| {
                let mut out = descend(x, &grad, step, rule);
                for m in 0..dim {
                    for n in 0..dim {
                        column[n] = out[n * dim + m];
                    }
                    restore_simplex(&mut column, rule, &mut scratch);
                    for n in 0..dim {
                        out[n * dim + m] = column[n];
                    }
                }
                out
            };
            let eval = |x: &[T]| p.cost_of(&p.detected(x, &ideal));
            match backtrack(
                &self.v,
                self.cost,
                &mut self.step_v,
                self.growth,
                self.max_halvings,
                propose,
                eval,
            ) {
                Some((x, c)) => {
                    self.v = x;
                    self.cost = c;
                    moved = true;
                }
                None => break,
            }
        }
        moved
    }

    fn rho_block(&mut self, iters: usize) -> bool {
        let p = self.problem;
        let rule = self.rule;
        let mut moved = false;
        let mut scratch = Vec::with_capacity(self.rho.len());
        for _ in 0..iters {
            if self.cost <= self.cutoff {
                break;
            }
            let ideal = p.ideal(&self.binom, &self.rho);
            let residual = p.residual_grad(&p.detected(&self.v, &ideal));
            let grad = p.grad_rho(&p.pull_back(&self.v, &residual), &self.binom);
            let propose = |x: &[T], step: T| {
                let mut out = descend(x, &grad, step, rule);
                restore_simplex(&mut out, rule, &mut scratch);
                out
            };
            let (v, binom) = (&self.v, &self.binom);
            let eval = |x: &[T]| p.cost_of(&p.detected(v, &p.ideal(binom, x)));
            match backtrack(
                &self.rho,
                self.cost,
                &mut self.step_rho,
                self.growth,
                self.max_halvings,
                propose,
                eval,
            ) {
                Some((x, c)) => {
                    self.rho = x;
                    self.cost = c;
                    moved = true;
                }
                None => break,
            }
        }
        moved
    }

    /// Descent on `ln Ω_R`, which keeps the frequency positive.
    fn omega_block(&mut self, iters: usize) -> bool {
        let p = self.problem;
        let mut moved = false;
        for _ in 0..iters {
            if self.cost <= self.cutoff {
                break;
            }
            let ideal = p.ideal(&self.binom, &self.rho);
            let residual = p.residual_grad(&p.detected(&self.v, &ideal));
            let pulled = p.pull_back(&self.v, &residual);
            let grad = [p.grad_omega(&pulled, &self.binom, &self.rho, self.omega) * self.omega];
            let propose = |x: &[T], step: T| vec![x[0] - step * grad[0]];
            let (v, rho) = (&self.v, &self.rho);
            let eval = |x: &[T]| p.cost_of(&p.detected(v, &p.ideal(&p.binomials(x[0].exp()), rho)));
            let start = [self.omega.ln()];
            match backtrack(
                &start,
                self.cost,
                &mut self.step_log_omega,
                self.growth,
                self.max_halvings,
                propose,
                eval,
            ) {
                Some((x, c)) => {
                    self.omega = x[0].exp();
                    self.binom = p.binomials(self.omega);
                    self.cost = c;
                    moved = true;
                }
                None => break,
            }
        }
        moved
    }
}

fn descend<T: Real>(x: &[T], grad: &[T], step: T, rule: UpdateRule) -> Vec<T> {
    match rule {
        UpdateRule::Projected => x.iter().zip(grad).map(|(&a, &g)| a - step * g).collect(),
        UpdateRule::Multiplicative => {
            let cap = T::lit(MAX_LOG_STEP);
            x.iter()
                .zip(grad)
                .map(|(&a, &g)| a * (-(step * g)).max(-cap).min(cap).exp())
                .collect()
        }
    }
}

fn restore_simplex<T: Real>(x: &mut [T], rule: UpdateRule, scratch: &mut Vec<T>) {
    match rule {
        UpdateRule::Projected => project_simplex_in_place(x, scratch),
        UpdateRule::Multiplicative => {
            let total: T = x.iter().copied().sum();
            if total > T::zero() && total.is_finite() {
                for v in x.iter_mut() {
                    *v /= total;
                }
            } else {
                project_simplex_in_place(x, scratch);
            }
        }
    }
}

/// Tries `propose(x, step)` with the step halved until the cost drops below
/// `current`. On success the step grows by `growth` for the next call.
fn backtrack<T: Real>(
    x: &[T],
    current: T,
    step: &mut T,
    growth: T,
    max_halvings: usize,
    mut propose: impl FnMut(&[T], T) -> Vec<T>,
    eval: impl Fn(&[T]) -> T,
) -> Option<(Vec<T>, T)> {
    let mut trial = *step;
    for _ in 0..=max_halvings {
        let candidate = propose(x, trial);
        let cost = eval(&candidate);
        if cost < current {
            *step = trial * growth;
            return Some((candidate, cost));
        }
        trial /= T::lit(2.0);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::{sample_dataset, ExperimentPlan};

    fn plan(seed: u64) -> ExperimentPlan<f64> {
        ExperimentPlan {
            times_us: vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0, 40.0, 56.0],
            shots_per_time: 20_000,
            rabi: RabiParams::from_cyclic_khz(8.2).unwrap(),
            state: DiagonalState::fixed(6),
            rng_seed: seed,
        }
    }

    #[test]
    fn cost_trace_never_increases() {
        let data = sample_dataset(&plan(4), &DetectorMatrix::identity(6)).unwrap();
        let cfg = TomographyConfig {
            max_outer_iters: 30,
            cost_cutoff: 1e-6,
            ..Default::default()
        };
        let r = reconstruct(&data, &cfg).unwrap();
        assert!(r.cost_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(r.final_cost < r.initial_cost);
        assert!(r.v.column_sum_residual() < 1e-9);
    }

    #[test]
    fn identity_detector_round_trip_is_diagonal_dominant() {
        let data = sample_dataset(&plan(5), &DetectorMatrix::identity(6)).unwrap();
        let cfg = TomographyConfig {
            cost_cutoff: 2e-3,
            ..Default::default()
        };
        let r = reconstruct(&data, &cfg).unwrap();
        assert!(r.converged, "final cost {}", r.final_cost);
        for m in 0..=6 {
            assert!(r.v.get(m, m) > 0.5, "V[{m}][{m}] = {}", r.v.get(m, m));
        }
    }
}
