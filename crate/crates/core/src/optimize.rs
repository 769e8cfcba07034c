//! Posterior mode by L-BFGS on the unconstrained scale.

use argmin::core::{CostFunction, Executor, Gradient, State, TerminationReason, TerminationStatus};
use argmin::solver::linesearch::condition::ArmijoCondition;
use argmin::solver::linesearch::BacktrackingLineSearch;
use argmin::solver::quasinewton::LBFGS;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::LogDensity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub max_iters: u64,
    /// Convergence when the Euclidean gradient norm drops below this times
    /// `max(1, |log density|)`.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            max_iters: 2000,
            grad_tol: 1e-6,
            memory: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub log_density: f64,
    pub grad_norm: f64,
    pub iterations: u64,
}

struct Negated<'a, D>(&'a D);

impl<D: LogDensity> Negated<'_, D> {
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; x.len()];
        let lp = self.0.log_density_grad(x, &mut g);
        if !lp.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return (f64::INFINITY, vec![f64::NAN; x.len()]);
        }
        (-lp, g.into_iter().map(|v| -v).collect())
    }
}

impl<D: LogDensity> CostFunction for Negated<'_, D> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.eval(x).0)
    }
}

impl<D: LogDensity> Gradient for Negated<'_, D> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, x: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.eval(x).1)
    }
}

/// Maximize `target` from `init`.
pub fn maximize<D: LogDensity>(target: &D, init: &[f64], cfg: &OptimizeConfig) -> Result<Optimum> {
    let problem = Negated(target);
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tol = |f: f64| cfg.grad_tol * f.abs().max(1.0);
    let mut x = init.to_vec();
    let (mut f, mut g) = problem.eval(&x);
    if !f.is_finite() {
        return Err(Error::NonFiniteInit(1));
    }
    let mut iterations = 0;
    // The tolerance scales with |log density|, which shrinks as the optimum is
    // approached, so L-BFGS restarts until the scale it ran with is current.
    loop {
        if norm(&g) < tol(f) {
            return Ok(Optimum {
                x,
                log_density: -f,
                grad_norm: norm(&g),
                iterations,
            });
        }
        if iterations >= cfg.max_iters {
            return Err(Error::MaxIterations(iterations as usize));
        }
        // Backtracking tolerates steps into overflow, which early L-BFGS steps hit on large data.
        let linesearch = BacktrackingLineSearch::new(ArmijoCondition::new(1e-4).map_err(|e| Error::Config(e.to_string()))?);
        let solver = LBFGS::new(linesearch, cfg.memory)
            .with_tolerance_grad(tol(f))
            .and_then(|s| s.with_tolerance_cost(0.0))
            .map_err(|e| Error::Config(e.to_string()))?;
        let res = Executor::new(Negated(target), solver)
            .configure(|s| s.param(x.clone()).max_iters(cfg.max_iters - iterations))
            .run()
            .map_err(|_| Error::LineSearchFailure)?;
        let state = res.state();
        iterations += state.get_iter();
        let capped = matches!(
            state.get_termination_status(),
            TerminationStatus::Terminated(TerminationReason::MaxItersReached)
        );
        let next = state.get_best_param().cloned().unwrap_or_else(|| x.clone());
        let (f_next, g_next) = problem.eval(&next);
        let stalled = !(f_next < f);
        if f_next <= f {
            (x, f, g) = (next, f_next, g_next);
        }
        if stalled && !capped && norm(&g) >= tol(f) {
            return Err(Error::LineSearchFailure);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        center: Vec<f64>,
        scale: Vec<f64>,
    }

    impl LogDensity for Quadratic {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn log_density_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let mut lp = 0.0;
            for i in 0..x.len() {
                let z = (x[i] - self.center[i]) / self.scale[i];
                lp -= 0.5 * z * z;
                g[i] = -z / self.scale[i];
            }
            lp
        }
    }

    #[test]
    fn standard_normal_mode_is_zero() {
        let q = Quadratic {
            center: vec![0.0; 3],
            scale: vec![1.0; 3],
        };
        let o = maximize(&q, &[1.5, -0.7, 2.0], &OptimizeConfig::default()).unwrap();
        assert!(o.x.iter().all(|v| v.abs() < 1e-6), "{:?}", o.x);
        assert!(o.grad_norm < 1e-6);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let q = Quadratic {
            center: vec![3.0, -1.0],
            scale: vec![0.01, 50.0],
        };
        let o = maximize(&q, &[0.0, 0.0], &OptimizeConfig::default()).unwrap();
        assert!((o.x[0] - 3.0).abs() < 1e-8 && (o.x[1] + 1.0).abs() < 1e-3, "{:?}", o.x);
    }

    #[test]
    fn iteration_cap_is_reported() {
        struct Rosenbrock;
        impl LogDensity for Rosenbrock {
            fn dim(&self) -> usize {
                2
            }
            fn log_density_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
                let (a, b) = (1.0 - x[0], x[1] - x[0] * x[0]);
                g[0] = 2.0 * a + 400.0 * x[0] * b;
                g[1] = -200.0 * b;
                -(a * a + 100.0 * b * b)
            }
        }
        let cfg = OptimizeConfig {
            max_iters: 2,
            ..Default::default()
        };
        assert!(matches!(
            maximize(&Rosenbrock, &[-1.2, 1.0], &cfg),
            Err(Error::MaxIterations(_))
        ));
        let o = maximize(&Rosenbrock, &[-1.2, 1.0], &OptimizeConfig::default()).unwrap();
        assert!((o.x[0] - 1.0).abs() < 1e-5 && (o.x[1] - 1.0).abs() < 1e-5, "{:?}", o.x);
    }
}
