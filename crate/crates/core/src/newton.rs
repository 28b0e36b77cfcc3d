//! Damped Newton iteration for square nonlinear systems.
//!
//! Each step solves `J d = -F` and then halves the step length `s` from 1
//! until the trial point is feasible, evaluable and satisfies
//! `|F(x + s d)| < (1 - s/2) |F(x)|`.
//!
//! The norm is selected by [`Merit`]. The default measures residuals through
//! the current Jacobian, `|J(x)^{-1} F|`, which is invariant under rescaling
//! of the equations and keeps full steps available along ill-conditioned
//! valleys where the plain Euclidean norm forces tiny steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Norm used by the sufficient-decrease test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Merit {
    /// `|J(x_k)^{-1} F|_2` with the Jacobian frozen at the current iterate.
    Natural,
    /// `|F|_2`.
    Residual,
    /// Accept a step length when either of the two tests passes.
    #[default]
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Stop once the max-norm of the residual is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Give up when the step length falls below this.
    pub min_damping: f64,
    #[serde(default)]
    pub merit: Merit,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: 1e-10,
            max_iter: 100,
            min_damping: 2f64.powi(-30),
            merit: Merit::Either,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonStatus {
    Converged,
    IterationLimit,
    DampingUnderflow,
    SingularJacobian,
}

#[derive(Debug, Clone)]
pub struct NewtonReport {
    /// Last accepted iterate.
    pub x: DVector<f64>,
    pub residual: DVector<f64>,
    pub status: NewtonStatus,
    pub iterations: usize,
    /// Euclidean residual norm at every accepted iterate, starting with `x0`.
    pub norms: Vec<f64>,
    /// Merit ratio new/old of every accepted step, in that step's norm.
    pub reductions: Vec<f64>,
    /// Step length used for every accepted step.
    pub dampings: Vec<f64>,
}

impl NewtonReport {
    pub fn converged(&self) -> bool {
        self.status == NewtonStatus::Converged
    }

    pub fn residual_max(&self) -> f64 {
        self.residual.amax()
    }
}

/// A square system `F(x) = 0` with Jacobian.
pub trait System {
    /// Residual, and the Jacobian when `with_jacobian` is set.
    fn eval(&mut self, x: &DVector<f64>, with_jacobian: bool)
        -> Result<(DVector<f64>, Option<DMatrix<f64>>)>;

    /// Trial points outside the admissible region are never evaluated.
    fn feasible(&self, _x: &DVector<f64>) -> bool {
        true
    }
}

/// Adapts a pair of closures into a [`System`].
pub struct FnSystem<F, J> {
    pub residual: F,
    pub jacobian: J,
}

impl<F, J> System for FnSystem<F, J>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
    J: FnMut(&DVector<f64>) -> DMatrix<f64>,
{
    fn eval(
        &mut self,
        x: &DVector<f64>,
        with_jacobian: bool,
    ) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let f = (self.residual)(x);
        let j = with_jacobian.then(|| (self.jacobian)(x));
        Ok((f, j))
    }
}

/// Runs the damped iteration from `x0`. Fails only when `x0` itself cannot
/// be evaluated; every other outcome is reported through the status.
pub fn damped_newton<S: System>(
    system: &mut S,
    x0: DVector<f64>,
    config: &NewtonConfig,
) -> Result<NewtonReport> {
    let mut x = x0;
    let (mut f, mut jac) = system.eval(&x, true)?;
    let mut norm = f.norm();
    let mut report = NewtonReport {
        x: x.clone(),
        residual: f.clone(),
        status: NewtonStatus::IterationLimit,
        iterations: 0,
        norms: vec![norm],
        reductions: Vec::new(),
        dampings: Vec::new(),
    };
    let finish = |mut r: NewtonReport, x: DVector<f64>, f: DVector<f64>, status| {
        r.x = x;
        r.residual = f;
        r.status = status;
        r
    };

    for iter in 0..=config.max_iter {
        if f.iter().all(|v| v.abs() <= config.tol) {
            report.iterations = iter;
            return Ok(finish(report, x, f, NewtonStatus::Converged));
        }
        if iter == config.max_iter {
            break;
        }
        let lu = jac.take().expect("jacobian evaluated at accepted iterate").lu();
        let Some(step) = lu.solve(&(-&f)).filter(|d| d.iter().all(|v| v.is_finite())) else {
            report.iterations = iter;
            return Ok(finish(report, x, f, NewtonStatus::SingularJacobian));
        };
        let natural = |r: &DVector<f64>| lu.solve(r).map_or(f64::INFINITY, |v| v.norm());
        let level = step.norm();
        // merit of the trial residual relative to the current one
        let ratio = |r: &DVector<f64>| match config.merit {
            Merit::Natural => natural(r) / level,
            Merit::Residual => r.norm() / norm,
            Merit::Either => (natural(r) / level).min(r.norm() / norm),
        };

        let mut s = 1.0;
        let accepted = loop {
            if s < config.min_damping {
                break None;
            }
            let trial = &x + &step * s;
            if system.feasible(&trial) {
                if let Ok((ft, _)) = system.eval(&trial, false) {
                    let q = ratio(&ft);
                    if q.is_finite() && q < 1.0 - s / 2.0 {
                        break Some((trial, q));
                    }
                }
            }
            s *= 0.5;
        };
        let Some((next, reduction)) = accepted else {
            report.iterations = iter;
            return Ok(finish(report, x, f, NewtonStatus::DampingUnderflow));
        };
        x = next;
        let (fx, jx) = system.eval(&x, true)?;
        f = fx;
        jac = jx;
        norm = f.norm();
        report.norms.push(norm);
        report.reductions.push(reduction);
        report.dampings.push(s);
    }
    report.iterations = config.max_iter;
    Ok(finish(report, x, f, NewtonStatus::IterationLimit))
}
