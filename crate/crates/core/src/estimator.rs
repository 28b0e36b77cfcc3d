//! Two-stage maximum likelihood fit.
//!
//! First `v_th` is swept over a grid; at each grid value the three score
//! equations for `(β, n, ζ)` are solved with `v_th` held fixed, warm-started
//! from the previous grid value, and the profiled `ln L` recorded. The full
//! four-equation system is then solved from the best grid point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{evaluate, log_likelihood, Dataset};
use crate::model::first_effective_stage;
use crate::newton::{damped_newton, NewtonConfig, NewtonReport, NewtonStatus, System};
use crate::params::{ModelParams, TestPlan, DEFAULT_K0};

/// Smallest admissible `(k - 1) dv - v_th` for a trial parameter vector.
pub const THRESHOLD_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl ProfileGrid {
    pub fn new(start: f64, end: f64, step: f64) -> Result<Self> {
        let g = ProfileGrid { start, end, step };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let ProfileGrid { start, end, step } = *self;
        if !(start.is_finite() && end.is_finite() && step.is_finite()) {
            return Err(Error::InvalidInput("profile grid must be finite".into()));
        }
        if !(0.0 <= start && start <= end && end < 1.0) {
            return Err(Error::InvalidInput(format!(
                "profile grid needs 0 <= start <= end < 1, got {start}..{end}"
            )));
        }
        if step <= 0.0 {
            return Err(Error::InvalidInput(format!("profile step must be > 0, got {step}")));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let count = ((self.end - self.start) / self.step + 1e-9).floor() as usize;
        (0..=count)
            .map(|j| self.start + j as f64 * self.step)
            .filter(|&v| v < 1.0)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Starting `(β, n, ζ, v_th)`; `v_th` is used only without a profile.
    pub init: [f64; 4],
    pub k0: f64,
    pub profile: Option<ProfileGrid>,
    pub newton: NewtonConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            init: [2.0, 2.0, 1.0, 0.5],
            k0: DEFAULT_K0,
            profile: Some(ProfileGrid {
                start: 0.5,
                end: 0.999,
                step: 0.001,
            }),
            newton: NewtonConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        ModelParams::from_array(self.init, self.k0)?;
        if let Some(g) = &self.profile {
            g.validate()?;
        }
        let n = &self.newton;
        if !(n.tol > 0.0 && n.max_iter > 0 && n.min_damping > 0.0 && n.min_damping <= 1.0) {
            return Err(Error::InvalidInput("invalid Newton settings".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub v_th: f64,
    pub loglik: f64,
    pub beta: f64,
    pub n: f64,
    pub zeta: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub loglik: f64,
    pub converged: bool,
    pub status: NewtonStatus,
    pub iterations: usize,
    /// Max-norm of the score equations at `params`.
    pub residual_max: f64,
    pub profile_trace: Vec<ProfilePoint>,
    pub warnings: Vec<String>,
}

/// Score equations as a Newton system, with `v_th` optionally held fixed.
struct ScoreSystem<'a> {
    data: &'a Dataset,
    k0: f64,
    fixed_v: Option<f64>,
}

impl ScoreSystem<'_> {
    fn params(&self, x: &DVector<f64>) -> Result<ModelParams> {
        let v = self.fixed_v.unwrap_or_else(|| x[3]);
        ModelParams::new(x[0], x[1], x[2], v, self.k0)
    }

    fn dim(&self) -> usize {
        if self.fixed_v.is_some() {
            3
        } else {
            4
        }
    }
}

fn within_guard(params: &ModelParams, plan: &TestPlan) -> bool {
    let k = first_effective_stage(params, plan);
    (k - 1) as f64 * plan.dv - params.v_th >= THRESHOLD_GUARD
}

impl System for ScoreSystem<'_> {
    fn eval(
        &mut self,
        x: &DVector<f64>,
        with_jacobian: bool,
    ) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let p = self.params(x)?;
        let ev = evaluate(self.data, &p, with_jacobian)?;
        let m = self.dim();
        let f = DVector::from_iterator(m, ev.score.iter().take(m).copied());
        let j = ev
            .jacobian
            .map(|j| DMatrix::from_fn(m, m, |r, c| j[(r, c)]));
        Ok((f, j))
    }

    fn feasible(&self, x: &DVector<f64>) -> bool {
        match self.params(x) {
            Ok(p) => within_guard(&p, &self.data.plan),
            Err(_) => false,
        }
    }
}

fn solve(
    data: &Dataset,
    k0: f64,
    fixed_v: Option<f64>,
    x0: DVector<f64>,
    newton: &NewtonConfig,
) -> Result<NewtonReport> {
    let mut sys = ScoreSystem { data, k0, fixed_v };
    if !sys.feasible(&x0) {
        return Err(Error::InvalidParameter(
            "starting point lies outside the admissible region".into(),
        ));
    }
    damped_newton(&mut sys, x0, newton)
}

/// Sweeps `v_th` and returns the grid point with the largest profiled
/// `ln L`, together with the trace of every successful grid solve.
pub fn profile_stage(
    data: &Dataset,
    config: &FitConfig,
) -> Result<(ProfilePoint, Vec<ProfilePoint>, Vec<String>)> {
    config.validate()?;
    let grid = config
        .profile
        .ok_or_else(|| Error::InvalidInput("no profile grid configured".into()))?;
    let mut warm = DVector::from_vec(config.init[..3].to_vec());
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    for v in grid.points() {
        let outcome = solve(data, config.k0, Some(v), warm.clone(), &config.newton);
        match outcome {
            Ok(r) if r.converged() => {
                let p = ModelParams::new(r.x[0], r.x[1], r.x[2], v, config.k0)?;
                let loglik = log_likelihood(data, &p)?;
                trace.push(ProfilePoint {
                    v_th: v,
                    loglik,
                    beta: p.beta,
                    n: p.n,
                    zeta: p.zeta,
                    iterations: r.iterations,
                });
                warm = r.x;
            }
            Ok(r) => warnings.push(format!("profile point v_th = {v}: {:?}", r.status)),
            Err(e) => warnings.push(format!("profile point v_th = {v}: {e}")),
        }
    }
    let best = trace
        .iter()
        .copied()
        .max_by(|a, b| a.loglik.total_cmp(&b.loglik))
        .ok_or_else(|| {
            Error::Solver(format!(
                "every profile point failed; first: {}",
                warnings.first().map_or("none", String::as_str)
            ))
        })?;
    Ok((best, trace, warnings))
}

/// Profile sweep (when configured) followed by the full four-parameter solve.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if data.active_count() == 0 {
        return Err(Error::InvalidInput("dataset has no active observations".into()));
    }
    let (start, trace, mut warnings) = if config.profile.is_some() {
        let (best, trace, warnings) = profile_stage(data, config)?;
        ([best.beta, best.n, best.zeta, best.v_th], trace, warnings)
    } else {
        (config.init, Vec::new(), Vec::new())
    };
    let report = solve(
        data,
        config.k0,
        None,
        DVector::from_column_slice(&start),
        &config.newton,
    )?;
    let x = &report.x;
    let params = ModelParams::new(x[0], x[1], x[2], x[3], config.k0)?;
    let loglik = log_likelihood(data, &params)?;
    let converged = report.converged();
    if converged && params.beta < 1.0 {
        warnings.push(format!(
            "converged with beta = {} < 1; this root may be spurious",
            params.beta
        ));
    }
    Ok(FitResult {
        params,
        loglik,
        converged,
        status: report.status,
        iterations: report.iterations,
        residual_max: report.residual_max(),
        profile_trace: trace,
        warnings,
    })
}
