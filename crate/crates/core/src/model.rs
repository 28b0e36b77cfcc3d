//! Normalized Weibull cumulative exposure model.
//!
//! A specimen that has already survived `ts` normalized time units at its
//! in-service stress enters the step test carrying exposure
//! `ts * (1 - v_th)^n / (k0 * zeta)`. During the test, stage `m` adds
//! `((m - 1) * dv - v_th)^n / (k0 * zeta)` per unit time, and stages whose
//! stress does not exceed the threshold add nothing. Failure follows
//! `1 - exp(-eps^beta)`, conditioned on survival up to the test start.

use crate::error::{Error, Result};
use crate::params::{ModelParams, TestPlan};

/// Rate selector for [`CeModel::inv_scale`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// In-service stress before the test.
    Prior,
    /// Test stage with the given index (`>= 2`).
    Test(usize),
}

/// Cumulative exposure at some instant.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exposure(pub f64);

impl Exposure {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Least stage index `k >= 2` whose stress `(k - 1) * dv` exceeds the
/// threshold.
pub fn first_effective_stage(params: &ModelParams, plan: &TestPlan) -> usize {
    let v = params.v_th;
    let dv = plan.dv;
    let mut k = ((v / dv).floor() as usize).saturating_add(2);
    while (k - 1) as f64 * dv <= v {
        k += 1;
    }
    while k > 2 && (k - 2) as f64 * dv > v {
        k -= 1;
    }
    k
}

/// `(base + incr)^beta - base^beta` without cancellation when `incr` is
/// small relative to `base`.
pub(crate) fn pow_gap(base: f64, incr: f64, beta: f64) -> f64 {
    if incr == 0.0 {
        0.0
    } else if base == 0.0 {
        incr.powf(beta)
    } else {
        base.powf(beta) * (beta * (incr / base).ln_1p()).exp_m1()
    }
}

/// The model evaluated at one parameter vector and test plan.
#[derive(Debug, Clone, Copy)]
pub struct CeModel {
    params: ModelParams,
    plan: TestPlan,
    first: usize,
    service_stress: f64,
}

impl CeModel {
    pub fn new(params: ModelParams, plan: TestPlan) -> Result<Self> {
        params.validate()?;
        TestPlan::new(plan.dv)?;
        Ok(CeModel {
            params,
            plan,
            first: first_effective_stage(&params, &plan),
            service_stress: 1.0,
        })
    }

    /// Replaces the in-service stress by `ratio` times the reference stress.
    ///
    /// Only the prior-exposure rate changes: it becomes
    /// `(ratio - v_th)^n / (k0 * zeta)`.
    pub fn with_service_stress(mut self, ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > self.params.v_th) {
            return Err(Error::InvalidParameter(format!(
                "service stress ratio {ratio} must exceed v_th = {}",
                self.params.v_th
            )));
        }
        self.service_stress = ratio;
        Ok(self)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn plan(&self) -> &TestPlan {
        &self.plan
    }

    pub fn first_effective_stage(&self) -> usize {
        self.first
    }

    /// Exposure accumulated per unit normalized time, `dt / phi(V)`.
    pub fn inv_scale(&self, stage: Stage) -> Result<f64> {
        match stage {
            Stage::Prior => Ok(self.prior_rate()),
            Stage::Test(m) if m >= self.first => Ok(self.stage_rate(m)),
            Stage::Test(m) => Err(Error::InvalidInput(format!(
                "stage {m} precedes the first effective stage {}",
                self.first
            ))),
        }
    }

    fn prior_rate(&self) -> f64 {
        (self.service_stress - self.params.v_th).powf(self.params.n) / self.params.k_tilde()
    }

    fn stage_rate(&self, m: usize) -> f64 {
        let base = (m - 1) as f64 * self.plan.dv - self.params.v_th;
        base.max(0.0).powf(self.params.n) / self.params.k_tilde()
    }

    /// Exposure carried into the test by a specimen with prior use `ts`.
    pub fn prior_exposure(&self, ts: f64) -> f64 {
        self.prior_rate() * ts
    }

    /// Sum of the stage rates `k..=i`; zero when `i < k`.
    pub fn cumulative_rate(&self, i: usize) -> f64 {
        (self.first..=i).map(|m| self.stage_rate(m)).sum()
    }

    /// Exposure added by the test itself up to normalized time `tau`.
    pub fn test_exposure(&self, tau: f64) -> f64 {
        let start = (self.first - 2) as f64;
        if tau <= start {
            return 0.0;
        }
        // stage i covers (i - 2, i - 1]
        let i = tau.ceil() as usize + 1;
        self.cumulative_rate(i - 1) + self.stage_rate(i) * (tau - (i - 2) as f64)
    }

    pub fn exposure(&self, tau: f64, ts: f64) -> Result<Exposure> {
        check_time(tau, ts)?;
        Ok(Exposure(self.prior_exposure(ts) + self.test_exposure(tau)))
    }

    /// `ln` of the conditional survival function, `eps(0)^beta - eps(tau)^beta`.
    pub fn log_survival(&self, tau: f64, ts: f64) -> Result<f64> {
        check_time(tau, ts)?;
        Ok(-pow_gap(
            self.prior_exposure(ts),
            self.test_exposure(tau),
            self.params.beta,
        ))
    }

    /// Failure probability by time `tau` given survival to the test start.
    pub fn cdf_conditional(&self, tau: f64, ts: f64) -> Result<f64> {
        Ok(-self.log_survival(tau, ts)?.exp_m1())
    }

    /// Probability of failing in stage `l`, i.e. in `(l - 2, l - 1]`.
    pub fn stage_probability(&self, l: usize, ts: f64) -> Result<f64> {
        check_time(0.0, ts)?;
        if l < self.first {
            return Err(Error::InvalidInput(format!(
                "stage {l} precedes the first effective stage {}",
                self.first
            )));
        }
        let e0 = self.prior_exposure(ts);
        let before = self.cumulative_rate(l - 1);
        let beta = self.params.beta;
        let reach = (-pow_gap(e0, before, beta)).exp();
        let within = -(-pow_gap(e0 + before, self.stage_rate(l), beta)).exp_m1();
        Ok(reach * within)
    }
}

fn check_time(tau: f64, ts: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("tau must be >= 0, got {tau}")));
    }
    if !(ts >= 0.0 && ts.is_finite()) {
        return Err(Error::InvalidInput(format!("ts must be >= 0, got {ts}")));
    }
    Ok(())
}
