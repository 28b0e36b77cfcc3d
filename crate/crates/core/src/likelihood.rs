//! Interval-censored log-likelihood, simplified score equations and their
//! Jacobian.
//!
//! Each observation records the start of the stage in which a specimen
//! failed. With `ε_a`, `ε_b` the exposures at the start and end of that
//! stage and `ε_0` the exposure at the test start, the contribution to
//! `ln L` is `ln(exp(-ε_a^β) - exp(-ε_b^β)) + ε_0^β`.
//!
//! Writing `∂ε^β/∂θ = C_θ δ_θ`, the score equations are divided through by
//! the parameter-dependent constants `C_θ`:
//!
//! ```text
//! Σ_j (-δ_θ(a) + δ_θ(b) E_j) / (1 - E_j) + Σ_j δ_θ(0) = 0,   E_j = exp(ε_a^β - ε_b^β)
//! ```
//!
//! so only the β equation is literally `∂ ln L / ∂β`; the others differ from
//! the gradient by the factors `C_n = β/ζ`, `C_ζ = -β/ζ`, `C_v = -βn/ζ`, and
//! their Jacobian is not symmetric.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{first_effective_stage, pow_gap};
use crate::params::{ModelParams, Param, TestPlan};

/// One specimen of a step-stress test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Normalized prior use `T_s / Δt`.
    pub ts: f64,
    /// Normalized start time of the failure stage, `t_{l-1} / Δt`.
    pub stage_start: u32,
    /// Marks a datum left out of every computation.
    pub excluded: bool,
}

impl Observation {
    pub fn new(ts: f64, stage_start: u32) -> Self {
        Observation {
            ts,
            stage_start,
            excluded: false,
        }
    }

    /// Failure stage index `l`.
    pub fn failure_stage(&self) -> usize {
        self.stage_start as usize + 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    pub plan: TestPlan,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>, plan: TestPlan) -> Self {
        Dataset { observations, plan }
    }

    pub fn active(&self) -> impl Iterator<Item = (usize, &Observation)> {
        self.observations
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.excluded)
    }

    pub fn active_count(&self) -> usize {
        self.active().count()
    }
}

pub type ScoreVector = Vector4<f64>;
pub type ScoreJacobian = Matrix4<f64>;

/// Weighted power sums `Σ w b^e (ln b)^q` over the exposure terms of one
/// instant. The prior term has base `1 - v_th` and weight `ts`; stage `m`
/// has base `(m - 1) Δṽ - v_th` and weight 1.
#[derive(Debug, Clone, Copy, Default)]
struct PowerSums {
    /// b^n
    p0: f64,
    /// b^n ln b
    p1: f64,
    /// b^n ln² b
    p2: f64,
    /// b^{n-1}
    q0: f64,
    /// b^{n-1} ln b
    q1: f64,
    /// b^{n-2}
    r0: f64,
}

impl PowerSums {
    fn term(base: f64, n: f64) -> Self {
        let ln_b = base.ln();
        let p0 = base.powf(n);
        let q0 = p0 / base;
        PowerSums {
            p0,
            p1: p0 * ln_b,
            p2: p0 * ln_b * ln_b,
            q0,
            q1: q0 * ln_b,
            r0: q0 / base,
        }
    }

    fn add(self, o: Self) -> Self {
        PowerSums {
            p0: self.p0 + o.p0,
            p1: self.p1 + o.p1,
            p2: self.p2 + o.p2,
            q0: self.q0 + o.q0,
            q1: self.q1 + o.q1,
            r0: self.r0 + o.r0,
        }
    }

    fn scale(self, s: f64) -> Self {
        PowerSums {
            p0: self.p0 * s,
            p1: self.p1 * s,
            p2: self.p2 * s,
            q0: self.q0 * s,
            q1: self.q1 * s,
            r0: self.r0 * s,
        }
    }
}

/// `δ_θ` and `∂δ_θ1/∂θ2` at one instant.
#[derive(Debug, Clone, Copy)]
struct DeltaPoint {
    eps: f64,
    delta: [f64; 4],
    /// `d_delta[θ1][θ2] = ∂δ_θ1 / ∂θ2`
    d_delta: [[f64; 4]; 4],
}

/// Per-parameter-vector cache of stage power sums.
struct Evaluator {
    params: ModelParams,
    first: usize,
    /// `prefix[i + 1 - first]` holds the sums over stages `first..=i`.
    prefix: Vec<PowerSums>,
    prior_unit: PowerSums,
}

impl Evaluator {
    fn new(params: &ModelParams, plan: &TestPlan, last_stage: usize) -> Result<Self> {
        params.validate()?;
        let first = first_effective_stage(params, plan);
        let mut prefix = vec![PowerSums::default()];
        for m in first..=last_stage.max(first) {
            let base = (m - 1) as f64 * plan.dv - params.v_th;
            if base <= 0.0 {
                return Err(Error::Singular(format!(
                    "stage {m} sits exactly at the threshold"
                )));
            }
            let next = prefix.last().unwrap().add(PowerSums::term(base, params.n));
            prefix.push(next);
        }
        Ok(Evaluator {
            params: *params,
            first,
            prefix,
            prior_unit: PowerSums::term(1.0 - params.v_th, params.n),
        })
    }

    /// Stage-only sums through stage `i` (empty when `i < first`).
    fn stage_sums(&self, i: usize) -> PowerSums {
        if i < self.first {
            PowerSums::default()
        } else {
            self.prefix[i + 1 - self.first]
        }
    }

    fn sums(&self, i: usize, ts: f64) -> PowerSums {
        self.stage_sums(i).add(self.prior_unit.scale(ts))
    }

    fn k_tilde(&self) -> f64 {
        self.params.k_tilde()
    }

    /// Exposure accumulated by the test alone through stage `i`.
    fn test_exposure(&self, i: usize) -> f64 {
        self.stage_sums(i).p0 / self.k_tilde()
    }

    fn exposure(&self, i: usize, ts: f64) -> f64 {
        self.sums(i, ts).p0 / self.k_tilde()
    }

    fn c_factors(&self) -> [f64; 4] {
        let ModelParams { beta, n, zeta, .. } = self.params;
        [1.0, beta / zeta, -beta / zeta, -beta * n / zeta]
    }

    /// Deltas and their derivatives at the instant `τ_i` (stage end `i`).
    fn point(&self, i: usize, ts: f64, with_derivatives: bool) -> DeltaPoint {
        let ModelParams {
            beta, n, zeta, k0, ..
        } = self.params;
        let s = self.sums(i, ts);
        let eps = s.p0 / self.k_tilde();
        if eps == 0.0 {
            // ε ≡ 0 for every parameter vector: no exposure yet and ts = 0
            return DeltaPoint {
                eps,
                delta: [0.0; 4],
                d_delta: [[0.0; 4]; 4],
            };
        }
        let ln_eps = eps.ln();
        let e_b = eps.powf(beta);
        let e_b1 = e_b / eps;
        let e_b2 = e_b1 / eps;
        let s1 = s.p1 / k0;
        let s2 = s.p2 / k0;
        let sv = s.q0 / k0;
        let sv1 = s.q1 / k0;
        let sv2 = s.r0 / k0;

        let d_beta = e_b * ln_eps;
        let d_n = e_b1 * s1;
        let d_zeta = e_b;
        let d_v = e_b1 * sv;
        let delta = [d_beta, d_n, d_zeta, d_v];
        if !with_derivatives {
            return DeltaPoint {
                eps,
                delta,
                d_delta: [[0.0; 4]; 4],
            };
        }
        let [c_beta, c_n, c_zeta, c_v] = self.c_factors();
        let _ = c_beta;
        let inv_z = 1.0 / zeta;
        let d_delta = [
            [
                d_beta * ln_eps,
                (c_n * ln_eps + inv_z) * d_n,
                (c_zeta * ln_eps - inv_z) * d_zeta,
                (c_v * ln_eps - n * inv_z) * d_v,
            ],
            [
                d_n * ln_eps,
                (c_n - inv_z) * e_b2 * s1 * s1 + e_b1 * s2,
                (c_zeta + inv_z) * d_n,
                (c_v + n * inv_z) * e_b2 * sv * s1 - d_v - n * e_b1 * sv1,
            ],
            [d_beta, c_n * d_n, c_zeta * d_zeta, c_v * d_v],
            [
                d_v * ln_eps,
                (c_n - inv_z) * e_b2 * s1 * sv + e_b1 * sv1,
                (c_zeta + inv_z) * d_v,
                (c_v + n * inv_z) * e_b2 * sv * sv - (n - 1.0) * e_b1 * sv2,
            ],
        ];
        DeltaPoint {
            eps,
            delta,
            d_delta,
        }
    }
}

fn last_stage(data: &Dataset) -> usize {
    data.active()
        .map(|(_, o)| o.failure_stage())
        .max()
        .unwrap_or(2)
}

fn check_feasible(ev: &Evaluator, index: usize, obs: &Observation) -> Result<()> {
    if !(obs.ts >= 0.0 && obs.ts.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "observation {index} has invalid prior exposure {}",
            obs.ts
        )));
    }
    let l = obs.failure_stage();
    if l < ev.first {
        return Err(Error::InfeasibleObservation {
            index,
            stage: l,
            first: ev.first,
        });
    }
    Ok(())
}

/// `(ln d_j + ε_0^β, E_j, 1 - E_j)` for one observation.
fn stage_terms(ev: &Evaluator, obs: &Observation) -> (f64, f64, f64) {
    let beta = ev.params.beta;
    let l = obs.failure_stage();
    let e0 = ev.exposure(1, obs.ts);
    let reach = pow_gap(e0, ev.test_exposure(l - 1), beta);
    let e_a = ev.exposure(l - 1, obs.ts);
    let rate = (ev.stage_sums(l).p0 - ev.stage_sums(l - 1).p0) / ev.k_tilde();
    let gap = pow_gap(e_a, rate, beta);
    let one_minus_e = -(-gap).exp_m1();
    (-reach + one_minus_e.ln(), (-gap).exp(), one_minus_e)
}

/// Log-likelihood contribution of a single observation.
pub fn observation_log_likelihood(
    obs: &Observation,
    params: &ModelParams,
    plan: &TestPlan,
) -> Result<f64> {
    let ev = Evaluator::new(params, plan, obs.failure_stage())?;
    check_feasible(&ev, 0, obs)?;
    Ok(stage_terms(&ev, obs).0)
}

/// Conditional log-likelihood over the non-excluded observations.
pub fn log_likelihood(data: &Dataset, params: &ModelParams) -> Result<f64> {
    let ev = Evaluator::new(params, &data.plan, last_stage(data))?;
    let mut total = 0.0;
    for (index, obs) in data.active() {
        check_feasible(&ev, index, obs)?;
        total += stage_terms(&ev, obs).0;
    }
    Ok(total)
}

/// `δ_θ` at the normalized instant `tau` (an integer stage boundary).
pub fn delta(
    theta: Param,
    tau: u32,
    ts: f64,
    params: &ModelParams,
    plan: &TestPlan,
) -> Result<f64> {
    if !(ts >= 0.0 && ts.is_finite()) {
        return Err(Error::InvalidInput(format!("ts must be >= 0, got {ts}")));
    }
    let i = tau as usize + 1;
    let ev = Evaluator::new(params, plan, i)?;
    let pt = ev.point(i, ts, false);
    if pt.eps == 0.0 && theta == Param::Beta {
        return Err(Error::Singular("delta_beta needs ln of zero exposure".into()));
    }
    Ok(pt.delta[theta.index()])
}

/// Log-likelihood, simplified score equations and (optionally) their
/// Jacobian from a single pass over the data.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub log_likelihood: f64,
    pub score: ScoreVector,
    pub jacobian: Option<ScoreJacobian>,
}

pub fn evaluate(data: &Dataset, params: &ModelParams, with_jacobian: bool) -> Result<Evaluation> {
    let ev = Evaluator::new(params, &data.plan, last_stage(data))?;
    let c = ev.c_factors();
    let mut loglik = 0.0;
    let mut score = ScoreVector::zeros();
    let mut jac = ScoreJacobian::zeros();
    for (index, obs) in data.active() {
        check_feasible(&ev, index, obs)?;
        let (ll, e, one_minus_e) = stage_terms(&ev, obs);
        if one_minus_e <= 0.0 {
            return Err(Error::Singular(format!(
                "observation {index} falls in a stage of zero probability width"
            )));
        }
        loglik += ll;
        let l = obs.failure_stage();
        let pa = ev.point(l - 1, obs.ts, with_jacobian);
        let pb = ev.point(l, obs.ts, with_jacobian);
        let p0 = ev.point(1, obs.ts, with_jacobian);
        // λ_θ / d_j
        let mut ratio = [0.0; 4];
        for t in 0..4 {
            ratio[t] = (-pa.delta[t] + pb.delta[t] * e) / one_minus_e;
            score[t] += ratio[t] + p0.delta[t];
        }
        if with_jacobian {
            // written with stage differences of δ; expanding them into
            // products δ_a δ_a and δ_b δ_b cancels catastrophically once the
            // prior exposure dominates
            let curvature = e / (one_minus_e * one_minus_e);
            for t1 in 0..4 {
                let diff1 = pb.delta[t1] - pa.delta[t1];
                for t2 in 0..4 {
                    let diff2 = pb.delta[t2] - pa.delta[t2];
                    jac[(t1, t2)] += (-pa.d_delta[t1][t2] + pb.d_delta[t1][t2] * e) / one_minus_e
                        - c[t2] * curvature * diff1 * diff2
                        + p0.d_delta[t1][t2];
                }
            }
        }
    }
    if !loglik.is_finite() || score.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite likelihood or score".into()));
    }
    if with_jacobian && jac.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite score Jacobian".into()));
    }
    Ok(Evaluation {
        log_likelihood: loglik,
        score,
        jacobian: with_jacobian.then_some(jac),
    })
}

pub fn score_equations(data: &Dataset, params: &ModelParams) -> Result<ScoreVector> {
    Ok(evaluate(data, params, false)?.score)
}

pub fn score_jacobian(data: &Dataset, params: &ModelParams) -> Result<ScoreJacobian> {
    Ok(evaluate(data, params, true)?.jacobian.expect("jacobian requested"))
}

/// `C_θ` with `∂ε^β/∂θ = C_θ δ_θ`; the score component for `θ` equals
/// `(∂ ln L / ∂θ) / C_θ`.
pub fn gradient_factors(params: &ModelParams) -> [f64; 4] {
    let ModelParams { beta, n, zeta, .. } = *params;
    [1.0, beta / zeta, -beta / zeta, -beta * n / zeta]
}
