//! Mean and second moment of the normalized failure time.
//!
//! Both moments are series over test stages. On stage `i`, covering
//! `(a, b] = (i - 2, i - 1]`, the survival integral has the closed forms
//!
//! ```text
//! ∫_a^b S dt     = (A(a) - A(b)) / (β r_i)
//! ∫_a^b t S dt   = (B_i(a) - B_i(b)) / (β r_i²)
//! A(t)   = S(t) ∫_0^∞ (u + ε(t)^β)^{1/β-1} e^{-u} du
//! B_i(t) = S(t) ∫_0^∞ {(u + ε(t)^β)^{1/β} - c_i} (u + ε(t)^β)^{1/β-1} e^{-u} du
//! ```
//!
//! with `S(t) = exp(ε(0)^β - ε(t)^β)`, `r_i` the stage rate and
//! `c_i = ε(a) - a r_i`. Stages over which `ε^β` barely moves lose all
//! precision in the differences above and are integrated directly instead.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{pow_gap, CeModel};
use crate::params::{ModelParams, TestPlan};
use crate::quadrature::{root_gap_integral, shifted_power_integral, GaussLegendre};

/// Series stop once the conditional survival drops below this.
pub const SURVIVAL_CUTOFF: f64 = 1e-16;
pub const MAX_STAGES: usize = 1_000_000;
/// Stages with `ε(b)^β - ε(a)^β` below this use direct integration.
const FLAT_STAGE: f64 = 1e-3;
/// Relative slack on a negative variance before it is an error.
const VARIANCE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentResult {
    /// `E[T] / Δt`
    pub mean_norm: f64,
    /// `E[T²] / Δt²`
    pub second_norm: f64,
    pub sd_norm: f64,
    pub stages_used: usize,
    pub quadrature_nodes: usize,
}

/// `A(τ)` for `τ >= k - 2`.
pub fn a_func(model: &CeModel, tau: f64, ts: f64) -> Result<f64> {
    let (log_s, w) = endpoint(model, tau, ts)?;
    let beta = model.params().beta;
    Ok(log_s.exp() * shifted_power_integral(1.0 / beta - 1.0, w)?.value)
}

/// `B_i(τ)` for stage `i >= k` and `τ ∈ [i - 2, i - 1]`.
pub fn b_func(model: &CeModel, i: usize, tau: f64, ts: f64) -> Result<f64> {
    let k = model.first_effective_stage();
    if i < k {
        return Err(Error::InvalidInput(format!(
            "stage {i} precedes the first effective stage {k}"
        )));
    }
    let a = (i - 2) as f64;
    if !(tau >= a && tau <= a + 1.0) {
        return Err(Error::InvalidInput(format!(
            "tau = {tau} lies outside stage {i}"
        )));
    }
    let (log_s, w) = endpoint(model, tau, ts)?;
    let beta = model.params().beta;
    let r = model.inv_scale(crate::model::Stage::Test(i))?;
    // ε(τ) - c_i = τ r_i on this stage
    let inner = root_gap_integral(beta, w)?.value
        + tau * r * shifted_power_integral(1.0 / beta - 1.0, w)?.value;
    Ok(log_s.exp() * inner)
}

/// `(ln S(τ), ε(τ)^β)`.
fn endpoint(model: &CeModel, tau: f64, ts: f64) -> Result<(f64, f64)> {
    let k = model.first_effective_stage();
    if !(tau >= (k - 2) as f64) {
        return Err(Error::InvalidInput(format!(
            "tau = {tau} precedes the first effective stage start {}",
            k - 2
        )));
    }
    let log_s = model.log_survival(tau, ts)?;
    let eps = model.exposure(tau, ts)?.value();
    Ok((log_s, eps.powf(model.params().beta)))
}

pub fn mean_norm(model: &CeModel, ts: f64) -> Result<f64> {
    Ok(moments(model, ts)?.mean_norm)
}

pub fn second_norm(model: &CeModel, ts: f64) -> Result<f64> {
    Ok(moments(model, ts)?.second_norm)
}

/// Laguerre-weighted integrals at a stage endpoint.
#[derive(Clone, Copy)]
struct EndpointIntegrals {
    /// `∫ (u + w)^{1/β - 1} e^{-u} du`
    power: f64,
    /// `∫ ((u + w)^{1/β} - w^{1/β}) (u + w)^{1/β - 1} e^{-u} du`
    root_gap: f64,
}

fn endpoint_integrals(beta: f64, w: f64, nodes: &mut usize) -> Result<EndpointIntegrals> {
    let power = shifted_power_integral(1.0 / beta - 1.0, w)?;
    let root_gap = root_gap_integral(beta, w)?;
    *nodes = (*nodes).max(power.nodes).max(root_gap.nodes);
    Ok(EndpointIntegrals {
        power: power.value,
        root_gap: root_gap.value,
    })
}

/// Mean, second moment and standard deviation of `T / Δt`.
pub fn moments(model: &CeModel, ts: f64) -> Result<MomentResult> {
    let beta = model.params().beta;
    let k = model.first_effective_stage();
    let e0 = model.exposure(0.0, ts)?.value();
    let start = (k - 2) as f64;

    let mut first = 0.0;
    let mut second = 0.0;
    let mut nodes = 0usize;
    let mut test_exposure = 0.0;
    let mut log_s_a = 0.0;
    let mut left: Option<EndpointIntegrals> = None;
    let mut stages = 0usize;

    for i in k.. {
        if stages >= MAX_STAGES {
            return Err(Error::SeriesTruncation {
                stages,
                partial: start + first,
            });
        }
        stages += 1;
        let a = (i - 2) as f64;
        let b = a + 1.0;
        let r = model.inv_scale(crate::model::Stage::Test(i))?;
        let eps_a = e0 + test_exposure;
        let rise = pow_gap(eps_a, r, beta);
        let log_s_b = log_s_a - rise;
        let s_a = f64::exp(log_s_a);
        let s_b = f64::exp(log_s_b);

        let (m1, m2) = if rise < FLAT_STAGE {
            left = None;
            flat_stage(eps_a, r, beta, a)
                .map(|(j0, j1)| (s_a * j0, s_a * j1))?
        } else {
            let at_a = match left {
                Some(v) => v,
                None => endpoint_integrals(beta, eps_a.powf(beta), &mut nodes)?,
            };
            let eps_b = eps_a + r;
            let at_b = endpoint_integrals(beta, eps_b.powf(beta), &mut nodes)?;
            left = Some(at_b);
            let a_a = s_a * at_a.power;
            let a_b = s_b * at_b.power;
            let m1 = (a_a - a_b) / (beta * r);
            let b_a = s_a * (at_a.root_gap + a * r * at_a.power);
            let b_b = s_b * (at_b.root_gap + b * r * at_b.power);
            let m2 = (b_a - b_b) / (beta * r * r);
            (m1, m2)
        };
        first += m1;
        second += m2;
        test_exposure += r;
        log_s_a = log_s_b;
        if s_b < SURVIVAL_CUTOFF {
            break;
        }
    }

    let mean = start + first;
    let second_moment = start * start + 2.0 * second;
    let var = second_moment - mean * mean;
    let sd = if var >= 0.0 {
        var.sqrt()
    } else if var >= -VARIANCE_SLACK * second_moment {
        0.0
    } else {
        return Err(Error::InvalidInput(format!(
            "negative variance {var:e} from second moment {second_moment:e}"
        )));
    };
    Ok(MomentResult {
        mean_norm: mean,
        second_norm: second_moment,
        sd_norm: sd,
        stages_used: stages,
        quadrature_nodes: nodes,
    })
}

/// `(∫_0^1 S(a+s)/S(a) ds, ∫_0^1 (a+s) S(a+s)/S(a) ds)` on a stage where
/// `ε^β` rises by less than `FLAT_STAGE`.
fn flat_stage(eps_a: f64, r: f64, beta: f64, a: f64) -> Result<(f64, f64)> {
    if r == 0.0 {
        return Ok((1.0, a + 0.5));
    }
    if eps_a >= 4.0 * r {
        let rule = GaussLegendre::sixteen();
        let decay = |s: f64| (-pow_gap(eps_a, s * r, beta)).exp();
        let j0 = rule.integrate(decay);
        let j1 = rule.integrate(|s| (a + s) * decay(s));
        return Ok((j0, j1));
    }
    // ε^β is tiny across the stage: expand exp(-ε^β) termwise in ε.
    //   ∫ e^{-ε^β} dε       = Σ_j (-1)^j (ε_b^{jβ+1} - ε_a^{jβ+1}) / (j! (jβ+1))
    //   ∫ ε e^{-ε^β} dε     = Σ_j (-1)^j (ε_b^{jβ+2} - ε_a^{jβ+2}) / (j! (jβ+2))
    let eps_b = eps_a + r;
    let mut p0 = 0.0;
    let mut p1 = 0.0;
    let mut coef = 1.0;
    for j in 0..200 {
        let jb = j as f64 * beta;
        let t0 = coef * (eps_b.powf(jb + 1.0) - eps_a.powf(jb + 1.0)) / (jb + 1.0);
        let t1 = coef * (eps_b.powf(jb + 2.0) - eps_a.powf(jb + 2.0)) / (jb + 2.0);
        p0 += t0;
        p1 += t1;
        if t0.abs() <= 1e-17 * p0.abs() && t1.abs() <= 1e-17 * p1.abs() {
            break;
        }
        coef *= -1.0 / (j as f64 + 1.0);
    }
    let scale = eps_a.powf(beta).exp();
    // t = a + (ε - ε_a) / r
    let j0 = scale * p0 / r;
    let j1 = a * j0 + scale * (p1 - eps_a * p0) / (r * r);
    if !(j0.is_finite() && j1.is_finite()) {
        return Err(Error::Singular("flat-stage series overflow".into()));
    }
    Ok((j0, j1))
}

/// One row of a mean/SD curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub ts: f64,
    pub moments: MomentResult,
}

/// Moments for every prior exposure in `ts_grid`, in grid order.
pub fn curve(ts_grid: &[f64], model: &CeModel) -> Result<Vec<CurveRow>> {
    if ts_grid.is_empty() {
        return Err(Error::InvalidInput("empty prior-exposure grid".into()));
    }
    ts_grid
        .par_iter()
        .map(|&ts| moments(model, ts).map(|moments| CurveRow { ts, moments }))
        .collect()
}

/// A point of the published parameter grid for the mean/SD curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub k_tilde: f64,
    pub dv: f64,
    pub v_th: f64,
    pub beta: f64,
    pub n: f64,
}

impl GridPoint {
    /// Model with `k0 = k_tilde` and `zeta = 1`.
    pub fn model(&self) -> Result<CeModel> {
        let params = ModelParams::new(self.beta, self.n, 1.0, self.v_th, self.k_tilde)?;
        CeModel::new(params, TestPlan::new(self.dv)?)
    }
}

/// The 54-point grid: `K̃ ∈ {1e3, 1e4, 1e5}`, `Δṽ = 0.39`,
/// `ṽ_th ∈ {0, 0.5, 0.9}`, `β ∈ {2, 3}`, `n ∈ {1, 2, 3}`.
pub fn parameter_grid() -> Vec<GridPoint> {
    let mut grid = Vec::with_capacity(54);
    for beta in [2.0, 3.0] {
        for k_tilde in [1e3, 1e4, 1e5] {
            for v_th in [0.0, 0.5, 0.9] {
                for n in [1.0, 2.0, 3.0] {
                    grid.push(GridPoint {
                        k_tilde,
                        dv: 0.39,
                        v_th,
                        beta,
                        n,
                    });
                }
            }
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(beta: f64, n: f64, zeta: f64, v: f64, k0: f64, dv: f64) -> CeModel {
        CeModel::new(
            ModelParams::new(beta, n, zeta, v, k0).unwrap(),
            TestPlan::new(dv).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn a_func_exponential_case() {
        let m = model(1.0, 1.0, 1.0, 0.0, 1e3, 0.39);
        for tau in [0.0, 1.5, 7.0] {
            let expected = m.log_survival(tau, 500.0).unwrap().exp();
            assert_relative_eq!(a_func(&m, tau, 500.0).unwrap(), expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn a_func_gamma_half() {
        let m = model(2.0, 1.0, 1.0, 0.0, 1e3, 0.39);
        assert_relative_eq!(
            a_func(&m, 0.0, 0.0).unwrap(),
            std::f64::consts::PI.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn b_func_exponential_case() {
        // beta = 1, tau = 0, ε = 0: ∫ u e^{-u} du = 1
        let m = model(1.0, 1.0, 1.0, 0.0, 1e3, 0.39);
        assert_relative_eq!(b_func(&m, 2, 0.0, 0.0).unwrap(), 1.0, max_relative = 1e-14);
        assert!(b_func(&m, 2, 1.5, 0.0).is_err());
    }

    #[test]
    fn exponential_mean_is_memoryless() {
        let m = model(1.0, 2.0, 0.7, 0.5, 1e3, 0.39);
        let base = moments(&m, 0.0).unwrap();
        for ts in [1e3, 1e5, 1e7] {
            let r = moments(&m, ts).unwrap();
            assert_relative_eq!(r.mean_norm, base.mean_norm, max_relative = 1e-10);
            assert_relative_eq!(r.sd_norm, base.sd_norm, max_relative = 1e-8);
        }
    }

    #[test]
    fn mean_at_least_first_stage_start() {
        let m = model(3.0, 2.0, 1.0, 0.9, 1e3, 0.39);
        let r = moments(&m, 1e9).unwrap();
        assert!(r.mean_norm >= 1.0);
        assert!(r.second_norm >= r.mean_norm * r.mean_norm * (1.0 - 1e-10));
    }

    #[test]
    fn single_stage_support_has_bounded_variance() {
        // enormous hazard once stage 2 starts: T is almost surely in (0, 1]
        let m = model(2.0, 1.0, 1.0, 0.0, 1e-6, 0.39);
        let r = moments(&m, 0.0).unwrap();
        assert!(r.mean_norm < 1.0);
        assert!(r.sd_norm * r.sd_norm <= 0.25 + 1e-9);
    }

    #[test]
    fn curve_rows_follow_grid() {
        let m = model(3.0, 1.0, 1.0, 0.0, 1e4, 0.39);
        let rows = curve(&[0.0], &m).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].moments.sd_norm > 0.0);
        assert!(curve(&[], &m).is_err());
    }

    #[test]
    fn grid_has_54_points() {
        let g = parameter_grid();
        assert_eq!(g.len(), 54);
        assert!(g.iter().all(|p| p.model().is_ok()));
    }
}
