//! Integrals of the form `∫_0^∞ (u + w)^p e^{-u} du`.
//!
//! For `w` away from zero the integrand is smooth on the scale of the
//! Laguerre weight and a Gauss–Laguerre rule converges quickly; the rule is
//! doubled from 32 up to 512 nodes until successive estimates agree. Close
//! to `w = 0` the factor `(u + w)^p` with `p < 0` is nearly singular at the
//! endpoint, so that range uses the incomplete gamma identity
//! `e^w (Γ(p + 1) - γ(p + 1, w))` with the lower function by its power series.

use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 32;
pub const MAX_NODES: usize = 512;

/// Relative agreement between successive rules required to stop doubling.
const TARGET_REL: f64 = 1e-13;
/// Agreement accepted when the node cap is reached.
const ACCEPT_REL: f64 = 1e-10;
/// Below this `w` the series route is used.
const SERIES_SWITCH: f64 = 4.0;

/// Nodes and weights of an `n`-point Gauss–Laguerre rule (weight `e^{-u}`).
#[derive(Debug, Clone)]
pub struct GaussLaguerre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLaguerre {
    /// Golub–Welsch: eigen-decomposition of the Jacobi matrix.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let diag: Vec<f64> = (0..n).map(|i| (2 * i + 1) as f64).collect();
        let off: Vec<f64> = (1..n).map(|i| i as f64).collect();
        let (nodes, weights) = golub_welsch(&diag, &off, 1.0);
        GaussLaguerre { nodes, weights }
    }

    /// Cached rule for `n` in `{32, 64, 128, 256, 512}`.
    pub fn cached(n: usize) -> &'static GaussLaguerre {
        static RULES: [OnceLock<GaussLaguerre>; 5] = [
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
            OnceLock::new(),
        ];
        let slot = match n {
            32 => 0,
            64 => 1,
            128 => 2,
            256 => 3,
            512 => 4,
            _ => panic!("no cached Gauss-Laguerre rule with {n} nodes"),
        };
        RULES[slot].get_or_init(|| GaussLaguerre::new(n))
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        // smallest terms first
        self.nodes
            .iter()
            .zip(&self.weights)
            .rev()
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Value of a Laguerre-weighted integral plus how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaguerreValue {
    pub value: f64,
    /// Gauss–Laguerre nodes used; zero when the series route was taken.
    pub nodes: usize,
}

/// Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let diag = vec![0.0; n];
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        let (nodes, weights) = golub_welsch(&diag, &off, 2.0);
        GaussLegendre {
            nodes: nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: weights.iter().map(|w| 0.5 * w).collect(),
        }
    }

    /// Cached 16-point rule.
    pub fn sixteen() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(16))
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes and weights from a symmetric tridiagonal Jacobi matrix with total
/// weight `mu0`.
fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jacobi[(i, i)] = diag[i];
    }
    for (i, &b) in off.iter().enumerate() {
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (eig.eigenvalues[j], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Doubles the Gauss–Laguerre rule from 32 nodes until two successive
/// estimates of `∫_0^∞ f(u) e^{-u} du` agree.
pub fn laguerre_adaptive(f: impl Fn(f64) -> f64) -> Result<LaguerreValue> {
    let mut n = MIN_NODES;
    let mut prev = GaussLaguerre::cached(n).integrate(&f);
    loop {
        n *= 2;
        let next = GaussLaguerre::cached(n).integrate(&f);
        let diff = (next - prev).abs();
        let rel = if next == 0.0 { diff } else { diff / next.abs() };
        if rel < TARGET_REL || (n == MAX_NODES && rel < ACCEPT_REL) {
            return Ok(LaguerreValue { value: next, nodes: n });
        }
        if n == MAX_NODES {
            return Err(Error::Quadrature {
                estimate: next,
                error: diff,
            });
        }
        prev = next;
    }
}

/// `∫_0^∞ (u + w)^p e^{-u} du` for `w >= 0` and `p > -1`.
pub fn shifted_power_integral(p: f64, w: f64) -> Result<LaguerreValue> {
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::InvalidInput(format!("shift must be >= 0, got {w}")));
    }
    if p == 0.0 {
        return Ok(LaguerreValue { value: 1.0, nodes: 0 });
    }
    if !(p > -1.0) {
        return Err(Error::InvalidInput(format!(
            "exponent {p} makes the integral diverge at w = 0"
        )));
    }
    if w < SERIES_SWITCH {
        return Ok(LaguerreValue {
            value: series_route(p + 1.0, w),
            nodes: 0,
        });
    }
    laguerre_adaptive(|u| (u + w).powf(p))
}

/// `∫_0^∞ ((u + w)^{1/β} - w^{1/β}) (u + w)^{1/β - 1} e^{-u} du`.
///
/// The bracket is evaluated as `w^{1/β} expm1(ln1p(u / w) / β)` so the
/// integral stays accurate when `w` is large.
pub fn root_gap_integral(beta: f64, w: f64) -> Result<LaguerreValue> {
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta must be > 0, got {beta}")));
    }
    if !(w >= 0.0 && w.is_finite()) {
        return Err(Error::InvalidInput(format!("shift must be >= 0, got {w}")));
    }
    let inv = 1.0 / beta;
    if w < SERIES_SWITCH {
        let two = shifted_power_integral(2.0 * inv - 1.0, w)?;
        let one = shifted_power_integral(inv - 1.0, w)?;
        return Ok(LaguerreValue {
            value: two.value - w.powf(inv) * one.value,
            nodes: two.nodes.max(one.nodes),
        });
    }
    let root = w.powf(inv);
    laguerre_adaptive(|u| {
        let x = u / w;
        root * (x.ln_1p() * inv).exp_m1() * (u + w).powf(inv - 1.0)
    })
}

/// `e^w Γ(s, w)` for small `w` via `Γ(s) - γ(s, w)`.
fn series_route(s: f64, w: f64) -> f64 {
    if w == 0.0 {
        return gamma(s);
    }
    // γ(s, w) e^w = w^s Σ_k w^k / (s (s+1) ... (s+k))
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut k = 1.0;
    while term.abs() > sum.abs() * 1e-17 {
        term *= w / (s + k);
        sum += term;
        k += 1.0;
    }
    w.exp() * gamma(s) - w.powf(s) * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLaguerre::cached(32);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, max_relative = 1e-13);
        // ∫ u^5 e^{-u} = 120
        assert_relative_eq!(rule.integrate(|u| u.powi(5)), 120.0, max_relative = 1e-12);
    }

    #[test]
    fn gamma_known_values() {
        assert_relative_eq!(gamma(0.5), std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(0.2), 4.590_843_711_998_803, max_relative = 1e-14);
    }

    #[test]
    fn integral_at_zero_shift_is_gamma() {
        let v = shifted_power_integral(-0.5, 0.0).unwrap();
        assert_relative_eq!(v.value, std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert_eq!(shifted_power_integral(0.0, 3.0).unwrap().value, 1.0);
    }

    #[test]
    fn integer_exponent_closed_form() {
        // ∫ (u + w) e^{-u} = 1 + w
        for w in [0.0, 0.5, 3.9, 4.1, 50.0, 1e6] {
            let v = shifted_power_integral(1.0, w).unwrap().value;
            assert_relative_eq!(v, 1.0 + w, max_relative = 1e-13);
        }
    }

    #[test]
    fn routes_agree_at_switch() {
        for p in [-0.8, -0.5, -0.1, 0.3, 1.5] {
            let below = series_route(p + 1.0, SERIES_SWITCH);
            let rule = GaussLaguerre::cached(MAX_NODES);
            let above = rule.integrate(|u| (u + SERIES_SWITCH).powf(p));
            assert_relative_eq!(below, above, max_relative = 1e-12);
        }
    }

    #[test]
    fn legendre_rule_on_unit_interval() {
        let rule = GaussLegendre::sixteen();
        assert_relative_eq!(rule.integrate(|x| x.powi(31)), 1.0 / 32.0, max_relative = 1e-13);
        assert_relative_eq!(rule.integrate(f64::exp), 1f64.exp() - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn root_gap_matches_difference_of_integrals() {
        // beta = 1: ∫ u e^{-u} = 1 for every w
        for w in [0.0, 1.0, 10.0, 1e8] {
            assert_relative_eq!(root_gap_integral(1.0, w).unwrap().value, 1.0, max_relative = 1e-12);
        }
        // beta = 2, w = 0: ∫ u^{1/2} u^{-1/2} e^{-u} = 1
        assert_relative_eq!(root_gap_integral(2.0, 0.0).unwrap().value, 1.0, max_relative = 1e-13);
        for w in [0.5, 6.0, 40.0] {
            let b = 3.0;
            let direct = shifted_power_integral(2.0 / b - 1.0, w).unwrap().value
                - w.powf(1.0 / b) * shifted_power_integral(1.0 / b - 1.0, w).unwrap().value;
            assert_relative_eq!(root_gap_integral(b, w).unwrap().value, direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(shifted_power_integral(-1.0, 1.0).is_err());
        assert!(shifted_power_integral(0.5, -1.0).is_err());
    }
}
