mod common;

use common::*;
use oracle::Reference;
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weibull_ce::moments::{curve, moments, parameter_grid};
use weibull_ce::params::{DEFAULT_K0, DV_22KV};

const TS: [f64; 4] = [0.0, 1e4, 3e5, 1e7];

#[test]
fn grid_moments_match_survival_quadrature() {
    let mut worst: f64 = 0.0;
    for g in parameter_grid() {
        let m = g.model().unwrap();
        let r = Reference::new([g.beta, g.n, 1.0, g.v_th], g.k_tilde, g.dv);
        for ts in TS {
            let lib = moments(&m, ts).unwrap();
            let (mean, second) = r.moments_by_quadrature(ts);
            let e = rel_err(lib.mean_norm, mean).max(rel_err(lib.second_norm, second));
            assert!(e < 1e-6, "{g:?} ts={ts}: mean {} vs {mean}, second {} vs {second}", lib.mean_norm, lib.second_norm);
            worst = worst.max(e);
        }
    }
    println!("worst relative error {worst:e}");
}

#[test]
fn fitted_and_off_grid_moments_match_quadrature() {
    let cases = [
        (FITTED, DEFAULT_K0, DV_22KV),
        ([1.0, 2.0, 1.0, 0.5], 1e4, 0.39),
        ([0.5, 1.5, 0.3, 0.2], 1e3, 0.39),
        ([0.8, 3.0, 2.0, 0.0], 1e4, 0.5),
        ([8.0, 1.0, 0.5, 0.95], 1e4, 0.39),
    ];
    for (theta, k0, dv) in cases {
        let m = model(theta, k0, dv);
        let r = Reference::new(theta, k0, dv);
        for ts in [0.0, 1e3, 1e6] {
            let lib = moments(&m, ts).unwrap();
            let (mean, second) = r.moments_by_quadrature(ts);
            assert!(rel_err(lib.mean_norm, mean) < 1e-6, "{theta:?} ts={ts}: {} vs {mean}", lib.mean_norm);
            assert!(rel_err(lib.second_norm, second) < 1e-6, "{theta:?} ts={ts}");
            let sd = (second - mean * mean).sqrt();
            assert!(rel_err(lib.sd_norm, sd) < 1e-5, "{theta:?} ts={ts}");
        }
    }
}

#[test]
fn moments_match_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = parameter_grid();
    for (j, g) in grid.iter().enumerate().step_by(9) {
        let m = g.model().unwrap();
        let r = Reference::new([g.beta, g.n, 1.0, g.v_th], g.k_tilde, g.dv);
        let ts = TS[j % TS.len()];
        let lib = moments(&m, ts).unwrap();
        let mc = r.monte_carlo_moments(ts, 200_000, || rng.sample(Open01));
        assert!((lib.mean_norm - mc.mean).abs() < 3.0 * mc.mean_se, "{g:?}: {} vs {mc:?}", lib.mean_norm);
        assert!((lib.second_norm - mc.second).abs() < 3.0 * mc.second_se, "{g:?}: {} vs {mc:?}", lib.second_norm);
    }
}

#[test]
fn curves_are_monotone_in_prior_exposure() {
    let ts: Vec<f64> = (0..30).map(|j| 1e3 * 10f64.powf(j as f64 * 4.0 / 29.0)).collect();
    for g in parameter_grid() {
        let rows = curve(&ts, &g.model().unwrap()).unwrap();
        assert!(rows.windows(2).all(|w| w[1].moments.mean_norm <= w[0].moments.mean_norm), "{g:?}");
    }
    let flat = curve(&ts, &model([1.0, 2.0, 1.0, 0.5], 1e4, 0.39)).unwrap();
    let first = flat[0].moments.mean_norm;
    assert!(flat.iter().all(|r| (r.moments.mean_norm - first).abs() <= 1e-12 * first));
}
