mod common;

use common::*;
use weibull_ce::estimator::{fit, FitConfig, ProfileGrid};
use weibull_ce::simulate::observed_statistics;

#[test]
fn cable_data_shape() {
    let data = table2();
    assert_eq!(data.observations.len(), 75);
    assert_eq!(data.active_count(), 74);
    assert_eq!(template().total(), 74);
}

#[test]
fn default_fit_reproduces_published_estimates() {
    let r = fit(&table2(), &FitConfig::default()).unwrap();
    assert!(r.converged);
    let published = [5.016812, 1.603875, 0.548237, 0.944054];
    for (got, want) in r.params.as_array().iter().zip(published) {
        assert!(rel_err(*got, want) < 1e-6, "{got} vs {want}");
    }
    assert!((r.loglik - -244.4626).abs() < 1e-4);
    assert!(r.residual_max <= 1e-10);
    assert_eq!(r.profile_trace.len(), 499);
    let best = r.profile_trace.iter().map(|p| p.loglik).fold(f64::MIN, f64::max);
    assert!(best <= r.loglik + 1e-9);
}

#[test]
fn starting_at_the_estimates_is_a_fixed_point() {
    let config = FitConfig {
        init: FITTED,
        profile: Some(ProfileGrid::new(FITTED[3], FITTED[3], 0.001).unwrap()),
        ..FitConfig::default()
    };
    let r = fit(&table2(), &config).unwrap();
    assert!(r.converged);
    assert!(r.iterations <= 2);
}

#[test]
fn narrow_profile_window_lands_on_a_spurious_root_or_fails() {
    let config = FitConfig {
        profile: Some(ProfileGrid::new(0.9, 0.95, 0.01).unwrap()),
        ..FitConfig::default()
    };
    let r = fit(&table2(), &config).unwrap();
    assert!(!r.converged || r.params.beta < 1.0 || (r.params.beta - 5.016812).abs() < 1e-4);
    if r.converged && r.params.beta < 1.0 {
        assert!(!r.warnings.is_empty());
    }
}

#[test]
fn chi_square_table_at_the_estimates() {
    let stats = observed_statistics(&table2(), &fitted_model(), &bins()).unwrap();
    let expected = [
        (788400.0, vec![3, 4, 2], vec![0.122186, 0.067105, 0.810709], 26.22508),
        (946080.0, vec![3, 3, 3], vec![0.479264, 0.125719, 0.395017], 3.572318),
        (998640.0, vec![3, 3, 2, 3], vec![0.225639, 0.059853, 0.064528, 0.649980], 13.19004),
    ];
    for (g, (ts, counts, probs, t)) in stats.iter().zip(expected) {
        assert_eq!(g.ts, ts);
        assert_eq!(g.counts, counts);
        for (p, q) in g.probabilities.iter().zip(probs) {
            assert!((p - q).abs() < 1e-6, "{ts}: {p} vs {q}");
        }
        assert!((g.statistic - t).abs() < 1e-4, "{ts}: {} vs {t}", g.statistic);
    }
}
