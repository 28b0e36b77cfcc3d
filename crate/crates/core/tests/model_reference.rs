mod common;

use common::*;
use oracle::Reference;
use weibull_ce::likelihood::log_likelihood;
use weibull_ce::simulate::group_probabilities;

const THETAS: [[f64; 4]; 5] = [
    FITTED,
    [2.0, 1.0, 1.0, 0.0],
    [0.5, 3.0, 0.2, 0.5],
    [1.0, 2.0, 2.5, 0.9],
    [3.0, 2.5, 0.8, 0.39],
];

#[test]
fn exposure_and_survival_match_reference() {
    for theta in THETAS {
        for (k0, dv) in [(1e4, 0.39), (1e3, 0.5), (1e5, 0.25)] {
            let m = model(theta, k0, dv);
            let r = Reference::new(theta, k0, dv);
            assert_eq!(m.first_effective_stage(), r.first_stage());
            for ts in [0.0, 1e3, 5e5, 1e7] {
                for tau in [0.0, 0.3, 1.0, 2.5, 7.0, 19.75, 40.0] {
                    let e = m.exposure(tau, ts).unwrap().value();
                    let er = r.exposure(tau, ts);
                    assert!((e - er).abs() <= 1e-12 * er.max(1e-300), "{theta:?} {tau} {ts}");
                    let ls = m.log_survival(tau, ts).unwrap();
                    let lr = r.log_survival(tau, ts);
                    assert!((ls - lr).abs() <= 1e-10 * lr.abs().max(1e-12), "{theta:?} {tau} {ts}: {ls} vs {lr}");
                }
            }
        }
    }
}

#[test]
fn stage_probabilities_match_reference_and_sum_to_one() {
    for theta in THETAS {
        let m = model(theta, 1e4, 0.39);
        let r = Reference::new(theta, 1e4, 0.39);
        for ts in [0.0, 2e5, 1e6] {
            let k = m.first_effective_stage();
            let mut total = 0.0;
            for l in k..k + 2000 {
                let p = m.stage_probability(l, ts).unwrap();
                let pr = r.stage_probability(l, ts);
                assert!((p - pr).abs() <= 1e-12 + 1e-9 * pr, "{theta:?} l={l}: {p} vs {pr}");
                total += p;
            }
            assert!((total - 1.0).abs() < 1e-9, "{theta:?} ts={ts}: {total}");
        }
    }
}

#[test]
fn stages_before_the_threshold_are_rejected() {
    let m = model([2.0, 2.0, 1.0, 0.9], 1e4, 0.39);
    assert_eq!(m.first_effective_stage(), 4);
    assert!(m.stage_probability(3, 0.0).is_err());
    assert_eq!(m.cdf_conditional(2.0, 1e5).unwrap(), 0.0);
}

#[test]
fn log_likelihood_matches_reference_on_cable_data() {
    let data = table2();
    let obs = pairs(&data);
    for theta in THETAS {
        let ll = log_likelihood(&data, &params(theta)).unwrap();
        let reference = Reference::new(theta, 1e4, data.plan.dv).log_likelihood(&obs);
        assert!(rel_err(ll, reference) < 1e-10, "{theta:?}: {ll} vs {reference}");
    }
}

#[test]
fn bin_probabilities_match_reference_cdf() {
    let m = fitted_model();
    let r = fitted_reference();
    for g in bins().groups() {
        let p = group_probabilities(&m, g).unwrap();
        let mut prev = 0.0;
        for (i, e) in g.edges.iter().enumerate() {
            let c = r.cdf(*e, g.ts);
            assert!((p[i] - (c - prev)).abs() < 1e-12);
            prev = c;
        }
        assert!((p.last().unwrap() - (1.0 - prev)).abs() < 1e-12);
    }
}

#[test]
fn raising_service_stress_is_more_prior_exposure() {
    let theta = [3.0, 2.0, 0.7, 0.5];
    let m = model(theta, 1e4, 0.39).with_service_stress(1.3).unwrap();
    let mut r = Reference::new(theta, 1e4, 0.39);
    r.service = 1.3;
    for tau in [1.5, 3.0, 9.0] {
        assert!(rel_err(m.cdf_conditional(tau, 4e5).unwrap(), r.cdf(tau, 4e5)) < 1e-10);
    }
    assert!(model(theta, 1e4, 0.39).with_service_stress(0.4).is_err());
}
