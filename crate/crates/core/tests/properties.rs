mod common;

use common::*;
use proptest::prelude::*;
use weibull_ce::simulate::{failure_time, sample_failure};

fn theta() -> impl Strategy<Value = [f64; 4]> {
    (0.3f64..8.0, 0.5f64..3.5, 0.1f64..3.0, 0.0f64..0.98).prop_map(|(b, n, z, v)| [b, n, z, v])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cdf_is_a_distribution_function(theta in theta(), ts in 0.0f64..2e6, t1 in 0.0f64..60.0, dt in 0.0f64..5.0) {
        let m = model(theta, 1e4, 0.39);
        let a = m.cdf_conditional(t1, ts).unwrap();
        let b = m.cdf_conditional(t1 + dt, ts).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(a <= b);
    }

    #[test]
    fn prior_use_orders_the_cdf_by_shape(theta in theta(), ta in 0.0f64..1e6, gap in 1e3f64..1e6, frac in 0.05f64..0.95) {
        let m = model(theta, 1e4, 0.39);
        let k = m.first_effective_stage();
        let tau = (k - 2) as f64 + 3.0 * frac;
        let ga = m.cdf_conditional(tau, ta).unwrap();
        let gb = m.cdf_conditional(tau, ta + gap).unwrap();
        // only compare where both values are resolvable
        prop_assume!(ga > 1e-12 && gb > 1e-12 && ga < 1.0 - 1e-9 && gb < 1.0 - 1e-9);
        let beta = theta[0];
        if beta > 1.0 + 1e-9 {
            prop_assert!(ga < gb);
        } else if beta < 1.0 - 1e-9 {
            prop_assert!(ga > gb);
        }
    }

    #[test]
    fn sampled_time_lies_in_sampled_stage(theta in theta(), ts in 0.0f64..2e6, u in 1e-9f64..(1.0 - 1e-9)) {
        let m = model(theta, 1e4, 0.39);
        let stage_start = sample_failure(&m, ts, u).unwrap() as f64;
        let t = failure_time(&m, ts, u).unwrap();
        prop_assert!(t > stage_start - 1e-9 && t <= stage_start + 1.0 + 1e-9, "{t} vs {stage_start}");
        // t is exact up to its own rounding, so u must be bracketed by the
        // CDF a few ulps either side
        let h = 1e-13 * (1.0 + t);
        let lo = m.cdf_conditional((t - h).max(0.0), ts).unwrap();
        let hi = m.cdf_conditional(t + h, ts).unwrap();
        prop_assert!(lo <= u * (1.0 + 1e-9) && u <= hi * (1.0 + 1e-9), "{lo} <= {u} <= {hi}");
    }

    #[test]
    fn sampler_is_monotone_in_u(theta in theta(), ts in 0.0f64..2e6, u in 1e-6f64..0.5, du in 1e-6f64..0.49) {
        let m = model(theta, 1e4, 0.39);
        prop_assert!(sample_failure(&m, ts, u).unwrap() <= sample_failure(&m, ts, u + du).unwrap());
    }
}

#[test]
fn exponential_shape_forgets_prior_use() {
    let m = model([1.0, 2.0, 0.8, 0.6], 1e4, 0.39);
    for tau in [1.5, 4.0, 20.0] {
        let g0 = m.cdf_conditional(tau, 0.0).unwrap();
        for ts in [1e3, 1e5, 1e7] {
            assert!((m.cdf_conditional(tau, ts).unwrap() - g0).abs() < 1e-12);
        }
    }
}
