//! Reference computations for the test suites.
//!
//! Everything here is written straight from the model definition, with no
//! closed forms and no code shared with the library: exposure is summed stage
//! by stage, moments are integrals of the survival function by adaptive
//! Gauss-Kronrod quadrature, and failure times come from direct inversion.

/// Model in normalized units, evaluated the slow and obvious way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub beta: f64,
    pub n: f64,
    pub zeta: f64,
    pub v_th: f64,
    pub k0: f64,
    pub dv: f64,
    /// In-service stress relative to the reference stress.
    pub service: f64,
}

impl Reference {
    pub fn new(theta: [f64; 4], k0: f64, dv: f64) -> Self {
        Reference {
            beta: theta[0],
            n: theta[1],
            zeta: theta[2],
            v_th: theta[3],
            k0,
            dv,
            service: 1.0,
        }
    }

    /// Least stage `i >= 2` whose stress `(i - 1) dv` exceeds `v_th`.
    pub fn first_stage(&self) -> usize {
        (2..).find(|&i| (i - 1) as f64 * self.dv > self.v_th).unwrap()
    }

    /// Exposure rate of stage `m`, which covers normalized time `(m - 2, m - 1]`.
    pub fn rate(&self, m: usize) -> f64 {
        let excess = (m - 1) as f64 * self.dv - self.v_th;
        if excess <= 0.0 {
            0.0
        } else {
            excess.powf(self.n) / (self.k0 * self.zeta)
        }
    }

    pub fn prior(&self, ts: f64) -> f64 {
        (self.service - self.v_th).powf(self.n) / (self.k0 * self.zeta) * ts
    }

    pub fn exposure(&self, tau: f64, ts: f64) -> f64 {
        self.prior(ts) + self.test_exposure(tau)
    }

    /// Exposure accumulated during the test up to `tau`.
    pub fn test_exposure(&self, tau: f64) -> f64 {
        let mut e = 0.0;
        for m in 2.. {
            let a = (m - 2) as f64;
            if tau <= a {
                break;
            }
            e += self.rate(m) * (tau.min(a + 1.0) - a);
        }
        e
    }

    /// `ln S(tau | ts)`, the log probability of surviving the test to `tau`.
    pub fn log_survival(&self, tau: f64, ts: f64) -> f64 {
        -pow_gap(self.prior(ts), self.test_exposure(tau), self.beta)
    }

    pub fn survival(&self, tau: f64, ts: f64) -> f64 {
        self.log_survival(tau, ts).exp()
    }

    pub fn cdf(&self, tau: f64, ts: f64) -> f64 {
        -self.log_survival(tau, ts).exp_m1()
    }

    /// Probability of failing in stage `l`, i.e. in `(l - 2, l - 1]`.
    pub fn stage_probability(&self, l: usize, ts: f64) -> f64 {
        let a = (l - 2) as f64;
        self.survival(a, ts) - self.survival(a + 1.0, ts)
    }

    /// Log-likelihood of interval-censored failures given as
    /// `(ts, stage_start)` pairs, the failure lying in `(stage_start, stage_start + 1]`.
    pub fn log_likelihood(&self, data: &[(f64, u32)]) -> f64 {
        data.iter()
            .map(|&(ts, s)| {
                let a = s as f64;
                let ea = self.exposure(a, ts);
                let stage = self.test_exposure(a + 1.0) - self.test_exposure(a);
                self.log_survival(a, ts) + (-(-pow_gap(ea, stage, self.beta)).exp_m1()).ln()
            })
            .sum()
    }

    /// `E[T]` and `E[T^2]` as integrals of the survival function.
    ///
    /// The range is split at stage boundaries and at failure-time quantiles
    /// spaced geometrically in `-ln S`, so panels follow the drop of `S`
    /// whatever its time scale.
    pub fn moments_by_quadrature(&self, ts: f64) -> (f64, f64) {
        let start = (self.first_stage() - 2) as f64;
        let mut cuts = vec![start];
        let mut x: f64 = 1e-12;
        while x < 46.0 {
            cuts.push(self.failure_time(ts, -(-x).exp_m1()));
            x *= 1.5;
        }
        let end = *cuts.last().unwrap();
        let mut b = start.floor() + 1.0;
        while b < end {
            cuts.push(b);
            b += 1.0;
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let scale = self.failure_time(ts, 0.5);
        let s = |t: f64| self.survival(t, ts);
        let mut mean = start;
        let mut second = start * start;
        for w in cuts.windows(2) {
            mean += gauss_kronrod(s, w[0], w[1], 1e-15 * scale);
            second += gauss_kronrod(|t| 2.0 * t * s(t), w[0], w[1], 1e-15 * scale * scale);
        }
        (mean, second)
    }

    /// Failure time of the draw `u` in (0, 1), by inverting the CDF.
    pub fn failure_time(&self, ts: f64, u: f64) -> f64 {
        let e0 = self.prior(ts);
        let x = -(-u).ln_1p();
        let mut remaining = if e0 == 0.0 {
            x.powf(1.0 / self.beta)
        } else {
            // (e0^β + x)^{1/β} - e0 without cancellation
            let ratio = (x.ln() - self.beta * e0.ln()).exp();
            e0 * (ratio.ln_1p() / self.beta).exp_m1()
        };
        for m in self.first_stage().. {
            let r = self.rate(m);
            if remaining <= r {
                return (m - 2) as f64 + remaining / r;
            }
            remaining -= r;
        }
        unreachable!()
    }

    /// Sample moments of `samples` failure times drawn with `uniform`.
    pub fn monte_carlo_moments(
        &self,
        ts: f64,
        samples: usize,
        mut uniform: impl FnMut() -> f64,
    ) -> MonteCarlo {
        let mut s1 = Summary::default();
        let mut s2 = Summary::default();
        for _ in 0..samples {
            let t = self.failure_time(ts, uniform());
            s1.push(t);
            s2.push(t * t);
        }
        MonteCarlo {
            mean: s1.mean(),
            mean_se: s1.standard_error(),
            second: s2.mean(),
            second_se: s2.standard_error(),
        }
    }
}

/// `(b + d)^β - b^β` for `b, d >= 0`, accurate when `d << b`.
pub fn pow_gap(b: f64, d: f64, beta: f64) -> f64 {
    if b == 0.0 {
        d.powf(beta)
    } else {
        b.powf(beta) * (beta * (d / b).ln_1p()).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub mean: f64,
    pub mean_se: f64,
    pub second: f64,
    pub second_se: f64,
}

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default)]
struct Summary {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Summary {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    fn standard_error(&self) -> f64 {
        (self.m2 / (self.count - 1.0) / self.count).sqrt()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
/// Weights of the embedded 7-point Gauss rule at `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let pair = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

/// Adaptive Gauss-Kronrod 7/15 integral of `f` over `[a, b]`. Panels are
/// bisected until their embedded error estimate is below their share of
/// `abs_tol`, or below rounding level, at most 30 levels deep.
pub fn gauss_kronrod(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64) -> f64 {
    fn step(f: &impl Fn(f64) -> f64, a: f64, b: f64, panel: (f64, f64), tol: f64, depth: u32) -> f64 {
        let (value, err) = panel;
        if depth == 0 || err <= tol.max(1e-14 * value.abs()) {
            return value;
        }
        let m = 0.5 * (a + b);
        step(f, a, m, gk15(f, a, m), 0.5 * tol, depth - 1)
            + step(f, m, b, gk15(f, m, b), 0.5 * tol, depth - 1)
    }
    step(&f, a, b, gk15(&f, a, b), abs_tol, 30)
}

/// Derivative of `f` at `x` by Richardson-extrapolated central differences.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let central = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * central(h / 2.0) - central(h)) / 3.0
}
