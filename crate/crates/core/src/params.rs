//! Parameter vector and test plan of the normalized model.
//!
//! Time is measured in units of the stage length and stress in units of the
//! in-service stress, so a test plan reduces to a single number: the
//! normalized voltage step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized voltage step of the 22 kV XLPE cable test: a 5 kV
/// single-phase step over an in-service stress of 22/sqrt(3) kV.
pub const DV_22KV: f64 = 0.393_647_910_811_108_45;

/// Normalizer for the scale parameter used throughout the cable example.
pub const DEFAULT_K0: f64 = 1.0e4;

/// Identifies one of the four estimated parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Beta,
    N,
    Zeta,
    VTh,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::Beta, Param::N, Param::Zeta, Param::VTh];

    pub fn index(self) -> usize {
        match self {
            Param::Beta => 0,
            Param::N => 1,
            Param::Zeta => 2,
            Param::VTh => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Param::Beta => "beta",
            Param::N => "n",
            Param::Zeta => "zeta",
            Param::VTh => "v_th",
        }
    }
}

/// Estimated parameters plus the fixed scale normalizer.
///
/// `zeta` is the ratio of the normalized scale constant to `k0`; the
/// product `k0 * zeta` is the normalized inverse-power-law constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub n: f64,
    pub zeta: f64,
    pub v_th: f64,
    pub k0: f64,
}

impl ModelParams {
    pub fn new(beta: f64, n: f64, zeta: f64, v_th: f64, k0: f64) -> Result<Self> {
        let p = ModelParams {
            beta,
            n,
            zeta,
            v_th,
            k0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from `[beta, n, zeta, v_th]`.
    pub fn from_array(theta: [f64; 4], k0: f64) -> Result<Self> {
        Self::new(theta[0], theta[1], theta[2], theta[3], k0)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.beta, self.n, self.zeta, self.v_th]
    }

    pub fn get(&self, p: Param) -> f64 {
        self.as_array()[p.index()]
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {x}")))
            }
        };
        positive("beta", self.beta)?;
        positive("n", self.n)?;
        positive("zeta", self.zeta)?;
        positive("k0", self.k0)?;
        if !(self.v_th.is_finite() && (0.0..1.0).contains(&self.v_th)) {
            return Err(Error::InvalidParameter(format!(
                "v_th must lie in [0, 1), got {}",
                self.v_th
            )));
        }
        Ok(())
    }

    /// Normalized scale constant `k0 * zeta`.
    pub fn k_tilde(&self) -> f64 {
        self.k0 * self.zeta
    }
}

/// Uniform step plan in normalized units.
///
/// Stage `i >= 2` covers normalized time `(i - 2, i - 1]` at stress
/// `(i - 1) * dv`; the test starts at time 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestPlan {
    pub dv: f64,
}

impl TestPlan {
    pub fn new(dv: f64) -> Result<Self> {
        if dv.is_finite() && dv > 0.0 {
            Ok(TestPlan { dv })
        } else {
            Err(Error::InvalidParameter(format!("dv must be > 0, got {dv}")))
        }
    }

    /// Plan of the 22 kV cable data set.
    pub fn cable_22kv() -> Self {
        TestPlan { dv: DV_22KV }
    }
}
