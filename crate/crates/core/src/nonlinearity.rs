//! Pointwise nonlinearities `f` with `f(0) = 0`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Nonlinearity {
    /// `f(u) = u³`.
    Cubic,
    /// `f(u) = κ sin u`.
    SineGordon { kappa: f64 },
    /// `f(u) = 0`: the linear Poisson problem.
    Zero,
}

impl Nonlinearity {
    /// Parses `"cubic"`, `"sine-gordon"` (needs `parameter`) or `"zero"`.
    pub fn from_name(name: &str, parameter: Option<f64>) -> Result<Self> {
        match name {
            "cubic" => Ok(Nonlinearity::Cubic),
            "zero" => Ok(Nonlinearity::Zero),
            "sine-gordon" | "sine_gordon" | "sin" => match parameter {
                Some(kappa) => Ok(Nonlinearity::SineGordon { kappa }),
                None => Err(Error::InvalidArgument("sine-gordon needs a kappa parameter".into())),
            },
            other => Err(Error::UnknownNonlinearity(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Cubic => "cubic",
            Nonlinearity::SineGordon { .. } => "sine-gordon",
            Nonlinearity::Zero => "zero",
        }
    }

    pub fn parameter(&self) -> Option<f64> {
        match self {
            Nonlinearity::SineGordon { kappa } => Some(*kappa),
            _ => None,
        }
    }

    /// Same family with a new scalar parameter; `None` for families without one.
    pub fn with_parameter(&self, value: f64) -> Option<Self> {
        match self {
            Nonlinearity::SineGordon { .. } => Some(Nonlinearity::SineGordon { kappa: value }),
            _ => None,
        }
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Cubic => u * u * u,
            Nonlinearity::SineGordon { kappa } => kappa * u.sin(),
            Nonlinearity::Zero => 0.0,
        }
    }

    #[inline]
    pub fn f_prime(&self, u: f64) -> f64 {
        match self {
            Nonlinearity::Cubic => 3.0 * u * u,
            Nonlinearity::SineGordon { kappa } => kappa * u.cos(),
            Nonlinearity::Zero => 0.0,
        }
    }

    /// Checks `f(0) = 0` and compares `f'` with central differences at random points.
    pub fn validate(&self, seed: u64) -> Result<()> {
        if self.f(0.0) != 0.0 {
            return Err(Error::InvalidArgument(format!("{self}: f(0) != 0")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..100 {
            let u: f64 = rng.gen_range(-5.0..5.0);
            let h = 1e-5 * (1.0 + u.abs());
            let fd = (self.f(u + h) - self.f(u - h)) / (2.0 * h);
            let exact = self.f_prime(u);
            if (fd - exact).abs() > 1e-6 * exact.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{self}: f' disagrees with finite differences at u = {u}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nonlinearity::SineGordon { kappa } => write!(f, "sine-gordon(kappa={kappa})"),
            other => f.write_str(other.name()),
        }
    }
}
