//! Run configuration loaded from JSON.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sgsem_core::eigen::{Normalization, RectDomain};
use sgsem_core::newton::NewtonConfig;
use sgsem_core::{MassQuadrature, Nonlinearity};

pub const RNG_SEED_ENV: &str = "SGSEM_RNG_SEED";

/// Everything a run needs. Unknown keys are rejected.
///
/// ```json
/// {
///   "domain": { "x_lo": 0, "x_hi": 3.141592653589793, "y_lo": 0, "y_hi": 3.141592653589793 },
///   "nonlinearity": { "name": "sine-gordon", "kappa": 11 },
///   "n": 32,
///   "seeds": { "random": { "basis_size": 10, "trials": 2000 } },
///   "newton": { "tol": 1e-10 },
///   "rng_seed": 42
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "RectDomain::pi_square")]
    pub domain: RectDomain,
    #[serde(default = "default_nonlinearity")]
    pub nonlinearity: Nonlinearity,
    /// Polynomial order per direction.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Defaults to the λ = 2 group for the cubic problem and to a random
    /// search over ten eigenfunctions otherwise.
    #[serde(default)]
    pub seeds: Option<SeedSpec>,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub mass: MassQuadrature,
    /// Run directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub converge: ConvergeSpec,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default = "default_resolution")]
    pub export_resolution: usize,
}

fn default_nonlinearity() -> Nonlinearity {
    Nonlinearity::Cubic
}

fn default_n() -> usize {
    32
}

fn default_resolution() -> usize {
    101
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SeedSpec {
    /// One group per eigenvalue. Cubic: closed-form enumeration; otherwise a
    /// random search restricted to the group.
    Eigen {
        lambda: Vec<f64>,
        /// Refine each seed on the first `extend_to` eigenfunctions.
        #[serde(default)]
        extend_to: Option<usize>,
    },
    Explicit {
        seeds: Vec<ExplicitSeed>,
    },
    Random {
        #[serde(default = "default_basis_size")]
        basis_size: usize,
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default = "default_box")]
        box_size: f64,
    },
}

fn default_basis_size() -> usize {
    10
}

fn default_trials() -> usize {
    2000
}

fn default_box() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSeed {
    #[serde(default)]
    pub label: Option<String>,
    pub basis: Vec<(usize, usize)>,
    pub coefficients: Vec<f64>,
    #[serde(default = "default_normalization")]
    pub normalization: Normalization,
}

fn default_normalization() -> Normalization {
    Normalization::UnitAmplitude
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSpec {
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_reference_n")]
    pub reference_n: usize,
    /// Seed to study; the first generated seed when absent.
    #[serde(default)]
    pub seed_label: Option<String>,
}

impl Default for ConvergeSpec {
    fn default() -> Self {
        Self {
            n_list: default_n_list(),
            reference_n: default_reference_n(),
            seed_label: None,
        }
    }
}

fn default_n_list() -> Vec<usize> {
    vec![8, 16, 24, 32, 40, 48]
}

fn default_reference_n() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    #[serde(default = "default_kappas")]
    pub kappa: Vec<f64>,
    /// Nodal l∞ distance below which two solutions (after sign
    /// canonicalization) are the same.
    #[serde(default = "default_dedup")]
    pub dedup_tol: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            kappa: default_kappas(),
            dedup_tol: default_dedup(),
        }
    }
}

fn default_kappas() -> Vec<f64> {
    vec![1.0, 4.0, 6.0, 9.0, 11.0]
}

fn default_dedup() -> f64 {
    1e-6
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    /// Applies overrides in increasing precedence: environment, then flags.
    pub fn resolve(
        mut self,
        env_seed: Option<&str>,
        flag_seed: Option<u64>,
        flag_n: Option<usize>,
    ) -> anyhow::Result<Self> {
        if let Some(v) = env_seed {
            self.rng_seed = v
                .trim()
                .parse()
                .with_context(|| format!("{RNG_SEED_ENV}={v:?} is not an unsigned integer"))?;
        }
        if let Some(s) = flag_seed {
            self.rng_seed = s;
        }
        if let Some(n) = flag_n {
            self.n = n;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.domain.validate()?;
        if self.n < 2 {
            bail!("n must be at least 2 (got {})", self.n);
        }
        self.newton.validate()?;
        self.nonlinearity.validate(self.rng_seed)?;
        if self.export_resolution < 2 {
            bail!("export_resolution must be at least 2");
        }
        match &self.seeds {
            Some(SeedSpec::Eigen { lambda, extend_to }) => {
                if lambda.is_empty() {
                    bail!("seeds.eigen.lambda is empty");
                }
                if extend_to == &Some(0) {
                    bail!("seeds.eigen.extend_to must be positive");
                }
            }
            Some(SeedSpec::Explicit { seeds }) => {
                for s in seeds {
                    if s.basis.is_empty() || s.basis.len() != s.coefficients.len() {
                        bail!("explicit seed needs matching non-empty basis and coefficients");
                    }
                    if s.basis.iter().any(|&(m, n)| m == 0 || n == 0) {
                        bail!("eigenfunction indices start at 1");
                    }
                }
            }
            Some(SeedSpec::Random {
                basis_size,
                trials,
                box_size,
            }) if *basis_size == 0 || *trials == 0 || !(*box_size > 0.0) => {
                bail!("random search needs positive basis_size, trials and box_size");
            }
            Some(SeedSpec::Random { .. }) => {}
            None => {}
        }
        if !(self.scan.dedup_tol > 0.0) {
            bail!("scan.dedup_tol must be positive");
        }
        Ok(())
    }

    pub fn seed_spec(&self) -> SeedSpec {
        self.seeds.clone().unwrap_or(match self.nonlinearity {
            Nonlinearity::Cubic => SeedSpec::Eigen {
                lambda: vec![2.0],
                extend_to: None,
            },
            _ => SeedSpec::Random {
                basis_size: default_basis_size(),
                trials: default_trials(),
                box_size: default_box(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.n, 32);
        assert_eq!(c.domain, RectDomain::pi_square());
        assert_eq!(c.nonlinearity, Nonlinearity::Cubic);
        assert_eq!(c.mass, MassQuadrature::Exact);
        assert!(matches!(c.seed_spec(), SeedSpec::Eigen { .. }));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"N": 16}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"newton": {"tolerance": 1}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"nonlinearity": {"name": "quartic"}}"#).is_err());
    }

    #[test]
    fn precedence_of_seed_sources() {
        let c = RunConfig {
            rng_seed: 1,
            ..RunConfig::default()
        };
        assert_eq!(c.clone().resolve(None, None, None).unwrap().rng_seed, 1);
        assert_eq!(c.clone().resolve(Some("7"), None, None).unwrap().rng_seed, 7);
        assert_eq!(c.clone().resolve(Some("7"), Some(9), Some(12)).unwrap().rng_seed, 9);
        assert!(c.resolve(Some("seven"), None, None).is_err());
    }

    #[test]
    fn validation() {
        let bad_n = RunConfig {
            n: 1,
            ..RunConfig::default()
        };
        assert!(bad_n.validate().is_err());
        let c: RunConfig =
            serde_json::from_str(r#"{"seeds": {"explicit": {"seeds": [{"basis": [[0, 1]], "coefficients": [1]}]}}}"#)
                .unwrap();
        assert!(c.validate().is_err());
        let c: RunConfig = serde_json::from_str(
            r#"{"nonlinearity": {"name": "sine-gordon", "kappa": 6}, "seeds": {"random": {"trials": 50}}, "mass": "lgl"}"#,
        )
        .unwrap();
        assert!(c.validate().is_ok());
        assert_eq!(c.mass, MassQuadrature::Lgl);
    }
}
