//! Scenario configuration: TOML sections for the kernel, firing rate, bump
//! seeding, grid, refinement, verification, and shooting, with defaults
//! matching the bundled scenarios.
//!
//! Steepness accepts the string `"inf"` (and TOML's bare `inf`) alongside
//! ordinary numbers, so steep-limit scenarios are expressible in the same
//! format as finite-steepness ones.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::firing_rates::{FiringFamily, FiringRateModel};
use crate::kernels::{KernelFamily, KernelModel};

fn config_err(key: &str, message: String) -> Error {
    Error::Config {
        key: key.into(),
        message,
    }
}

fn default_beta() -> f64 {
    f64::INFINITY
}

fn default_p() -> f64 {
    2.0
}

fn default_m() -> usize {
    1025
}

fn default_delta() -> f64 {
    0.5
}

fn default_max_iters() -> usize {
    50
}

fn default_tol() -> f64 {
    1e-10
}

fn default_residual_bound() -> f64 {
    1e-7
}

fn default_x_max() -> f64 {
    9.0
}

fn default_step() -> f64 {
    1e-3
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Accept a number or the string "inf"/"infinity" for the steepness.
fn deserialize_beta<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<f64, D::Error> {
    struct BetaVisitor;

    impl serde::de::Visitor<'_> for BetaVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or the string \"inf\"")
        }

        fn visit_f64<E: serde::de::Error>(self, value: f64) -> std::result::Result<f64, E> {
            Ok(value)
        }

        fn visit_i64<E: serde::de::Error>(self, value: i64) -> std::result::Result<f64, E> {
            Ok(value as f64)
        }

        fn visit_u64<E: serde::de::Error>(self, value: u64) -> std::result::Result<f64, E> {
            Ok(value as f64)
        }

        fn visit_str<E: serde::de::Error>(self, value: &str) -> std::result::Result<f64, E> {
            if value.eq_ignore_ascii_case("inf") || value.eq_ignore_ascii_case("infinity") {
                Ok(f64::INFINITY)
            } else {
                Err(E::custom(format!(
                    "steepness must be a number or \"inf\", got {value:?}"
                )))
            }
        }
    }

    deserializer.deserialize_any(BetaVisitor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiringFamilyName {
    Hill,
    Logistic,
    Step,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiringSection {
    pub family: FiringFamilyName,
    /// Steepness; defaults to infinity, which only the step family accepts.
    #[serde(default = "default_beta", deserialize_with = "deserialize_beta")]
    pub beta: f64,
    pub h: f64,
    /// Hill exponent; ignored by the other families.
    #[serde(default = "default_p")]
    pub p: f64,
    /// Let refinement run on families that violate the support hypothesis.
    #[serde(default)]
    pub allow_unsupported: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSection {
    /// Number of crossing half-positions (N = 1 is a single bump).
    #[serde(rename = "N")]
    pub n: usize,
    pub initial_guess: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    /// Grid half-width margin beyond the outermost crossing.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            m: default_m(),
            delta: default_delta(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementSection {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub exact_pn: bool,
}

impl Default for RefinementSection {
    fn default() -> Self {
        RefinementSection {
            max_iters: default_max_iters(),
            tol: default_tol(),
            exact_pn: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_residual_bound")]
    pub residual_bound: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            residual_bound: default_residual_bound(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootSection {
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

impl Default for ShootSection {
    fn default() -> Self {
        ShootSection {
            x_max: default_x_max(),
            step: default_step(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir() }
    }
}

/// A full scenario: everything the command-line pipelines need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kernel: KernelFamily,
    pub firing: FiringSection,
    pub bump: BumpSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub refinement: RefinementSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub shoot: ShootSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path).map_err(|err| {
            config_err("config", format!("cannot read {}: {err}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Parse and validate. TOML errors carry the offending key or position
    /// in their message.
    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|err| config_err("config", err.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|err| config_err("config", err.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Err(err) = KernelModel::new(self.kernel) {
            return Err(config_err("kernel", err.to_string()));
        }
        if !(self.firing.h > 0.0 && self.firing.h.is_finite()) {
            return Err(config_err(
                "firing.h",
                format!("threshold must be positive and finite, got {}", self.firing.h),
            ));
        }
        match self.firing.family {
            FiringFamilyName::Hill => {
                if !(self.firing.p > 1.0 && self.firing.p.is_finite()) {
                    return Err(config_err(
                        "firing.p",
                        format!("the hill exponent must exceed 1, got {}", self.firing.p),
                    ));
                }
                if !(self.firing.beta > 0.0 && self.firing.beta.is_finite()) {
                    return Err(config_err(
                        "firing.beta",
                        format!(
                            "the hill family needs a finite positive steepness, got {}",
                            self.firing.beta
                        ),
                    ));
                }
            }
            FiringFamilyName::Logistic => {
                if !(self.firing.beta > 0.0 && self.firing.beta.is_finite()) {
                    return Err(config_err(
                        "firing.beta",
                        format!(
                            "the logistic family needs a finite positive steepness, got {}",
                            self.firing.beta
                        ),
                    ));
                }
            }
            FiringFamilyName::Step => {}
        }
        if self.bump.n == 0 {
            return Err(config_err("bump.N", "need at least one crossing".into()));
        }
        if self.bump.initial_guess.len() != self.bump.n {
            return Err(config_err(
                "bump.initial_guess",
                format!(
                    "expected {} entries to seed {} crossings, got {}",
                    self.bump.n,
                    self.bump.n,
                    self.bump.initial_guess.len()
                ),
            ));
        }
        let ordered = self
            .bump
            .initial_guess
            .windows(2)
            .all(|pair| pair[0] < pair[1]);
        let positive = self
            .bump
            .initial_guess
            .iter()
            .all(|a| *a > 0.0 && a.is_finite());
        if !(ordered && positive) {
            return Err(config_err(
                "bump.initial_guess",
                format!(
                    "guesses must be positive, finite, and strictly increasing, got {:?}",
                    self.bump.initial_guess
                ),
            ));
        }
        if self.grid.m < 65 || self.grid.m % 2 == 0 {
            return Err(config_err(
                "grid.M",
                format!(
                    "grid needs an odd node count of at least 65, got {}",
                    self.grid.m
                ),
            ));
        }
        if !(self.grid.delta > 0.0 && self.grid.delta.is_finite()) {
            return Err(config_err(
                "grid.delta",
                format!("grid margin must be positive and finite, got {}", self.grid.delta),
            ));
        }
        if !(self.refinement.tol > 0.0 && self.refinement.tol.is_finite()) {
            return Err(config_err(
                "refinement.tol",
                format!("tolerance must be positive and finite, got {}", self.refinement.tol),
            ));
        }
        if self.refinement.max_iters == 0 {
            return Err(config_err(
                "refinement.max_iters",
                "need at least one iteration".into(),
            ));
        }
        if !(self.verify.residual_bound > 0.0 && self.verify.residual_bound.is_finite()) {
            return Err(config_err(
                "verify.residual_bound",
                format!(
                    "residual bound must be positive and finite, got {}",
                    self.verify.residual_bound
                ),
            ));
        }
        if !(self.shoot.x_max > 0.0 && self.shoot.x_max.is_finite()) {
            return Err(config_err(
                "shoot.x_max",
                format!("x_max must be positive and finite, got {}", self.shoot.x_max),
            ));
        }
        if !(self.shoot.step != 0.0 && self.shoot.step.is_finite()) {
            return Err(config_err(
                "shoot.step",
                format!("step must be nonzero and finite, got {}", self.shoot.step),
            ));
        }
        Ok(())
    }

    pub fn kernel_model(&self) -> Result<KernelModel> {
        KernelModel::new(self.kernel).map_err(|err| config_err("kernel", err.to_string()))
    }

    pub fn firing_model(&self) -> Result<FiringRateModel> {
        let family = match self.firing.family {
            FiringFamilyName::Hill => FiringFamily::Hill { p: self.firing.p },
            FiringFamilyName::Logistic => FiringFamily::Logistic,
            FiringFamilyName::Step => FiringFamily::Step,
        };
        FiringRateModel::new(family, self.firing.beta, self.firing.h)
            .map_err(|err| config_err("firing", err.to_string()))
    }
}
