//! Sigmoid firing-rate families and the unit-step limit.
//!
//! All families share a threshold `h > 0` and steepness `beta`. The Hill
//! family `f(t) = z^p / (z^p + 1)` with `z = beta (t - h)` clipped at zero is
//! the default: it vanishes identically below threshold, which the bump
//! construction relies on. The logistic family is positive below threshold
//! and is therefore flagged by the assumption check; it is kept only for
//! comparison runs.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FiringFamily {
    /// f(t) = z^p / (z^p + 1) for z = beta (t - h) > 0, else 0; needs p > 1.
    Hill { p: f64 },
    /// f(t) = 1 / (1 + exp(-beta (t - h))); violates the support hypothesis.
    Logistic,
    /// f(t) = 1 on [h, inf), 0 below: the beta = infinity limit.
    Step,
}

/// A validated firing-rate function with threshold and steepness.
#[derive(Debug, Clone, Copy)]
pub struct FiringRateModel {
    pub family: FiringFamily,
    pub beta: f64,
    pub h: f64,
}

impl FiringRateModel {
    /// Validate and build. The step family always carries `beta = infinity`;
    /// Hill and logistic require finite positive `beta`.
    pub fn new(family: FiringFamily, beta: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "threshold h must be positive and finite, got {h}"
            )));
        }
        match family {
            FiringFamily::Step => Ok(FiringRateModel {
                family,
                beta: f64::INFINITY,
                h,
            }),
            FiringFamily::Hill { p } => {
                if !(p > 1.0 && p.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "Hill exponent p must exceed 1, got {p}"
                    )));
                }
                require_finite_beta(beta)?;
                Ok(FiringRateModel { family, beta, h })
            }
            FiringFamily::Logistic => {
                require_finite_beta(beta)?;
                Ok(FiringRateModel { family, beta, h })
            }
        }
    }

    /// The steep limit with threshold `h`.
    pub fn step(h: f64) -> Result<Self> {
        Self::new(FiringFamily::Step, f64::INFINITY, h)
    }

    /// Same family and threshold at a different steepness.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(self.family, beta, self.h)
    }

    pub fn is_step(&self) -> bool {
        matches!(self.family, FiringFamily::Step)
    }

    /// f_beta(t), always in [0, 1].
    pub fn eval(&self, t: f64) -> f64 {
        match self.family {
            FiringFamily::Hill { p } => {
                let z = self.beta * (t - self.h);
                if z <= 0.0 {
                    0.0
                } else if z <= 1.0 {
                    let zp = z.powf(p);
                    zp / (zp + 1.0)
                } else {
                    // reciprocal form avoids overflow of z^p for large z
                    1.0 / (1.0 + z.powf(-p))
                }
            }
            FiringFamily::Logistic => {
                let x = self.beta * (t - self.h);
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            FiringFamily::Step => {
                // closed endpoint convention: f(h) = 1
                if t >= self.h {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// f_beta'(t) >= 0; errors for the step family, whose derivative is not a
    /// function.
    pub fn deriv(&self, t: f64) -> Result<f64> {
        if self.is_step() {
            return Err(Error::NotApplicable(
                "the step firing rate has no pointwise derivative".into(),
            ));
        }
        Ok(self.deriv_finite(t))
    }

    /// Derivative for the finite-beta families. Callers must have checked
    /// `!is_step()`; operator code does so once per run.
    pub(crate) fn deriv_finite(&self, t: f64) -> f64 {
        match self.family {
            FiringFamily::Hill { p } => {
                let z = self.beta * (t - self.h);
                if z <= 0.0 {
                    0.0
                } else if z <= 1.0 {
                    let zp = z.powf(p);
                    self.beta * p * z.powf(p - 1.0) / ((zp + 1.0) * (zp + 1.0))
                } else {
                    let zr = z.powf(-p);
                    self.beta * p * z.powf(-p - 1.0) / ((1.0 + zr) * (1.0 + zr))
                }
            }
            FiringFamily::Logistic => {
                let s = self.eval(t);
                self.beta * s * (1.0 - s)
            }
            FiringFamily::Step => unreachable!("checked by deriv()"),
        }
    }
}

fn require_finite_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "steepness beta must be positive and finite, got {beta}; \
             use the step family for the steep limit"
        )))
    }
}

/// Result of checking the firing-rate hypotheses on a finite-beta model:
/// monotonicity, vanishing below threshold, and decay of the superthreshold
/// derivative bound C(xi) as beta grows.
#[derive(Debug, Clone, Serialize)]
pub struct FiringAssumptionReport {
    pub monotone: bool,
    pub support_ok: bool,
    /// max of f' over (h + xi, h + 10] at beta, 2 beta, 4 beta
    pub c_estimates: [f64; 3],
    pub c_decreasing: bool,
}

impl FiringAssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.monotone && self.support_ok && self.c_decreasing
    }
}

/// Sample the firing-rate hypotheses; `xi > 0` sets the superthreshold
/// offset for the derivative-decay estimate.
pub fn check_firing_assumptions(model: &FiringRateModel, xi: f64) -> Result<FiringAssumptionReport> {
    if model.is_step() {
        return Err(Error::NotApplicable(
            "assumption check applies to finite-beta families".into(),
        ));
    }
    assert!(xi > 0.0, "xi must be positive");
    let h = model.h;

    const SAMPLES: usize = 3001;
    let mut monotone = true;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..SAMPLES {
        let t = h - 5.0 + 15.0 * i as f64 / (SAMPLES - 1) as f64;
        let value = model.eval(t);
        if value < prev {
            monotone = false;
        }
        prev = value;
    }

    let mut support_ok = true;
    for i in 0..SAMPLES {
        // strictly below threshold
        let t = h - 10.0 + (10.0 - 1e-9) * i as f64 / (SAMPLES - 1) as f64;
        if model.eval(t) != 0.0 {
            support_ok = false;
            break;
        }
    }

    let mut c_estimates = [0.0f64; 3];
    for (slot, factor) in c_estimates.iter_mut().zip([1.0, 2.0, 4.0]) {
        let scaled = model.with_beta(model.beta * factor)?;
        let mut max_deriv = 0.0f64;
        for i in 0..2001 {
            let t = h + xi + (10.0 - xi) * i as f64 / 2000.0;
            max_deriv = max_deriv.max(scaled.deriv_finite(t));
        }
        *slot = max_deriv;
    }
    let c_decreasing = c_estimates[0] > c_estimates[1] && c_estimates[1] > c_estimates[2];

    Ok(FiringAssumptionReport {
        monotone,
        support_ok,
        c_estimates,
        c_decreasing,
    })
}
