//! Steep-limit bump profiles and the crossing solver.
//!
//! In the steep limit the fixed-point problem collapses to N scalar
//! equations for the crossing half-positions 0 < a_1 < ... < a_N. The
//! symmetric profile is a signed sum of kernel-antiderivative differences,
//!
//! ```text
//! u(x) = sum_{k=1..N} (-1)^(N-k+1) (W(x - a_k) - W(x + a_k)),
//! ```
//!
//! and the crossings must satisfy u(a_i) = h. This module evaluates the
//! profile, solves the crossing system by damped Newton with the analytic
//! Jacobian, and checks the regularity hypotheses that the finite-steepness
//! correction scheme relies on.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelModel};
use crate::linalg::{self, Lu};
use crate::verification;

/// Residual sup-norm required for convergence.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Newton step sup-norm required for convergence.
pub const STEP_TOL: f64 = 1e-12;

/// Newton iteration cap.
pub const MAX_ITERS: usize = 100;

/// Crossing-slope magnitude below which the bump is rejected as degenerate.
pub const MARGIN_FLOOR: f64 = 1e-8;

/// Jacobian determinant magnitude below which the bump is rejected.
pub const DET_FLOOR: f64 = 1e-10;

/// A solved steep-limit bump: crossings with the regularity data attached.
#[derive(Debug, Clone)]
pub struct LimitBump {
    /// Crossing half-positions 0 < a_1 < ... < a_N.
    pub crossings: Vec<f64>,
    pub kernel: KernelModel,
    pub h: f64,
    /// Slope magnitudes |u'(a_i)| at the crossings.
    pub margins: Vec<f64>,
    /// Analytic Jacobian of the crossing system at the solution.
    pub jacobian: Vec<Vec<f64>>,
    pub jacobian_det: f64,
    /// Final residual sup-norm of the crossing system.
    pub residual_norm: f64,
}

impl LimitBump {
    pub fn eval(&self, x: f64) -> f64 {
        eval_u_infinity(&self.crossings, &self.kernel, x)
    }

    pub fn eval_deriv(&self, x: f64) -> f64 {
        eval_u_infinity_deriv(&self.crossings, &self.kernel, x)
    }

    /// Outermost crossing a_N.
    pub fn outer_crossing(&self) -> f64 {
        *self.crossings.last().expect("crossing vector is nonempty")
    }
}

/// Evaluate the steep-limit profile for any strictly increasing positive
/// crossing vector (not necessarily solved; the Newton iteration uses this
/// evaluator on intermediate iterates).
pub fn eval_u_infinity(crossings: &[f64], kernel: &KernelModel, x: f64) -> f64 {
    let n = crossings.len();
    let mut sum = 0.0;
    for (idx, &a) in crossings.iter().enumerate() {
        let term = kernel.antideriv(x - a) - kernel.antideriv(x + a);
        sum += alternating_sign(n - idx) * term;
    }
    sum
}

/// Term-by-term derivative of [`eval_u_infinity`], using that the kernel is
/// the derivative of its antiderivative.
pub fn eval_u_infinity_deriv(crossings: &[f64], kernel: &KernelModel, x: f64) -> f64 {
    let n = crossings.len();
    let mut sum = 0.0;
    for (idx, &a) in crossings.iter().enumerate() {
        let term = kernel.eval(x - a) - kernel.eval(x + a);
        sum += alternating_sign(n - idx) * term;
    }
    sum
}

/// (-1)^m
fn alternating_sign(m: usize) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Residual of the crossing system: alternating-sign copies of u(a_i) - h.
/// The alternation is anchored at the outermost crossing (which always
/// carries the factor -1), so that the Jacobian diagonal below reads
/// margin - omega(0) - omega(2 a_i) for every N; anchoring at the innermost
/// crossing instead flips the sign of the whole system when N is odd and
/// breaks the pairing between residual and Jacobian.
pub fn residual_g(crossings: &[f64], kernel: &KernelModel, h: f64) -> Vec<f64> {
    let n = crossings.len();
    (0..n)
        .map(|i| alternating_sign(n - i) * (eval_u_infinity(crossings, kernel, crossings[i]) - h))
        .collect()
}

/// Crossing-slope margins via the alternating kernel sum
/// `m_i = sum_k (-1)^(i+k) (omega(a_i - a_k) - omega(a_i + a_k))`.
/// At a regular bump this equals |u'(a_i)|; away from one it can go
/// negative, which is exactly the degeneracy signal the solver checks for.
pub fn margins(crossings: &[f64], kernel: &KernelModel) -> Vec<f64> {
    let n = crossings.len();
    (0..n)
        .map(|i| {
            let mut sum = 0.0;
            for k in 0..n {
                let term = kernel.eval(crossings[i] - crossings[k])
                    - kernel.eval(crossings[i] + crossings[k]);
                sum += alternating_sign(i + k) * term;
            }
            sum
        })
        .collect()
}

/// Analytic Jacobian of [`residual_g`]:
/// diagonal `margin_i - omega(0) - omega(2 a_i)`, off-diagonal
/// `(-1)^(i+j+1) (omega(a_i - a_j) + omega(a_i + a_j))` (1-based parity).
pub fn jacobian_g(crossings: &[f64], kernel: &KernelModel) -> Vec<Vec<f64>> {
    let n = crossings.len();
    let margin = margins(crossings, kernel);
    let omega_zero = kernel.eval(0.0);
    let mut jac = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            jac[i][j] = if i == j {
                margin[i] - omega_zero - kernel.eval(2.0 * crossings[i])
            } else {
                -alternating_sign(i + j)
                    * (kernel.eval(crossings[i] - crossings[j])
                        + kernel.eval(crossings[i] + crossings[j]))
            };
        }
    }
    jac
}

fn strictly_ordered(crossings: &[f64]) -> bool {
    crossings[0] > 0.0
        && crossings.windows(2).all(|w| w[0] < w[1])
        && crossings.iter().all(|a| a.is_finite())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solve the crossing system by damped Newton from `initial_guess`.
///
/// Convergence requires both the residual sup-norm below [`RESIDUAL_TOL`]
/// and the last step below [`STEP_TOL`]. Each Newton step is halved (up to
/// 30 times) until it both preserves the crossing ordering and decreases
/// the residual; plain Newton is taken whenever it already contracts. The
/// solved bump is rejected if a margin falls below [`MARGIN_FLOOR`]
/// (`NotRegular`), the Jacobian determinant magnitude falls below
/// [`DET_FLOOR`] (`SingularJacobian`), or the profile fails post-hoc
/// classification (`NotABump`).
pub fn solve_crossings(
    kernel: &KernelModel,
    h: f64,
    n: usize,
    initial_guess: &[f64],
) -> Result<LimitBump> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive and finite, got {h}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter(
            "crossing count must be at least 1".into(),
        ));
    }
    if initial_guess.len() != n {
        return Err(Error::InvalidParameter(format!(
            "initial guess has {} entries but N = {n}",
            initial_guess.len()
        )));
    }
    if !strictly_ordered(initial_guess) {
        return Err(Error::InvalidParameter(format!(
            "initial guess must be strictly increasing and positive, got {initial_guess:?}"
        )));
    }

    let mut a = initial_guess.to_vec();
    let mut residual = residual_g(&a, kernel, h);
    let mut norm = inf_norm(&residual);
    let mut last_step = f64::INFINITY;
    let mut iters = 0usize;
    loop {
        if norm <= RESIDUAL_TOL && last_step <= STEP_TOL {
            break;
        }
        if iters == MAX_ITERS {
            return Err(Error::NoConvergence { iters, last: norm });
        }
        iters += 1;

        let jac = jacobian_g(&a, kernel);
        let lu = Lu::factor(&jac).map_err(|_| {
            Error::SingularJacobian(format!(
                "crossing Jacobian degenerated at iterate {a:?}"
            ))
        })?;
        let rhs: Vec<f64> = residual.iter().map(|g| -g).collect();
        let delta = lu.solve(&rhs);

        let mut lambda = 1.0f64;
        let mut accepted = false;
        for halving in 0..=30 {
            let candidate: Vec<f64> =
                a.iter().zip(&delta).map(|(ai, di)| ai + lambda * di).collect();
            if strictly_ordered(&candidate) {
                let cand_residual = residual_g(&candidate, kernel, h);
                let cand_norm = inf_norm(&cand_residual);
                // the final fallback accepts a machine-scale step even
                // without decrease, so a residual plateau ends at the
                // iteration cap instead of cycling here
                if cand_norm < norm || halving == 30 {
                    last_step = lambda * inf_norm(&delta);
                    a = candidate;
                    residual = cand_residual;
                    norm = cand_norm;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iters, last: norm });
        }
    }

    let margin = margins(&a, kernel);
    for (i, &m) in margin.iter().enumerate() {
        if !(m > MARGIN_FLOOR) {
            return Err(Error::NotRegular(format!(
                "crossing slope margin {m:.3e} at a_{} = {:.6} is below {MARGIN_FLOOR:e}",
                i + 1,
                a[i]
            )));
        }
    }
    let jac = jacobian_g(&a, kernel);
    let det = linalg::determinant(&jac);
    if !(det.abs() > DET_FLOOR) {
        return Err(Error::SingularJacobian(format!(
            "crossing Jacobian determinant {det:.3e} is below {DET_FLOOR:e} in magnitude"
        )));
    }

    let sampler = |x: f64| {
        (
            eval_u_infinity(&a, kernel, x),
            eval_u_infinity_deriv(&a, kernel, x),
        )
    };
    let outer = *a.last().expect("n >= 1");
    let class = verification::classify_bump(&sampler, h, outer + 1.0, outer + 10.0);
    if !class.is_bump || class.crossings_found.len() != 2 * n {
        return Err(Error::NotABump(format!(
            "solved crossings classify with {} roots (expected {}), is_bump = {}",
            class.crossings_found.len(),
            2 * n,
            class.is_bump
        )));
    }

    Ok(LimitBump {
        crossings: a,
        kernel: kernel.clone(),
        h,
        margins: margin,
        jacobian: jac,
        jacobian_det: det,
        residual_norm: norm,
    })
}

/// Single-crossing homoclinic-style existence condition for the exponential
/// kernel: `k < 1/sqrt(2h)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExistenceGate {
    pub k: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Regularity report for a solved bump: margins, Jacobian determinant, and
/// (for the exponential kernel) the closed-form existence gate.
#[derive(Debug, Clone, Serialize)]
pub struct LimitAssumptionReport {
    pub margins: Vec<f64>,
    pub margins_positive: bool,
    pub jacobian_det: f64,
    pub jacobian_invertible: bool,
    pub existence_gate: Option<ExistenceGate>,
}

impl LimitAssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.margins_positive
            && self.jacobian_invertible
            && self.existence_gate.map_or(true, |gate| gate.satisfied)
    }

    /// Turn the first failed hypothesis into its dedicated error.
    pub fn require(&self) -> Result<()> {
        if !self.margins_positive {
            return Err(Error::NotRegular(format!(
                "crossing slope margins must be positive, got {:?}",
                self.margins
            )));
        }
        if !self.jacobian_invertible {
            return Err(Error::SingularJacobian(format!(
                "crossing Jacobian determinant {:.3e} is numerically singular",
                self.jacobian_det
            )));
        }
        if let Some(gate) = self.existence_gate {
            if !gate.satisfied {
                return Err(Error::NotApplicable(format!(
                    "existence condition fails: k = {} is not below 1/sqrt(2h) = {}",
                    gate.k, gate.bound
                )));
            }
        }
        Ok(())
    }
}

pub fn verify_limit_assumptions(bump: &LimitBump) -> LimitAssumptionReport {
    let existence_gate = match bump.kernel.family {
        KernelFamily::Exponential { k } => {
            let bound = 1.0 / (2.0 * bump.h).sqrt();
            Some(ExistenceGate {
                k,
                bound,
                satisfied: k < bound,
            })
        }
        _ => None,
    };
    LimitAssumptionReport {
        margins: bump.margins.clone(),
        margins_positive: bump.margins.iter().all(|m| *m > MARGIN_FLOOR),
        jacobian_det: bump.jacobian_det,
        jacobian_invertible: bump.jacobian_det.abs() > DET_FLOOR,
        existence_gate,
    }
}

/// Exploration aid for seeding a single-crossing solve: sample the scalar
/// residual W(2a) - h on (0, a_max] and return a midpoint for every sign
/// change. Multiple roots can coexist, so seeding stays explicit.
pub fn scan_single_crossing_seeds(
    kernel: &KernelModel,
    h: f64,
    a_max: f64,
    samples: usize,
) -> Vec<f64> {
    assert!(samples >= 2 && a_max > 0.0);
    let mut seeds = Vec::new();
    let value = |a: f64| kernel.antideriv(2.0 * a) - h;
    let mut prev_a = a_max / samples as f64;
    let mut prev_v = value(prev_a);
    for i in 2..=samples {
        let a = a_max * i as f64 / samples as f64;
        let v = value(a);
        if prev_v * v < 0.0 || v == 0.0 {
            seeds.push(0.5 * (prev_a + a));
        }
        prev_a = a;
        prev_v = v;
    }
    seeds
}
