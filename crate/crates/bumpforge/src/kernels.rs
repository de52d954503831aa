//! Symmetric connectivity kernels.
//!
//! Each kernel provides the coupling strength `omega(x)`, its derivative
//! `omega'(x)`, the antiderivative `W(x) = integral from 0 to x of omega`,
//! and norm constants. `W` is the workhorse: the steep-limit bump and the
//! exact step-function operator are sums of `W` differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::special::erf;

const SQRT_PI: f64 = 1.7724538509055159;

/// Built-in kernel families with their shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// omega(x) = exp(-k|x|) / (2k), the Green function of -u'' + k^2 u.
    Exponential { k: f64 },
    /// omega(x) = (1 - |x|) exp(-k|x|): excitatory core, inhibitory tail.
    WizardHat { k: f64 },
    /// omega(x) = K exp(-(kx)^2) - M exp(-(mx)^2), requiring K > M, k > m.
    DiffGaussians {
        #[serde(rename = "K")]
        big_k: f64,
        k: f64,
        #[serde(rename = "M")]
        big_m: f64,
        m: f64,
    },
}

/// A validated kernel with precomputed norm constants.
#[derive(Debug, Clone)]
pub struct KernelModel {
    pub family: KernelFamily,
    pub l1_norm: f64,
    pub sup_norm: f64,
    pub deriv_sup_norm: f64,
}

impl KernelModel {
    /// Validate shape parameters and precompute norms. Closed forms are used
    /// wherever they exist; the difference-of-Gaussians derivative sup-norm
    /// falls back to a fine deterministic scan.
    pub fn new(family: KernelFamily) -> Result<Self> {
        match family {
            KernelFamily::Exponential { k } => {
                require_positive(k, "exponential k")?;
                Ok(KernelModel {
                    family,
                    l1_norm: 1.0 / (k * k),
                    sup_norm: 1.0 / (2.0 * k),
                    deriv_sup_norm: 0.5,
                })
            }
            KernelFamily::WizardHat { k } => {
                require_positive(k, "wizard hat k")?;
                // |omega| integrates to 2(2 W(1) - W(inf)): the lobe up to the
                // sign change at x = 1 counts positively, the tail negatively.
                let w_one = wizard_hat_w_positive(k, 1.0);
                let w_inf = 1.0 / k - 1.0 / (k * k);
                // negative lobe extremum at x = 1 + 1/k
                let lobe = (-(k + 1.0)).exp() / k;
                Ok(KernelModel {
                    family,
                    l1_norm: 2.0 * (2.0 * w_one - w_inf),
                    sup_norm: lobe.max(1.0),
                    deriv_sup_norm: k + 1.0,
                })
            }
            KernelFamily::DiffGaussians { big_k, k, big_m, m } => {
                require_positive(big_k, "diff-of-Gaussians K")?;
                require_positive(k, "diff-of-Gaussians k")?;
                require_positive(big_m, "diff-of-Gaussians M")?;
                require_positive(m, "diff-of-Gaussians m")?;
                if big_k <= big_m {
                    return Err(Error::InvalidParameter(format!(
                        "diff-of-Gaussians requires K > M, got K={big_k}, M={big_m}"
                    )));
                }
                if k <= m {
                    return Err(Error::InvalidParameter(format!(
                        "diff-of-Gaussians requires k > m, got k={k}, m={m}"
                    )));
                }
                let model = KernelModel {
                    family,
                    l1_norm: 0.0,
                    sup_norm: 0.0,
                    deriv_sup_norm: 0.0,
                };
                // single positive sign change at x0; |omega| integrates to
                // 2(2 W(x0) - W(inf))
                let x0 = ((big_k / big_m).ln() / (k * k - m * m)).sqrt();
                let w_inf = big_k * SQRT_PI / (2.0 * k) - big_m * SQRT_PI / (2.0 * m);
                let l1 = 2.0 * (2.0 * model.antideriv(x0) - w_inf);
                // interior extremum of omega (the inhibitory trough)
                let x1 = ((big_k * k * k / (big_m * m * m)).ln() / (k * k - m * m)).sqrt();
                let sup = (big_k - big_m).max(model.eval(x1).abs());
                let deriv_sup = scan_max_abs(|x| model.deriv(x), model.tail_radius());
                Ok(KernelModel {
                    family,
                    l1_norm: l1,
                    sup_norm: sup,
                    deriv_sup_norm: deriv_sup,
                })
            }
        }
    }

    /// omega(x).
    pub fn eval(&self, x: f64) -> f64 {
        match self.family {
            KernelFamily::Exponential { k } => (-k * x.abs()).exp() / (2.0 * k),
            KernelFamily::WizardHat { k } => {
                let t = x.abs();
                (1.0 - t) * (-k * t).exp()
            }
            KernelFamily::DiffGaussians { big_k, k, big_m, m } => {
                big_k * (-(k * x).powi(2)).exp() - big_m * (-(m * x).powi(2)).exp()
            }
        }
    }

    /// omega'(x). At kink points (x = 0 for the families with |x| in the
    /// formula) the average of the one-sided derivatives is returned: the
    /// derivative is only ever integrated against smooth densities, so the
    /// value on a measure-zero set is immaterial, but a total function keeps
    /// evaluation everywhere defined.
    pub fn deriv(&self, x: f64) -> f64 {
        match self.family {
            KernelFamily::Exponential { k } => {
                if x == 0.0 {
                    0.0
                } else {
                    -x.signum() * (-k * x.abs()).exp() / 2.0
                }
            }
            KernelFamily::WizardHat { k } => {
                if x == 0.0 {
                    0.0
                } else {
                    let t = x.abs();
                    x.signum() * (k * t - k - 1.0) * (-k * t).exp()
                }
            }
            KernelFamily::DiffGaussians { big_k, k, big_m, m } => {
                -2.0 * k * k * x * big_k * (-(k * x).powi(2)).exp()
                    + 2.0 * m * m * x * big_m * (-(m * x).powi(2)).exp()
            }
        }
    }

    /// W(x) = integral from 0 to x of omega(y) dy; odd by symmetry of omega.
    pub fn antideriv(&self, x: f64) -> f64 {
        match self.family {
            KernelFamily::Exponential { k } => {
                x.signum() * (1.0 - (-k * x.abs()).exp()) / (2.0 * k * k)
            }
            KernelFamily::WizardHat { k } => x.signum() * wizard_hat_w_positive(k, x.abs()),
            KernelFamily::DiffGaussians { big_k, k, big_m, m } => {
                big_k * SQRT_PI / (2.0 * k) * erf(k * x)
                    - big_m * SQRT_PI / (2.0 * m) * erf(m * x)
            }
        }
    }

    /// Radius beyond which the kernel tail is below 1e-12 in absolute value;
    /// used to truncate whole-line integrals.
    pub fn tail_radius(&self) -> f64 {
        match self.family {
            KernelFamily::Exponential { k } => 40.0 / k,
            KernelFamily::WizardHat { k } => 40.0 / k + 1.0,
            KernelFamily::DiffGaussians { m, .. } => 7.0 / m,
        }
    }
}

fn require_positive(value: f64, name: &str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// W(x) for the wizard hat restricted to x >= 0:
/// integral of (1 - y) exp(-ky) = (1 - e^{-kx})/k - (1 - (1 + kx) e^{-kx})/k^2.
fn wizard_hat_w_positive(k: f64, x: f64) -> f64 {
    let e = (-k * x).exp();
    (1.0 - e) / k - (1.0 - (1.0 + k * x) * e) / (k * k)
}

fn scan_max_abs(f: impl Fn(f64) -> f64, radius: f64) -> f64 {
    const SAMPLES: usize = 200_001;
    let mut max = 0.0f64;
    for i in 0..SAMPLES {
        let x = radius * i as f64 / (SAMPLES - 1) as f64;
        max = max.max(f(x).abs());
    }
    max
}

/// Per-hypothesis result of the kernel assumption check: symmetry, a finite
/// Lipschitz constant, and finite L1 / sup norms.
#[derive(Debug, Clone, Serialize)]
pub struct KernelAssumptionReport {
    pub symmetric: bool,
    pub lipschitz: bool,
    pub lipschitz_estimate: f64,
    pub l1_finite: bool,
    pub l1_estimate: f64,
    pub sup_finite: bool,
    pub sup_estimate: f64,
}

impl KernelAssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.symmetric && self.lipschitz && self.l1_finite && self.sup_finite
    }
}

/// Check the kernel hypotheses for a built-in kernel.
pub fn check_kernel_assumptions(kernel: &KernelModel) -> KernelAssumptionReport {
    check_kernel_fn(&|x| kernel.eval(x), kernel.tail_radius())
}

/// Same check for an arbitrary sampled kernel; `half_width` bounds the scan
/// window and the numeric L1 integral.
pub fn check_kernel_fn(eval: &dyn Fn(f64) -> f64, half_width: f64) -> KernelAssumptionReport {
    const SAMPLES: usize = 4001;
    let step = half_width / (SAMPLES - 1) as f64;

    let mut symmetric = true;
    let mut sup = 0.0f64;
    for i in 0..SAMPLES {
        let x = step * i as f64;
        if (eval(x) - eval(-x)).abs() > 1e-12 {
            symmetric = false;
        }
        sup = sup.max(eval(x).abs()).max(eval(-x).abs());
    }

    let mut lipschitz = 0.0f64;
    let eps = 1e-6 * half_width.max(1.0);
    for i in 0..SAMPLES {
        let x = -half_width + 2.0 * step * i as f64;
        let slope = (eval(x + eps) - eval(x - eps)) / (2.0 * eps);
        lipschitz = lipschitz.max(slope.abs());
    }

    let l1 = quad::adaptive_simpson(|x| eval(x).abs(), -half_width, half_width, 1e-10);

    KernelAssumptionReport {
        symmetric,
        lipschitz: lipschitz.is_finite(),
        lipschitz_estimate: lipschitz,
        l1_finite: l1.is_finite(),
        l1_estimate: l1,
        sup_finite: sup.is_finite(),
        sup_estimate: sup,
    }
}
