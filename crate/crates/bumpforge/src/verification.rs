//! Classification of candidate profiles and fixed-point certificates.
//!
//! A profile counts as a bump when `u - h` has finitely many roots, the
//! superthreshold window is bounded, and the profile stays below the
//! threshold by a positive gap outside that window. Regularity additionally
//! asks for nonzero slopes at every threshold root. The module also
//! evaluates the steep-limit operator exactly from a crossing list, and
//! measures how far a profile is from solving the fixed-point equation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::firing_rates::FiringRateModel;
use crate::hammerstein::{Grid, GridFunction, Reconstruction};
use crate::kernels::KernelModel;

/// Scan resolution for threshold-root detection.
const SCAN_POINTS: usize = 10_000;

/// Bisection window width at which a root is considered located.
const ROOT_TOL: f64 = 1e-12;

/// How closely a stationary point must touch the threshold to count as a
/// tangential root.
const TANGENT_TOL: f64 = 1e-9;

/// Slope magnitude below which a threshold root is considered degenerate.
pub const SLOPE_FLOOR: f64 = 1e-8;

/// Outcome of classifying one profile against a threshold.
#[derive(Debug, Clone, Serialize)]
pub struct BumpClassification {
    #[serde(rename = "crossings")]
    pub crossings_found: Vec<f64>,
    pub is_bump: bool,
    pub is_regular: bool,
    /// Half of the observed gap between the threshold and the profile's
    /// supremum outside the window; positive for genuine bumps.
    #[serde(rename = "gamma")]
    pub margin_gamma: f64,
    /// Half-width of the window containing every threshold root.
    #[serde(rename = "A")]
    pub window_a: f64,
    #[serde(rename = "slopes")]
    pub slopes_at_crossings: Vec<f64>,
}

/// Locate every root of `u - h` in `[-search_halfwidth, search_halfwidth]`
/// and decide whether the profile is a (regular) bump. Roots are found as
/// sign changes of `u - h` on a 10^4-point scan, refined by bisection;
/// tangential roots, where the profile touches the threshold with zero
/// slope and no sign change, are recovered from sign changes of `u'`.
/// Negative results are classifications, not errors.
pub fn classify_bump(
    sampler: &dyn Fn(f64) -> (f64, f64),
    h: f64,
    search_halfwidth: f64,
    decay_halfwidth: f64,
) -> BumpClassification {
    assert!(
        search_halfwidth > 0.0 && search_halfwidth < decay_halfwidth,
        "search window must be positive and inside the decay window"
    );
    let cell = 2.0 * search_halfwidth / SCAN_POINTS as f64;
    let mut values = Vec::with_capacity(SCAN_POINTS + 1);
    let mut derivs = Vec::with_capacity(SCAN_POINTS + 1);
    let mut xs = Vec::with_capacity(SCAN_POINTS + 1);
    for i in 0..=SCAN_POINTS {
        let x = -search_halfwidth + cell * i as f64;
        let (u, du) = sampler(x);
        xs.push(x);
        values.push(u - h);
        derivs.push(du);
    }

    let mut roots: Vec<f64> = Vec::new();
    for i in 0..=SCAN_POINTS {
        if values[i] == 0.0 {
            roots.push(xs[i]);
        }
    }
    for i in 0..SCAN_POINTS {
        if values[i] * values[i + 1] < 0.0 {
            roots.push(bisect(
                &|x| sampler(x).0 - h,
                xs[i],
                xs[i + 1],
                values[i],
            ));
        } else if derivs[i] * derivs[i + 1] < 0.0 {
            // stationary point; a root only if the profile touches h there
            let x_star = bisect(&|x| sampler(x).1, xs[i], xs[i + 1], derivs[i]);
            if (sampler(x_star).0 - h).abs() <= TANGENT_TOL {
                roots.push(x_star);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9);

    let slopes: Vec<f64> = roots.iter().map(|&r| sampler(r).1).collect();
    let window_a = match (roots.first(), roots.last()) {
        (Some(first), Some(last)) => first.abs().max(last.abs()) + cell,
        _ => 0.0,
    };

    // supremum of the profile outside the window, out to the decay radius
    let mut sup_beyond = f64::NEG_INFINITY;
    let outer_samples = 2000;
    for i in 0..=outer_samples {
        let x = window_a
            + (decay_halfwidth - window_a) * i as f64 / outer_samples as f64;
        sup_beyond = sup_beyond.max(sampler(x).0).max(sampler(-x).0);
    }
    let margin_gamma = 0.5 * (h - sup_beyond);

    let is_bump = roots.len() >= 2 && roots.len() % 2 == 0 && margin_gamma > 0.0;
    let is_regular = is_bump && slopes.iter().all(|s| s.abs() > SLOPE_FLOOR);
    BumpClassification {
        crossings_found: roots,
        is_bump,
        is_regular,
        margin_gamma,
        window_a,
        slopes_at_crossings: slopes,
    }
}

/// Bisect `f` for a root in [lo, hi], given `f(lo) = f_lo`, to [`ROOT_TOL`].
fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let sign_lo = f_lo.signum();
    for _ in 0..200 {
        if hi - lo <= ROOT_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Apply the steep-limit operator exactly: for a superthreshold set bounded
/// by the sorted crossings b_1 < ... < b_{2K}, the image at `x` is
/// `sum_k W(x - b_{2k-1}) - W(x - b_{2k})` with W the kernel antiderivative.
pub fn step_operator(crossings: &[f64], kernel: &KernelModel, x: f64) -> Result<f64> {
    if crossings.len() % 2 != 0 {
        return Err(Error::OddCrossings(crossings.len()));
    }
    let mut sorted = crossings.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    for pair in sorted.chunks_exact(2) {
        sum += kernel.antideriv(x - pair[0]) - kernel.antideriv(x - pair[1]);
    }
    Ok(sum)
}

/// Sup-norm fixed-point residual of the sampled profile over `test_xs`.
///
/// For finite steepness the profile is sampled onto a uniform grid covering
/// the test points and the operator image is reconstructed pointwise; in
/// the steep limit the profile is classified and the exact step operator is
/// used instead.
pub fn residual_fixed_point(
    sampler: &dyn Fn(f64) -> (f64, f64),
    kernel: &KernelModel,
    firing: &FiringRateModel,
    test_xs: &[f64],
) -> Result<f64> {
    if test_xs.is_empty() {
        return Err(Error::InvalidParameter(
            "residual evaluation needs at least one test point".into(),
        ));
    }
    let radius = test_xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "test points must span a finite positive radius, got {radius}"
        )));
    }
    let mut residual = 0.0f64;
    if firing.is_step() {
        let classification = classify_bump(sampler, firing.h, radius, radius + 5.0);
        for &x in test_xs {
            let image = step_operator(&classification.crossings_found, kernel, x)?;
            residual = residual.max((sampler(x).0 - image).abs());
        }
    } else {
        // Scale the internal grid with the radius so the verifier's own
        // quadrature stays well below the residual tolerances it certifies;
        // a fixed node count would coarsen with radius and dominate the
        // measurement for steep firing rates.
        let mut m = ((2.0 * radius * 1024.0).ceil() as usize).max(1025);
        if m % 2 == 0 {
            m += 1;
        }
        let grid = Grid::new(radius, m)?;
        let u = GridFunction::from_fn(grid, sampler);
        let recon = Reconstruction::new(&u, kernel, firing)?;
        for &x in test_xs {
            residual = residual.max((sampler(x).0 - recon.eval(x)).abs());
        }
    }
    Ok(residual)
}
