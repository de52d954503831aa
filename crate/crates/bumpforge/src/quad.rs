//! Composite Gauss-Legendre panels and an adaptive Simpson rule.
//!
//! The operator quadratures use fixed-order composite Gauss-Legendre (one
//! panel per grid cell) for determinism and speed; adaptive Simpson backs the
//! norm constants and the independent antiderivative oracles in tests.

/// 4-point Gauss-Legendre nodes on [-1, 1], exact through degree 7.
pub const GL4_NODES: [f64; 4] = [
    -0.8611363115940526,
    -0.3399810435848563,
    0.3399810435848563,
    0.8611363115940526,
];
pub const GL4_WEIGHTS: [f64; 4] = [
    0.3478548451374538,
    0.6521451548625461,
    0.6521451548625461,
    0.3478548451374538,
];

/// 8-point Gauss-Legendre nodes on [-1, 1], exact through degree 15; used as
/// the one-shot refinement check against the 4-point result.
pub const GL8_NODES: [f64; 8] = [
    -0.9602898564975362,
    -0.7966664774136267,
    -0.5255324099163290,
    -0.1834346424956498,
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975362,
];
pub const GL8_WEIGHTS: [f64; 8] = [
    0.1012285362903763,
    0.2223810344533745,
    0.3137066458778873,
    0.3626837833783620,
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

/// Composite Gauss-Legendre on `panels` equal cells of `[lo, hi]`.
/// Panels and nodes are summed in ascending index order so results are
/// bit-reproducible across runs.
pub fn composite_gl4(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    composite(f, lo, hi, panels, &GL4_NODES, &GL4_WEIGHTS)
}

/// 8-point variant of [`composite_gl4`].
pub fn composite_gl8(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    composite(f, lo, hi, panels, &GL8_NODES, &GL8_WEIGHTS)
}

fn composite(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    panels: usize,
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    assert!(panels > 0, "need at least one panel");
    let width = (hi - lo) / panels as f64;
    let half = 0.5 * width;
    let mut total = 0.0;
    for p in 0..panels {
        let center = lo + (p as f64 + 0.5) * width;
        let mut panel_sum = 0.0;
        for (node, weight) in nodes.iter().zip(weights) {
            panel_sum += weight * f(center + half * node);
        }
        total += half * panel_sum;
    }
    total
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = simpson(lo, hi, flo, fmid, fhi);
    simpson_refine(&f, lo, hi, flo, fmid, fhi, whole, tol, 50)
}

fn simpson(lo: f64, hi: f64, flo: f64, fmid: f64, fhi: f64) -> f64 {
    (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
}

#[allow(clippy::too_many_arguments)]
fn simpson_refine(
    f: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let lmid = 0.5 * (lo + mid);
    let rmid = 0.5 * (mid + hi);
    let (flmid, frmid) = (f(lmid), f(rmid));
    let left = simpson(lo, mid, flo, flmid, fmid);
    let right = simpson(mid, hi, fmid, frmid, fhi);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_refine(f, lo, mid, flo, flmid, fmid, left, 0.5 * tol, depth - 1)
            + simpson_refine(f, mid, hi, fmid, frmid, fhi, right, 0.5 * tol, depth - 1)
    }
}
