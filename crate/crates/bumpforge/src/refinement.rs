//! Successive approximation from the steep-limit profile to a
//! finite-steepness fixed point.
//!
//! Plain Picard iteration U <- H_beta U fails here: the linearization of the
//! operator at the steep limit amplifies perturbations of the crossing
//! positions (the crossing matrix S has an eigenvalue beyond 1). Each step
//! therefore subtracts a rank-N correction assembled from the steep-limit
//! crossing data,
//!
//! ```text
//! U_{n+1}(x) = (H_beta U_n)(x) - s(x)^T (S - I)^{-1} p_n,
//! p_n[i]     = (H_beta U_n - U_n)(a_i),
//! ```
//!
//! which cancels the unstable crossing response and leaves a contraction for
//! steep enough firing rates. The iteration starts from the restriction of
//! the steep-limit profile to the grid and is monitored through the relative
//! C^1 step size. Shallow firing rates make the scheme diverge; that is
//! reported as an error, not prevented.

use crate::error::{Error, Result};
use crate::firing_rates::FiringRateModel;
use crate::hammerstein::{
    apply_h_beta, build_correction, CorrectionData, Grid, GridFunction, Reconstruction,
    QUADRATURE_GUARD,
};
use crate::kernels::KernelModel;
use crate::limit_bump::{verify_limit_assumptions, LimitBump};
use crate::linalg::Lu;

/// Factor on the stop tolerance defining the residual certificate: a run
/// only counts as converged when the relative C^1 fixed-point defect of the
/// final iterate is at most `max(CERTIFICATE_FACTOR * tol, QUADRATURE_GUARD)`.
/// Step sizes shrinking without the defect shrinking would otherwise pass
/// as convergence.
pub const CERTIFICATE_FACTOR: f64 = 100.0;

/// Settings for one refinement run.
#[derive(Debug, Clone, Copy)]
pub struct RefinementConfig {
    pub beta: f64,
    pub max_iters: usize,
    /// Stop once the relative C^1 step size drops to this value.
    pub tol: f64,
    pub grid: Grid,
    /// Evaluate the crossing defect p_n by fresh quadrature at each crossing
    /// instead of Hermite interpolation of the grid image. Both routes agree
    /// to quadrature accuracy; interpolation is the cheaper default.
    pub exact_pn: bool,
}

impl RefinementConfig {
    pub fn new(beta: f64, grid: Grid) -> Result<RefinementConfig> {
        let config = RefinementConfig {
            beta,
            max_iters: 50,
            tol: 1e-10,
            grid,
            exact_pn: false,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "refinement needs a finite positive steepness, got {}",
                self.beta
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "relative tolerance must be positive and finite, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter(
                "refinement needs at least one iteration".into(),
            ));
        }
        Ok(())
    }
}

/// One point of the iteration: the current grid iterate with its history.
#[derive(Debug, Clone)]
pub struct RefinementState {
    /// Iteration index; `error_history.len() == n`.
    pub n: usize,
    pub u_n: GridFunction,
    /// Relative C^1 step sizes ||U_k - U_{k-1}|| / ||U_{k-1}||, k = 1..=n.
    pub error_history: Vec<f64>,
    pub converged: bool,
    /// C^1 norm of the fixed-point defect H_beta U - U. Stepping fills it
    /// for the iterate the step was computed from; [`run_refinement`]
    /// refreshes it for the final iterate before returning.
    pub residual: f64,
}

impl RefinementState {
    /// Iteration 0: the restriction of the steep-limit profile to the grid.
    pub fn initial(bump: &LimitBump, grid: Grid) -> RefinementState {
        let u0 = GridFunction::from_fn(grid, |x| (bump.eval(x), bump.eval_deriv(x)));
        RefinementState {
            n: 0,
            u_n: u0,
            error_history: Vec::new(),
            converged: false,
            residual: f64::INFINITY,
        }
    }

    pub fn last_error(&self) -> Option<f64> {
        self.error_history.last().copied()
    }
}

fn check_crossings_match(bump: &LimitBump, correction: &CorrectionData) {
    assert_eq!(
        bump.crossings, correction.crossings,
        "correction data must be built from the same steep-limit bump"
    );
}

/// The crossing defect p_n[i] = (H_beta U_n - U_n)(a_i), read off the grid
/// image by Hermite interpolation or recomputed by fresh quadrature.
fn crossing_defect(
    state: &RefinementState,
    image: &GridFunction,
    correction: &CorrectionData,
    kernel: &KernelModel,
    firing: &FiringRateModel,
    exact_pn: bool,
) -> Result<Vec<f64>> {
    if exact_pn {
        let recon = Reconstruction::new(&state.u_n, kernel, firing)?;
        Ok(correction
            .crossings
            .iter()
            .map(|&a| recon.eval(a) - state.u_n.eval(a))
            .collect())
    } else {
        Ok(correction
            .crossings
            .iter()
            .map(|&a| image.eval(a) - state.u_n.eval(a))
            .collect())
    }
}

/// Append the accepted iterate to the state, running the divergence guard:
/// a non-finite iterate, or three consecutive step-size growths beyond 10x,
/// abort the run. `residual` is the C^1 defect of the iterate the step was
/// computed from.
fn finish_step(
    state: &RefinementState,
    next: GridFunction,
    residual: f64,
) -> Result<RefinementState> {
    let denom = state.u_n.c1_norm();
    let step = next.c1_distance(&state.u_n);
    let error = if denom > 0.0 { step / denom } else { step };
    let mut history = state.error_history.clone();
    history.push(error);
    // check the samples, not just the norms: the sup norms are built from
    // f64::max, which would silently skip NaN entries
    let finite = next
        .values
        .iter()
        .chain(next.deriv_values.iter())
        .all(|v| v.is_finite());
    if !finite || !error.is_finite() {
        return Err(Error::DivergenceDetected {
            iter: state.n + 1,
            error,
        });
    }
    let k = history.len();
    if k >= 4 && (k - 3..k).all(|i| history[i] > 10.0 * history[i - 1]) {
        return Err(Error::DivergenceDetected {
            iter: state.n + 1,
            error,
        });
    }
    Ok(RefinementState {
        n: state.n + 1,
        u_n: next,
        error_history: history,
        converged: false,
        residual,
    })
}

/// Advance the iteration by one step.
///
/// Computes the grid image H_beta U_n, reads the crossing defect
/// p_n[i] = (H_beta U_n - U_n)(a_i), solves (S - I) q = p_n with the stored
/// factorization, and forms U_{n+1} = H_beta U_n - s(.)^T q together with
/// its derivative. The relative C^1 step size is appended to the history.
pub fn iterate_once(
    state: &RefinementState,
    bump: &LimitBump,
    correction: &CorrectionData,
    kernel: &KernelModel,
    firing: &FiringRateModel,
    exact_pn: bool,
) -> Result<RefinementState> {
    check_crossings_match(bump, correction);
    let image = apply_h_beta(&state.u_n, kernel, firing)?;
    let residual = image.c1_distance(&state.u_n);
    let p = crossing_defect(state, &image, correction, kernel, firing, exact_pn)?;
    let q = correction.solve_s_minus_i(&p);

    let grid = state.u_n.grid;
    let mut values = image.values;
    let mut derivs = image.deriv_values;
    for (j, x) in grid.nodes().enumerate() {
        let s = correction.s_vector(kernel, x);
        let ds = correction.s_vector_deriv(kernel, x);
        for (i, &qi) in q.iter().enumerate() {
            values[j] -= s[i] * qi;
            derivs[j] -= ds[i] * qi;
        }
    }
    let next = GridFunction::from_samples(grid, values, derivs);
    finish_step(state, next, residual)
}

/// The same step in resolvent form: solve (I - S) v = w for the defect
/// w = H_beta U_n - U_n through the rank-structured identity
/// v(x) = w(x) + s(x)^T (I - S)^{-1} w_hat (w_hat the defect at the
/// crossings), then set U_{n+1} = U_n + v. Algebraically identical to
/// [`iterate_once`] but computed against a separately factored matrix, so it
/// doubles as an independent check of the correction algebra.
pub fn iterate_once_resolvent(
    state: &RefinementState,
    bump: &LimitBump,
    correction: &CorrectionData,
    kernel: &KernelModel,
    firing: &FiringRateModel,
) -> Result<RefinementState> {
    check_crossings_match(bump, correction);
    let image = apply_h_beta(&state.u_n, kernel, firing)?;
    let residual = image.c1_distance(&state.u_n);

    let n = correction.crossings.len();
    let mut i_minus_s = vec![vec![0.0; n]; n];
    for (i, row) in i_minus_s.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            *entry = if i == j { 1.0 } else { 0.0 } - correction.s_matrix[i][j];
        }
    }
    let lu = Lu::factor(&i_minus_s)?;
    let w_hat: Vec<f64> = correction
        .crossings
        .iter()
        .map(|&a| image.eval(a) - state.u_n.eval(a))
        .collect();
    let r = lu.solve(&w_hat);

    let grid = state.u_n.grid;
    let mut values = Vec::with_capacity(grid.len());
    let mut derivs = Vec::with_capacity(grid.len());
    for (j, x) in grid.nodes().enumerate() {
        let s = correction.s_vector(kernel, x);
        let ds = correction.s_vector_deriv(kernel, x);
        let mut v = image.values[j] - state.u_n.values[j];
        let mut dv = image.deriv_values[j] - state.u_n.deriv_values[j];
        for (i, &ri) in r.iter().enumerate() {
            v += s[i] * ri;
            dv += ds[i] * ri;
        }
        values.push(state.u_n.values[j] + v);
        derivs.push(state.u_n.deriv_values[j] + dv);
    }
    let next = GridFunction::from_samples(grid, values, derivs);
    finish_step(state, next, residual)
}

/// Run the scheme from the restriction of `bump` until the relative C^1
/// step size drops below `config.tol`.
///
/// The steepness is taken from `config.beta`; `firing` supplies the family,
/// exponent, and threshold. On success the returned state carries the final
/// iterate, and the reconstruction extends it to the whole line by one more
/// application of the integral. Convergence additionally requires the
/// residual certificate (see [`CERTIFICATE_FACTOR`]).
pub fn run_refinement<'k>(
    bump: &LimitBump,
    kernel: &'k KernelModel,
    firing: &FiringRateModel,
    config: &RefinementConfig,
) -> Result<(RefinementState, Reconstruction<'k>)> {
    config.validate()?;
    if firing.is_step() {
        return Err(Error::NotApplicable(
            "refinement needs a finite-steepness firing family; the steep \
             limit is the seed, not the target"
                .into(),
        ));
    }
    let firing = firing.with_beta(config.beta)?;

    verify_limit_assumptions(bump).require()?;

    let correction = build_correction(bump, kernel)?;
    let mut state = RefinementState::initial(bump, config.grid);
    while state.n < config.max_iters {
        state = iterate_once(&state, bump, &correction, kernel, &firing, config.exact_pn)?;
        if state.last_error().expect("step appends an error") <= config.tol {
            state.converged = true;
            break;
        }
    }
    if !state.converged {
        return Err(Error::NoConvergence {
            iters: state.n,
            last: state.last_error().unwrap_or(f64::INFINITY),
        });
    }

    let image = apply_h_beta(&state.u_n, kernel, &firing)?;
    state.residual = image.c1_distance(&state.u_n);
    let relative = state.residual / state.u_n.c1_norm();
    let certificate = (CERTIFICATE_FACTOR * config.tol).max(QUADRATURE_GUARD);
    if relative > certificate {
        return Err(Error::NoConvergence {
            iters: state.n,
            last: relative,
        });
    }

    let reconstruction = Reconstruction::new(&state.u_n, kernel, &firing)?;
    Ok((state, reconstruction))
}

/// One row of a steepness sweep.
#[derive(Debug)]
pub struct SweepRow {
    pub beta: f64,
    /// C^1 distance of the converged iterate to the steep-limit restriction,
    /// with the iteration count, or the per-row failure.
    pub outcome: Result<(f64, usize)>,
}

/// Run the refinement at every steepness in `betas` (strictly increasing)
/// and measure the C^1 distance of each converged iterate to the
/// steep-limit restriction.
///
/// Rows run concurrently, each owning its state; results are merged back in
/// input order, and a failed row is recorded without aborting the others.
/// The `BUMPFORGE_THREADS` environment variable caps the worker count.
pub fn sweep_beta(
    bump: &LimitBump,
    kernel: &KernelModel,
    firing: &FiringRateModel,
    betas: &[f64],
    config: &RefinementConfig,
) -> Result<Vec<SweepRow>> {
    if betas.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "sweep steepness values must be finite and positive, got {betas:?}"
        )));
    }
    for pair in betas.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidParameter(format!(
                "sweep steepness values must be strictly increasing, got {} then {}",
                pair[0], pair[1]
            )));
        }
    }
    if betas.is_empty() {
        return Ok(Vec::new());
    }

    let limit = GridFunction::from_fn(config.grid, |x| (bump.eval(x), bump.eval_deriv(x)));
    let mut slots: Vec<Option<SweepRow>> = Vec::new();
    slots.resize_with(betas.len(), || None);
    let slots = std::sync::Mutex::new(slots);
    let next_index = std::sync::atomic::AtomicUsize::new(0);
    let mut workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    // BUMPFORGE_THREADS caps the worker count; unparsable values are ignored.
    if let Ok(raw) = std::env::var("BUMPFORGE_THREADS") {
        if let Ok(cap) = raw.trim().parse::<usize>() {
            if cap >= 1 {
                workers = workers.min(cap);
            }
        }
    }
    let workers = workers.min(betas.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next_index.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= betas.len() {
                    break;
                }
                let row_config = RefinementConfig {
                    beta: betas[i],
                    ..*config
                };
                let outcome = run_refinement(bump, kernel, firing, &row_config)
                    .map(|(state, _)| (state.u_n.c1_distance(&limit), state.n));
                let row = SweepRow {
                    beta: betas[i],
                    outcome,
                };
                slots.lock().expect("sweep result mutex")[i] = Some(row);
            });
        }
    });

    Ok(slots
        .into_inner()
        .expect("sweep result mutex")
        .into_iter()
        .map(|row| row.expect("every sweep row is visited"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::firing_rates::{FiringFamily, FiringRateModel};
    use crate::kernels::KernelFamily;
    use crate::limit_bump::solve_crossings;
    use crate::verification;

    fn fhn_setup() -> (KernelModel, FiringRateModel, LimitBump, Grid) {
        let kernel = KernelModel::new(KernelFamily::Exponential { k: 1.339 }).unwrap();
        let firing = FiringRateModel::new(FiringFamily::Hill { p: 2.0 }, 100.0, 0.2).unwrap();
        let bump = solve_crossings(&kernel, 0.2, 1, &[0.4]).unwrap();
        let grid = Grid::new(bump.outer_crossing() + 0.5, 1025).unwrap();
        (kernel, firing, bump, grid)
    }

    fn two_bump_setup(guess: &[f64]) -> (KernelModel, FiringRateModel, LimitBump, Grid) {
        let kernel = KernelModel::new(KernelFamily::DiffGaussians {
            big_k: 3.0,
            k: 2.0,
            big_m: 1.0,
            m: 0.5,
        })
        .unwrap();
        let firing = FiringRateModel::new(FiringFamily::Hill { p: 2.0 }, 100.0, 0.3).unwrap();
        let bump = solve_crossings(&kernel, 0.3, 2, guess).unwrap();
        // the steep crossing slopes of this kernel need a fine grid to stay
        // inside the quadrature guard; early iterates land the transition
        // mid-cell and are harder to integrate than the limit profile itself
        let grid = Grid::new(bump.outer_crossing() + 0.5, 4097).unwrap();
        (kernel, firing, bump, grid)
    }

    #[test]
    fn first_step_moves_off_the_limit_profile() {
        let (kernel, firing, bump, grid) = fhn_setup();
        let correction = build_correction(&bump, &kernel).unwrap();
        let state = RefinementState::initial(&bump, grid);
        let next = iterate_once(&state, &bump, &correction, &kernel, &firing, false).unwrap();
        assert_eq!(next.n, 1);
        assert_eq!(next.error_history.len(), 1);
        let error = next.error_history[0];
        assert!(
            error.is_finite() && error > 1e-6,
            "the limit profile is not a finite-steepness fixed point, error {error}"
        );
        assert!(next.residual > 0.0);
    }

    #[test]
    fn fhn_run_converges_to_a_certified_fixed_point() {
        let (kernel, firing, bump, grid) = fhn_setup();
        let config = RefinementConfig {
            tol: 1e-12,
            max_iters: 150,
            ..RefinementConfig::new(100.0, grid).unwrap()
        };
        let (state, recon) = run_refinement(&bump, &kernel, &firing, &config).unwrap();
        assert!(state.converged);
        assert_eq!(state.error_history.len(), state.n);
        assert!(*state.error_history.last().unwrap() <= 1e-12);
        assert!(
            state.u_n.symmetry_defect() <= 1e-10,
            "iterates must stay even, defect {}",
            state.u_n.symmetry_defect()
        );
        let relative_residual = state.residual / state.u_n.c1_norm();
        assert!(
            relative_residual <= 1e-8,
            "relative fixed-point defect {relative_residual}"
        );

        // a converged iterate is (numerically) preserved by one more step
        let correction = build_correction(&bump, &kernel).unwrap();
        let image = apply_h_beta(&state.u_n, &kernel, &firing).unwrap();
        for &a in &bump.crossings {
            let defect = image.eval(a) - state.u_n.eval(a);
            assert!(defect.abs() <= 1e-11, "crossing defect {defect}");
        }
        let next = iterate_once(&state, &bump, &correction, &kernel, &firing, false).unwrap();
        assert!(*next.error_history.last().unwrap() <= 1e-11);

        // the reconstruction is a fixed point on the whole line, sampled out
        // to three kernel lengths past the grid edge
        let d = grid.half_width();
        let sampler = |x: f64| recon.eval_with_deriv(x);
        let test_xs: Vec<f64> = (0..201)
            .map(|i| -(d + 3.0) + (d + 3.0) * i as f64 / 100.0)
            .collect();
        let residual =
            verification::residual_fixed_point(&sampler, &kernel, &firing, &test_xs).unwrap();
        assert!(residual <= 1e-7, "whole-line residual {residual}");

        // the profile classifies as a regular bump with 2N = 2 crossings
        let classification =
            verification::classify_bump(&sampler, firing.h, d, d + 5.0);
        assert!(classification.is_regular);
        assert_eq!(classification.crossings_found.len(), 2);
        let drift = (classification.crossings_found[1] - bump.crossings[0]).abs();
        assert!(
            drift <= 0.2,
            "finite-steepness crossing should stay near the limit crossing, drift {drift}"
        );
    }

    #[test]
    fn single_crossing_correction_reduces_to_scalar_formula() {
        let (kernel, firing, bump, grid) = fhn_setup();
        let correction = build_correction(&bump, &kernel).unwrap();
        let state = RefinementState::initial(&bump, grid);
        let image = apply_h_beta(&state.u_n, &kernel, &firing).unwrap();
        let a = bump.crossings[0];
        let p = image.eval(a) - state.u_n.eval(a);
        let q = p / (correction.s_matrix[0][0] - 1.0);

        let next = iterate_once(&state, &bump, &correction, &kernel, &firing, false).unwrap();
        for j in [0, 217, 512, 800, 1024] {
            let x = grid.node(j);
            let expected = image.values[j] - correction.s_vector(&kernel, x)[0] * q;
            assert!(
                (next.u_n.values[j] - expected).abs() <= 1e-15,
                "node {j}: scalar reduction {expected} vs {}",
                next.u_n.values[j]
            );
        }
    }

    #[test]
    fn resolvent_route_matches_direct_route() {
        let (kernel, firing, bump, grid) = fhn_setup();
        let correction = build_correction(&bump, &kernel).unwrap();
        let mut direct = RefinementState::initial(&bump, grid);
        let mut resolvent = direct.clone();
        for _ in 0..3 {
            direct = iterate_once(&direct, &bump, &correction, &kernel, &firing, false).unwrap();
            resolvent =
                iterate_once_resolvent(&resolvent, &bump, &correction, &kernel, &firing).unwrap();
            let gap = direct.u_n.c1_distance(&resolvent.u_n);
            assert!(gap <= 1e-12, "route disagreement {gap} at n = {}", direct.n);
        }

        let (kernel, firing, bump, grid) = two_bump_setup(&[0.3, 0.8]);
        let correction = build_correction(&bump, &kernel).unwrap();
        let state = RefinementState::initial(&bump, grid);
        let direct = iterate_once(&state, &bump, &correction, &kernel, &firing, false).unwrap();
        let resolvent =
            iterate_once_resolvent(&state, &bump, &correction, &kernel, &firing).unwrap();
        let gap = direct.u_n.c1_distance(&resolvent.u_n);
        assert!(gap <= 1e-12, "two-crossing route disagreement {gap}");
    }

    #[test]
    fn exact_defect_route_agrees_with_interpolation() {
        let (kernel, firing, bump, grid) = fhn_setup();
        let correction = build_correction(&bump, &kernel).unwrap();
        let state = RefinementState::initial(&bump, grid);
        let interpolated =
            iterate_once(&state, &bump, &correction, &kernel, &firing, false).unwrap();
        let exact = iterate_once(&state, &bump, &correction, &kernel, &firing, true).unwrap();
        let gap = interpolated.u_n.c1_distance(&exact.u_n);
        assert!(gap <= 1e-6, "defect evaluation routes disagree by {gap}");
    }

    #[test]
    fn iterates_stay_even() {
        let (kernel, firing, bump, grid) = fhn_setup();
        let correction = build_correction(&bump, &kernel).unwrap();
        let mut state = RefinementState::initial(&bump, grid);
        for _ in 0..5 {
            state = iterate_once(&state, &bump, &correction, &kernel, &firing, false).unwrap();
            let defect = state.u_n.symmetry_defect();
            assert!(defect <= 1e-10, "defect {defect} at n = {}", state.n);
        }
    }

    #[test]
    fn two_bump_scenarios_converge_quickly() {
        for (guess, budget) in [([0.3, 0.8], 11), ([0.4, 0.65], 14)] {
            let (kernel, firing, bump, grid) = two_bump_setup(&guess);
            let config = RefinementConfig {
                tol: 1e-6,
                ..RefinementConfig::new(100.0, grid).unwrap()
            };
            let (state, recon) = run_refinement(&bump, &kernel, &firing, &config).unwrap();
            assert!(state.converged);
            assert!(
                state.n <= budget,
                "guess {guess:?} took {} iterations, budget {budget}",
                state.n
            );
            let sampler = |x: f64| recon.eval_with_deriv(x);
            let classification =
                verification::classify_bump(&sampler, firing.h, grid.half_width(), 6.0);
            assert!(classification.is_regular);
            assert_eq!(
                classification.crossings_found.len(),
                4,
                "a two-bump solution crosses threshold four times"
            );
        }
    }

    #[test]
    fn sweep_reports_rows_in_order_and_survives_failures() {
        let (kernel, firing, bump, grid) = fhn_setup();
        let config = RefinementConfig {
            tol: 1e-6,
            max_iters: 40,
            ..RefinementConfig::new(100.0, grid).unwrap()
        };

        // the shallow row diverges, the steep row converges
        let rows = sweep_beta(&bump, &kernel, &firing, &[25.0, 100.0], &config).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].beta, 25.0);
        assert!(rows[0].outcome.is_err(), "beta = 25 must fail: {rows:?}");
        let (distance, iters) = *rows[1].outcome.as_ref().unwrap();
        assert!(distance > 0.0 && iters > 0);

        // a single-row sweep reproduces a direct run exactly
        let (state, _) = run_refinement(&bump, &kernel, &firing, &config).unwrap();
        let limit = GridFunction::from_fn(grid, |x| (bump.eval(x), bump.eval_deriv(x)));
        assert_eq!(distance, state.u_n.c1_distance(&limit));
        assert_eq!(iters, state.n);

        assert!(sweep_beta(&bump, &kernel, &firing, &[], &config)
            .unwrap()
            .is_empty());
        assert!(sweep_beta(&bump, &kernel, &firing, &[100.0, 50.0], &config).is_err());
        assert!(sweep_beta(&bump, &kernel, &firing, &[-1.0, 50.0], &config).is_err());
    }

    #[test]
    fn divergence_guard_trips() {
        let (_, _, bump, grid) = fhn_setup();
        let mut state = RefinementState::initial(&bump, grid);
        state.n = 3;
        state.error_history = vec![1e-6, 2e-5, 5e-4];

        // a fourth error of order one completes three consecutive 10x growths
        let far = GridFunction::from_fn(grid, |x| (state.u_n.eval(x) + 0.3, 0.0));
        let result = finish_step(&state, far, 1.0);
        assert!(
            matches!(result, Err(Error::DivergenceDetected { iter: 4, .. })),
            "{result:?}"
        );

        // a non-finite step size trips immediately, without history
        let mut poisoned = GridFunction::zero(grid);
        poisoned.values[0] = f64::NAN;
        let fresh = RefinementState::initial(&bump, grid);
        let result = finish_step(&fresh, poisoned, 1.0);
        assert!(
            matches!(result, Err(Error::DivergenceDetected { iter: 1, .. })),
            "{result:?}"
        );
    }

    #[test]
    fn configuration_and_preconditions_are_enforced() {
        let (kernel, firing, bump, grid) = fhn_setup();
        assert!(RefinementConfig::new(0.0, grid).is_err());
        assert!(RefinementConfig::new(f64::INFINITY, grid).is_err());
        let mut config = RefinementConfig::new(100.0, grid).unwrap();
        config.tol = 0.0;
        assert!(config.validate().is_err());
        config.tol = 1e-10;
        config.max_iters = 0;
        assert!(config.validate().is_err());

        let config = RefinementConfig::new(100.0, grid).unwrap();
        let step = FiringRateModel::step(0.2).unwrap();
        let result = run_refinement(&bump, &kernel, &step, &config);
        assert!(matches!(result, Err(Error::NotApplicable(_))), "{result:?}");

        // shallow steepness at a tight budget must report non-convergence
        // (or divergence), never a bogus profile
        let shallow = RefinementConfig {
            beta: 25.0,
            max_iters: 12,
            ..config
        };
        let result = run_refinement(&bump, &kernel, &firing, &shallow);
        assert!(result.is_err(), "beta = 25 converged unexpectedly");
    }
}
