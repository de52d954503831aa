//! Grid functions on [-d, d] and the restricted integral operator.
//!
//! A candidate solution is carried as values and derivative values on a
//! uniform symmetric grid. Applying the operator
//!
//! ```text
//! (H_beta U)(x) = integral over [-d, d] of omega(x - y) f_beta(U(y)) dy
//! ```
//!
//! uses composite Gauss-Legendre with one panel per grid cell, so the kernel
//! kink at `y = x` falls on panel boundaries whenever `x` is a grid node.
//! Derivative values are produced by differentiating under the integral with
//! `omega'` rather than by differencing, keeping the result genuinely C^1.
//! An 8-point re-evaluation guards every operator application; the 4-point
//! result is returned so that outputs do not depend on the guard.

use std::path::Path;

use crate::error::{Error, Result};
use crate::firing_rates::FiringRateModel;
use crate::kernels::KernelModel;
use crate::limit_bump::LimitBump;
use crate::linalg::Lu;
use crate::quad::{GL4_NODES, GL4_WEIGHTS, GL8_NODES, GL8_WEIGHTS};

/// Allowed sup-norm drift between the 4-point quadrature and its 8-point
/// refinement before an operator application is rejected.
pub const QUADRATURE_GUARD: f64 = 1e-7;

/// Guard for the linearization: the density f'(U)v has a derivative kink
/// wherever U crosses the threshold (the steepness derivative clamps to
/// zero below it), which caps fixed-order quadrature accuracy near 1e-5 at
/// practical grids. The looser guard matches the linearization's 1e-4
/// diagnostic contract instead of rejecting every legitimate application.
pub const S_QUADRATURE_GUARD: f64 = 1e-4;

/// Tolerance for detecting even symmetry of sampled values.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Uniform grid on [-d, d] with an odd node count so that 0 is a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    d: f64,
    m: usize,
}

impl Grid {
    /// `m` must be odd and at least 64 (so effectively at least 65).
    pub fn new(d: f64, m: usize) -> Result<Grid> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be positive and finite, got {d}"
            )));
        }
        if m < 64 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 64 nodes, got {m}"
            )));
        }
        if m % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid node count must be odd so that 0 is a node, got {m}"
            )));
        }
        Ok(Grid { d, m })
    }

    pub fn half_width(&self) -> f64 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.d / self.center() as f64
    }

    fn center(&self) -> usize {
        (self.m - 1) / 2
    }

    /// Node j, exactly antisymmetric about the center node at 0.
    pub fn node(&self, j: usize) -> f64 {
        (j as isize - self.center() as isize) as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m).map(|j| self.node(j))
    }
}

/// Sampled values and derivative values of a C^1 function on a [`Grid`],
/// with cubic Hermite interpolation between nodes.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub deriv_values: Vec<f64>,
    pub even: bool,
}

impl GridFunction {
    pub fn from_samples(grid: Grid, values: Vec<f64>, deriv_values: Vec<f64>) -> GridFunction {
        assert_eq!(values.len(), grid.len());
        assert_eq!(deriv_values.len(), grid.len());
        let even = detect_even(&values, &deriv_values);
        GridFunction {
            grid,
            values,
            deriv_values,
            even,
        }
    }

    /// Sample `f`, which returns `(value, derivative)` at a point.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> (f64, f64)) -> GridFunction {
        let mut values = Vec::with_capacity(grid.len());
        let mut derivs = Vec::with_capacity(grid.len());
        for x in grid.nodes() {
            let (u, du) = f(x);
            values.push(u);
            derivs.push(du);
        }
        GridFunction::from_samples(grid, values, derivs)
    }

    pub fn zero(grid: Grid) -> GridFunction {
        GridFunction {
            values: vec![0.0; grid.len()],
            deriv_values: vec![0.0; grid.len()],
            grid,
            even: true,
        }
    }

    /// Largest violation of even symmetry over value and derivative samples.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.grid.len();
        let mut defect = 0.0f64;
        for j in 0..m {
            let r = m - 1 - j;
            defect = defect
                .max((self.values[j] - self.values[r]).abs())
                .max((self.deriv_values[j] + self.deriv_values[r]).abs());
        }
        defect
    }

    /// Cubic Hermite interpolation of the value at `x` in [-d, d].
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_deriv(x).0
    }

    /// Interpolated value and derivative at `x`.
    pub fn eval_with_deriv(&self, x: f64) -> (f64, f64) {
        let spacing = self.grid.spacing();
        let d = self.grid.half_width();
        debug_assert!(
            x.abs() <= d + spacing,
            "evaluation far outside the grid domain: {x} vs d={d}"
        );
        let cell = (((x + d) / spacing).floor() as isize)
            .clamp(0, self.grid.len() as isize - 2) as usize;
        let t = (x - self.grid.node(cell)) / spacing;
        let (f0, f1) = (self.values[cell], self.values[cell + 1]);
        let (d0, d1) = (
            self.deriv_values[cell] * spacing,
            self.deriv_values[cell + 1] * spacing,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * f0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * f1
            + (t3 - t2) * d1;
        let deriv = ((6.0 * t2 - 6.0 * t) * f0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * f1
            + (3.0 * t2 - 2.0 * t) * d1)
            / spacing;
        (value, deriv)
    }

    /// sup |U| + sup |U'| over the grid nodes.
    pub fn c1_norm(&self) -> f64 {
        let max_val = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max_der = self.deriv_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        max_val + max_der
    }

    /// C^1 distance to another function sampled on the same grid.
    pub fn c1_distance(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.grid, other.grid, "grids must match");
        let mut max_val = 0.0f64;
        let mut max_der = 0.0f64;
        for j in 0..self.grid.len() {
            max_val = max_val.max((self.values[j] - other.values[j]).abs());
            max_der = max_der.max((self.deriv_values[j] - other.deriv_values[j]).abs());
        }
        max_val + max_der
    }

    /// CSV serialization: header `x,u,uprime`, 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("x,u,uprime\n");
        for j in 0..self.grid.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e}\n",
                self.grid.node(j),
                self.values[j],
                self.deriv_values[j]
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Parse a profile CSV produced by [`GridFunction::to_csv_string`] (or any
    /// CSV with the same header and a uniform symmetric grid).
    pub fn read_csv(path: &Path) -> Result<GridFunction> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        match lines.next() {
            Some(header) if header.trim() == "x,u,uprime" => {}
            other => {
                return Err(Error::Data(format!(
                    "expected CSV header `x,u,uprime`, found {other:?}"
                )))
            }
        }
        let mut xs = Vec::new();
        let mut values = Vec::new();
        let mut derivs = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Data(format!(
                    "line {}: expected 3 comma-separated fields, found {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!("line {}: malformed {what} `{s}`", lineno + 2))
                })
            };
            xs.push(parse(fields[0], "x")?);
            values.push(parse(fields[1], "u")?);
            derivs.push(parse(fields[2], "uprime")?);
        }
        let m = xs.len();
        if m < 65 || m % 2 == 0 {
            return Err(Error::Data(format!(
                "profile needs an odd node count of at least 65, found {m}"
            )));
        }
        let d = xs[m - 1];
        if !(d > 0.0) || (xs[0] + d).abs() > 1e-9 * d {
            return Err(Error::Data(format!(
                "profile domain must be symmetric, spans [{}, {}]",
                xs[0],
                xs[m - 1]
            )));
        }
        let grid = Grid::new(d, m).map_err(|e| Error::Data(e.to_string()))?;
        let spacing = grid.spacing();
        for (j, &x) in xs.iter().enumerate() {
            if (x - grid.node(j)).abs() > 1e-9 * spacing.max(1.0) {
                return Err(Error::Data(format!(
                    "node {j} at x={x} breaks uniform spacing"
                )));
            }
        }
        Ok(GridFunction::from_samples(grid, values, derivs))
    }
}

fn detect_even(values: &[f64], derivs: &[f64]) -> bool {
    let m = values.len();
    for j in 0..m {
        let r = m - 1 - j;
        if (values[j] - values[r]).abs() > SYMMETRY_TOL
            || (derivs[j] + derivs[r]).abs() > SYMMETRY_TOL
        {
            return false;
        }
    }
    true
}

/// Premultiplied kernel tables for the panel-per-cell quadrature. Entry
/// `[j - l + (m - 2)][q]` integrates output node `j` against quadrature node
/// `q` of panel `l`; the Toeplitz structure collapses the table to the node
/// difference.
struct KernelTables {
    m: usize,
    w4: Vec<f64>,
    dw4: Vec<f64>,
    w8: Vec<f64>,
    dw8: Vec<f64>,
}

impl KernelTables {
    fn build(grid: &Grid, kernel: &KernelModel) -> KernelTables {
        let m = grid.len();
        let spacing = grid.spacing();
        let half = 0.5 * spacing;
        let diffs = 2 * m - 2;
        let mut w4 = vec![0.0; diffs * 4];
        let mut dw4 = vec![0.0; diffs * 4];
        let mut w8 = vec![0.0; diffs * 8];
        let mut dw8 = vec![0.0; diffs * 8];
        for s in 0..diffs {
            let diff = s as isize - (m as isize - 2);
            for q in 0..4 {
                let offset = half * (1.0 + GL4_NODES[q]);
                let arg = diff as f64 * spacing - offset;
                w4[s * 4 + q] = half * GL4_WEIGHTS[q] * kernel.eval(arg);
                dw4[s * 4 + q] = half * GL4_WEIGHTS[q] * kernel.deriv(arg);
            }
            for q in 0..8 {
                let offset = half * (1.0 + GL8_NODES[q]);
                let arg = diff as f64 * spacing - offset;
                w8[s * 8 + q] = half * GL8_WEIGHTS[q] * kernel.eval(arg);
                dw8[s * 8 + q] = half * GL8_WEIGHTS[q] * kernel.deriv(arg);
            }
        }
        KernelTables {
            m,
            w4,
            dw4,
            w8,
            dw8,
        }
    }
}

/// Values of `u` at the in-panel Gauss-Legendre nodes, panel-major.
fn panel_node_values(u: &GridFunction, gl_nodes: &[f64]) -> Vec<f64> {
    let m = u.grid.len();
    let nq = gl_nodes.len();
    let spacing = u.grid.spacing();
    // Hermite basis at the fixed in-cell coordinates t_q
    let mut basis = Vec::with_capacity(nq);
    for node in gl_nodes {
        let t = 0.5 * (1.0 + node);
        let t2 = t * t;
        let t3 = t2 * t;
        basis.push([
            2.0 * t3 - 3.0 * t2 + 1.0,
            t3 - 2.0 * t2 + t,
            -2.0 * t3 + 3.0 * t2,
            t3 - t2,
        ]);
    }
    let mut out = vec![0.0; (m - 1) * nq];
    for l in 0..m - 1 {
        let f0 = u.values[l];
        let f1 = u.values[l + 1];
        let d0 = u.deriv_values[l] * spacing;
        let d1 = u.deriv_values[l + 1] * spacing;
        for (q, b) in basis.iter().enumerate() {
            out[l * nq + q] = b[0] * f0 + b[1] * d0 + b[2] * f1 + b[3] * d1;
        }
    }
    out
}

/// Convolve a panel-major density against the kernel tables, producing
/// values and derivatives at every grid node. Panels are accumulated in
/// ascending index order for bit-reproducibility.
fn convolve(
    tables: &KernelTables,
    density: &[f64],
    nq: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = tables.m;
    let (w, dw) = if nq == 4 {
        (&tables.w4, &tables.dw4)
    } else {
        (&tables.w8, &tables.dw8)
    };
    let mut values = vec![0.0; m];
    let mut derivs = vec![0.0; m];
    for (j, (value, deriv)) in values.iter_mut().zip(derivs.iter_mut()).enumerate() {
        let mut acc_v = 0.0;
        let mut acc_d = 0.0;
        for l in 0..m - 1 {
            let s = j + (m - 2) - l;
            let wrow = &w[s * nq..s * nq + nq];
            let dwrow = &dw[s * nq..s * nq + nq];
            let drow = &density[l * nq..l * nq + nq];
            for q in 0..nq {
                acc_v += wrow[q] * drow[q];
                acc_d += dwrow[q] * drow[q];
            }
        }
        *value = acc_v;
        *deriv = acc_d;
    }
    (values, derivs)
}

fn require_finite_beta(firing: &FiringRateModel) -> Result<()> {
    if firing.is_step() {
        Err(Error::NotApplicable(
            "the integral operator needs finite beta; use the step operator \
             for the steep limit"
            .into(),
        ))
    } else {
        Ok(())
    }
}

/// Apply the restricted operator `H_beta` to `u` on its own grid, returning
/// values and derivatives of the image. Fails with `QuadratureFailure` when
/// the 8-point re-evaluation drifts beyond [`QUADRATURE_GUARD`].
pub fn apply_h_beta(
    u: &GridFunction,
    kernel: &KernelModel,
    firing: &FiringRateModel,
) -> Result<GridFunction> {
    require_finite_beta(firing)?;
    let tables = KernelTables::build(&u.grid, kernel);
    apply_with_density(u, &tables, |value| firing.eval(value))
}

/// Apply the linearization `v -> integral omega(x - y) f'(U(y)) v(y) dy`
/// around the state `u`; diagnostic counterpart of [`apply_h_beta`].
pub fn apply_s_beta(
    u: &GridFunction,
    v: &GridFunction,
    kernel: &KernelModel,
    firing: &FiringRateModel,
) -> Result<GridFunction> {
    require_finite_beta(firing)?;
    assert_eq!(u.grid, v.grid, "state and direction must share a grid");
    let tables = KernelTables::build(&u.grid, kernel);

    let u4 = panel_node_values(u, &GL4_NODES);
    let v4 = panel_node_values(v, &GL4_NODES);
    let dens4: Vec<f64> = u4
        .iter()
        .zip(&v4)
        .map(|(&uv, &vv)| firing.deriv_finite(uv) * vv)
        .collect();
    let u8 = panel_node_values(u, &GL8_NODES);
    let v8 = panel_node_values(v, &GL8_NODES);
    let dens8: Vec<f64> = u8
        .iter()
        .zip(&v8)
        .map(|(&uv, &vv)| firing.deriv_finite(uv) * vv)
        .collect();

    finish_application(&u.grid, &tables, &dens4, &dens8, S_QUADRATURE_GUARD)
}

fn apply_with_density(
    u: &GridFunction,
    tables: &KernelTables,
    density_of: impl Fn(f64) -> f64,
) -> Result<GridFunction> {
    let dens4: Vec<f64> = panel_node_values(u, &GL4_NODES)
        .into_iter()
        .map(&density_of)
        .collect();
    let dens8: Vec<f64> = panel_node_values(u, &GL8_NODES)
        .into_iter()
        .map(&density_of)
        .collect();
    finish_application(&u.grid, tables, &dens4, &dens8, QUADRATURE_GUARD)
}

fn finish_application(
    grid: &Grid,
    tables: &KernelTables,
    dens4: &[f64],
    dens8: &[f64],
    guard: f64,
) -> Result<GridFunction> {
    let (values, derivs) = convolve(tables, dens4, 4);
    let (values8, derivs8) = convolve(tables, dens8, 8);
    let mut defect = 0.0f64;
    for j in 0..grid.len() {
        defect = defect
            .max((values[j] - values8[j]).abs())
            .max((derivs[j] - derivs8[j]).abs());
    }
    if defect > guard {
        return Err(Error::QuadratureFailure {
            defect,
            allowed: guard,
        });
    }
    Ok(GridFunction::from_samples(*grid, values, derivs))
}

/// Whole-line reconstruction of a grid iterate: one application of the
/// integral evaluated at arbitrary `x`. The density `f_beta(U)` is
/// precomputed at the panel quadrature nodes, so pointwise evaluation costs
/// one kernel sweep.
#[derive(Debug, Clone)]
pub struct Reconstruction<'a> {
    grid: Grid,
    kernel: &'a KernelModel,
    density: Vec<f64>,
}

impl<'a> Reconstruction<'a> {
    pub fn new(
        u: &GridFunction,
        kernel: &'a KernelModel,
        firing: &FiringRateModel,
    ) -> Result<Reconstruction<'a>> {
        require_finite_beta(firing)?;
        let density = panel_node_values(u, &GL4_NODES)
            .into_iter()
            .map(|v| firing.eval(v))
            .collect();
        Ok(Reconstruction {
            grid: u.grid,
            kernel,
            density,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_deriv(x).0
    }

    pub fn eval_with_deriv(&self, x: f64) -> (f64, f64) {
        let m = self.grid.len();
        let spacing = self.grid.spacing();
        let half = 0.5 * spacing;
        let mut value = 0.0;
        let mut deriv = 0.0;
        for l in 0..m - 1 {
            let left = self.grid.node(l);
            for q in 0..4 {
                let y = left + half * (1.0 + GL4_NODES[q]);
                let weight = half * GL4_WEIGHTS[q] * self.density[l * 4 + q];
                value += weight * self.kernel.eval(x - y);
                deriv += weight * self.kernel.deriv(x - y);
            }
        }
        (value, deriv)
    }
}

/// Reconstruct the value of `H_beta u` at one arbitrary point. For repeated
/// evaluation build a [`Reconstruction`] once.
pub fn reconstruct_t2(
    u: &GridFunction,
    kernel: &KernelModel,
    firing: &FiringRateModel,
    x: f64,
) -> Result<f64> {
    Ok(Reconstruction::new(u, kernel, firing)?.eval(x))
}

/// Crossing-indexed data driving the refinement correction: the vector
/// field `s(x)`, the matrix S with entries
/// `S_ij = (omega(a_i - a_j) + omega(a_i + a_j)) / |u_inf'(a_j)|`,
/// and an LU factorization of `S - I`.
#[derive(Debug, Clone)]
pub struct CorrectionData {
    pub crossings: Vec<f64>,
    pub margins: Vec<f64>,
    pub s_matrix: Vec<Vec<f64>>,
    s_minus_i: Lu,
}

impl CorrectionData {
    /// s_i(x) = (omega(x - a_i) + omega(x + a_i)) / |u_inf'(a_i)|.
    pub fn s_vector(&self, kernel: &KernelModel, x: f64) -> Vec<f64> {
        self.crossings
            .iter()
            .zip(&self.margins)
            .map(|(&a, &margin)| (kernel.eval(x - a) + kernel.eval(x + a)) / margin)
            .collect()
    }

    /// Pointwise x-derivative of [`CorrectionData::s_vector`].
    pub fn s_vector_deriv(&self, kernel: &KernelModel, x: f64) -> Vec<f64> {
        self.crossings
            .iter()
            .zip(&self.margins)
            .map(|(&a, &margin)| (kernel.deriv(x - a) + kernel.deriv(x + a)) / margin)
            .collect()
    }

    /// Solve (S - I) q = rhs with the stored factorization.
    pub fn solve_s_minus_i(&self, rhs: &[f64]) -> Vec<f64> {
        self.s_minus_i.solve(rhs)
    }

    pub fn s_minus_i_det(&self) -> f64 {
        self.s_minus_i.det()
    }
}

/// Build the correction data from a solved steep-limit bump.
/// Fails with `SingularMatrix` when |det(S - I)| <= 1e-12, which mirrors a
/// failure of the crossing-Jacobian invertibility hypothesis.
pub fn build_correction(bump: &LimitBump, kernel: &KernelModel) -> Result<CorrectionData> {
    let n = bump.crossings.len();
    let mut s_matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s_matrix[i][j] = (kernel.eval(bump.crossings[i] - bump.crossings[j])
                + kernel.eval(bump.crossings[i] + bump.crossings[j]))
                / bump.margins[j];
        }
    }
    let mut s_minus_i = s_matrix.clone();
    for (i, row) in s_minus_i.iter_mut().enumerate() {
        row[i] -= 1.0;
    }
    let lu = Lu::factor(&s_minus_i)?;
    if lu.det().abs() <= 1e-12 {
        return Err(Error::SingularMatrix(format!(
            "det(S - I) = {:.3e} is too small to invert",
            lu.det()
        )));
    }
    Ok(CorrectionData {
        crossings: bump.crossings.clone(),
        margins: bump.margins.clone(),
        s_matrix,
        s_minus_i: lu,
    })
}
