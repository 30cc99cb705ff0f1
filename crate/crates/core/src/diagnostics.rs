//! Discrete energy, dissipation/maximum-principle monitors, error norms and
//! convergence rates, and the positive-definiteness check behind the energy
//! law.
//!
//! The discrete free energy of a field is
//!
//! ```text
//!   E(phi) = dx^d [ 1/4 sum_i (phi_i^2 - 1)^2  -  eps/(2 dt) Phi . (L Phi) ]
//! ```
//!
//! with `L` the dimensionless stencil of the grid module (note
//! `eps/(2 dt) = eps_interface^2 / (2 dx^2)`, so the value depends on the
//! parameters only through that physical ratio). On periodic grids the sums
//! run over the `n^d` distinct ring nodes — the stored seam duplicates carry
//! no measure; this is the functional the scheme provably dissipates.
//! Accumulation is compensated (Neumaier) so monotonicity verdicts near
//! machine precision are not an artifact of summation order.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::grid::{BoundaryCondition, GridError, GridSpec, ScalarField};
use crate::scheme::SchemeParams;

/// Compensated (Neumaier) accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    c: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        self.c += if self.sum.abs() >= v.abs() {
            (self.sum - t) + v
        } else {
            (v - t) + self.sum
        };
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// One sample of the run-time monitors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    pub energy: f64,
    pub max_abs: f64,
}

/// Per-node energy contribution: quarter double-well plus the local share of
/// the stencil quadratic form.
#[inline]
fn node_energy(u: &[f64], spec: &GridSpec, flat: usize, quad_coeff: f64, two_d: f64) -> f64 {
    let v = u[flat];
    let w = v * v - 1.0;
    let lap = crate::grid::neighbor_sum_raw(u, spec, flat) - two_d * v;
    0.25 * w * w - quad_coeff * v * lap
}

/// Discrete free energy (see module doc).
pub fn discrete_energy(field: &ScalarField, params: &SchemeParams) -> f64 {
    let spec = *field.spec();
    let u = field.as_slice();
    let d = spec.dimension();
    let two_d = 2.0 * d as f64;
    let quad_coeff = params.eps_ratio / (2.0 * params.dt);
    let m = spec.nodes_per_axis();
    // Periodic seam duplicates are excluded: only the first n indices per
    // axis carry measure.
    let span = match spec.boundary_condition() {
        BoundaryCondition::Periodic => m - 1,
        _ => m,
    };
    // One parallel task per leading-axis slab, compensated within the slab,
    // then a fixed-order compensated reduction over slabs.
    let per_slab: Vec<f64> = (0..span)
        .into_par_iter()
        .map(|i0| {
            let mut acc = CompensatedSum::new();
            match d {
                1 => acc.add(node_energy(u, &spec, i0, quad_coeff, two_d)),
                2 => {
                    for i1 in 0..span {
                        acc.add(node_energy(u, &spec, i0 * m + i1, quad_coeff, two_d));
                    }
                }
                _ => {
                    for i1 in 0..span {
                        for i2 in 0..span {
                            acc.add(node_energy(u, &spec, (i0 * m + i1) * m + i2, quad_coeff, two_d));
                        }
                    }
                }
            }
            acc.value()
        })
        .collect();
    let mut total = CompensatedSum::new();
    for s in per_slab {
        total.add(s);
    }
    total.value() * spec.dx().powi(d as i32)
}

/// Outcome of a monotonicity scan over an energy time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotoneVerdict {
    pub pass: bool,
    /// Index `i` of the first pair with `E[i+1] - E[i] > tol`.
    pub first_violation: Option<usize>,
    /// Largest increase observed (0 if the series never increases).
    pub max_increase: f64,
}

/// Check `E(n+1) - E(n) <= tol` for every consecutive pair. With `tol =
/// None` each pair uses `1e-12 * max(1, |E(n)|)`.
pub fn check_energy_monotone(records: &[EnergyRecord], tol: Option<f64>) -> MonotoneVerdict {
    let mut verdict = MonotoneVerdict {
        pass: true,
        first_violation: None,
        max_increase: 0.0,
    };
    for (i, pair) in records.windows(2).enumerate() {
        let delta = pair[1].energy - pair[0].energy;
        let bound = tol.unwrap_or_else(|| 1e-12 * pair[0].energy.abs().max(1.0));
        verdict.max_increase = verdict.max_increase.max(delta);
        if delta > bound && verdict.pass {
            verdict.pass = false;
            verdict.first_violation = Some(i);
        }
    }
    verdict
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("matrix check limited to {limit} nodes, grid has {got}")]
    MatrixTooLarge { limit: usize, got: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("refinement levels must halve dx: got {prev} -> {next}")]
    NotHalving { prev: f64, next: f64 },
    #[error("need at least 2 levels, got {0}")]
    TooFewLevels(usize),
}

/// Result of assembling and testing the energy-law system matrix
/// `M = (4 - dt) I + 2 eps L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyMatrixVerdict {
    /// Number of rows of the assembled operator (distinct nodes for P).
    pub size: usize,
    pub symmetric: bool,
    /// Every row weakly diagonally dominant.
    pub dominance_ok: bool,
    /// Rows with a strict dominance margin (irreducible matrices need one).
    pub strict_rows: usize,
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
}

const MATRIX_NODE_LIMIT: usize = 4096;

/// Assemble `M = (4 - dt) I + 2 eps L` on the grid's distinct unknowns and
/// test the sufficient conditions of the energy law: symmetry, (weak) row
/// diagonal dominance — which holds exactly when `dt <= 4(1 - 2 d eps)` on
/// interior rows — and numerical positive definiteness.
pub fn check_energy_matrix(
    params: &SchemeParams,
    spec: &GridSpec,
) -> Result<EnergyMatrixVerdict, DiagnosticsError> {
    let lambda = distinct_stencil_matrix(spec);
    let size = lambda.nrows();
    if size > MATRIX_NODE_LIMIT {
        return Err(DiagnosticsError::MatrixTooLarge {
            limit: MATRIX_NODE_LIMIT,
            got: size,
        });
    }
    let mut m = lambda * (2.0 * params.eps_ratio);
    let shift = 4.0 - params.dt;
    for i in 0..size {
        m[(i, i)] += shift;
    }

    let mut symmetric = true;
    'sym: for r in 0..size {
        for c in (r + 1)..size {
            if (m[(r, c)] - m[(c, r)]).abs() > 1e-12 {
                symmetric = false;
                break 'sym;
            }
        }
    }

    let mut dominance_ok = true;
    let mut strict_rows = 0;
    for r in 0..size {
        let diag = m[(r, r)];
        let off: f64 = (0..size).filter(|&c| c != r).map(|c| m[(r, c)].abs()).sum();
        let margin = diag - off;
        if margin < -1e-13 * diag.abs().max(1.0) {
            dominance_ok = false;
        } else if margin > 1e-13 * diag.abs().max(1.0) {
            strict_rows += 1;
        }
    }

    let eig = nalgebra::SymmetricEigen::new(m);
    let min_eigenvalue = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok(EnergyMatrixVerdict {
        size,
        symmetric,
        dominance_ok,
        strict_rows,
        min_eigenvalue,
        positive_definite: min_eigenvalue > 0.0,
    })
}

/// Dense stencil operator over the grid's distinct unknowns: identical to
/// [`crate::grid::explicit_matrix`] for Neumann/Dirichlet grids; for periodic
/// grids the seam duplicates are dropped and the operator is the plain
/// `n`-circulant (symmetric), which is the form the energy analysis uses.
pub fn distinct_stencil_matrix(spec: &GridSpec) -> DMatrix<f64> {
    if spec.boundary_condition() != BoundaryCondition::Periodic {
        return crate::grid::explicit_matrix(spec);
    }
    let d = spec.dimension();
    let n = spec.cells_per_axis();
    let total = n.pow(d as u32);
    let mut a = DMatrix::<f64>::zeros(total, total);
    let idx = |multi: &[usize]| -> usize {
        let mut f = 0;
        for &i in multi {
            f = f * n + i;
        }
        f
    };
    let mut multi = [0usize; 3];
    for flat in 0..total {
        let mut rest = flat;
        for axis in (0..d).rev() {
            multi[axis] = rest % n;
            rest /= n;
        }
        a[(flat, flat)] -= 2.0 * d as f64;
        for axis in 0..d {
            let mut nb = multi;
            nb[axis] = if multi[axis] == 0 { n - 1 } else { multi[axis] - 1 };
            a[(flat, idx(&nb[..d]))] += 1.0;
            nb[axis] = if multi[axis] == n - 1 { 0 } else { multi[axis] + 1 };
            a[(flat, idx(&nb[..d]))] += 1.0;
        }
    }
    a
}

/// Max norm and `dx^(d/2)`-weighted l2 norm of the pointwise difference.
pub fn error_norms(numeric: &ScalarField, reference: &ScalarField) -> Result<(f64, f64), GridError> {
    let (inf, sumsq, _count) = difference_moments(numeric, reference)?;
    let d = numeric.spec().dimension() as i32;
    Ok((inf, (numeric.spec().dx().powi(d) * sumsq).sqrt()))
}

/// Max norm and root-mean-square (per stored node) of the pointwise
/// difference — the normalization used by the harness's error tables.
pub fn error_norms_rms(numeric: &ScalarField, reference: &ScalarField) -> Result<(f64, f64), GridError> {
    let (inf, sumsq, count) = difference_moments(numeric, reference)?;
    Ok((inf, (sumsq / count as f64).sqrt()))
}

fn difference_moments(a: &ScalarField, b: &ScalarField) -> Result<(f64, f64, usize), GridError> {
    if a.spec() != b.spec() {
        return Err(GridError::GridMismatch);
    }
    let mut inf: f64 = 0.0;
    let mut sumsq = CompensatedSum::new();
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        let d = x - y;
        inf = inf.max(d.abs());
        sumsq.add(d * d);
    }
    Ok((inf, sumsq.value(), a.len()))
}

/// One refinement level of a convergence study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub dx: f64,
    pub err_inf: f64,
    pub err_l2: f64,
    /// Rates vs the previous (coarser) level; absent on the first level or
    /// when a ratio is degenerate (zero or non-finite errors).
    pub cr_inf: Option<f64>,
    pub cr_l2: Option<f64>,
}

impl ErrorReport {
    pub fn new(dx: f64, err_inf: f64, err_l2: f64) -> Self {
        ErrorReport {
            dx,
            err_inf,
            err_l2,
            cr_inf: None,
            cr_l2: None,
        }
    }
}

fn rate(e_prev: f64, e_cur: f64, ratio: f64) -> Option<f64> {
    if e_prev > 0.0 && e_cur > 0.0 {
        let r = (e_prev / e_cur).ln() / ratio.ln();
        r.is_finite().then_some(r)
    } else {
        None
    }
}

/// Fill convergence rates for a strictly mesh-halving ladder
/// (`CR = log2(err_coarse / err_fine)`); spacings must halve within 1e-9
/// relative.
pub fn convergence_rates(levels: &[ErrorReport]) -> Result<Vec<ErrorReport>, DiagnosticsError> {
    if levels.len() < 2 {
        return Err(DiagnosticsError::TooFewLevels(levels.len()));
    }
    for pair in levels.windows(2) {
        if (pair[0].dx / pair[1].dx - 2.0).abs() > 1e-9 {
            return Err(DiagnosticsError::NotHalving {
                prev: pair[0].dx,
                next: pair[1].dx,
            });
        }
    }
    Ok(fill_rates(levels))
}

/// Convergence rates for arbitrary (strictly decreasing) spacings:
/// `CR = ln(err_coarse/err_fine) / ln(dx_coarse/dx_fine)`.
pub fn convergence_rates_general(levels: &[ErrorReport]) -> Result<Vec<ErrorReport>, DiagnosticsError> {
    if levels.len() < 2 {
        return Err(DiagnosticsError::TooFewLevels(levels.len()));
    }
    Ok(fill_rates(levels))
}

fn fill_rates(levels: &[ErrorReport]) -> Vec<ErrorReport> {
    let mut out = levels.to_vec();
    for i in 1..out.len() {
        let ratio = out[i - 1].dx / out[i].dx;
        out[i].cr_inf = rate(out[i - 1].err_inf, out[i].err_inf, ratio);
        out[i].cr_l2 = rate(out[i - 1].err_l2, out[i].err_l2, ratio);
    }
    out
}
