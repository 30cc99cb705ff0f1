//! Reference time integrators the main scheme is compared against: the
//! fully explicit forward-Euler finite-difference step (FEX-FD) and a
//! Crank–Nicolson step (CN) solved by damped Newton with matrix-free
//! conjugate gradients.
//!
//! Both advance the same semi-discretization `phi' = (eps/dt) L phi - f(phi)`
//! (with `eps = eps_interface^2 dt / dx^2` and `L` the grid module's
//! dimensionless stencil):
//!
//! ```text
//!   FEX : phi^{n+1} = phi^n + eps L phi^n - dt f(phi^n)
//!   CN  : phi^{n+1} - (eps/2) L phi^{n+1} + (dt/2) f(phi^{n+1})
//!           = phi^n + (eps/2) L phi^n - (dt/2) f(phi^n)
//! ```
//!
//! FEX preserves the maximum principle only under the stronger stepping
//! restriction `dt <= (1 - 2 d eps)/2` with `0 < eps <= 1/(2d)`
//! ([`fex_window_satisfied`]); outside it the scheme is expected to violate
//! `|phi| <= 1`, which is exactly what the comparison harness demonstrates.
//!
//! On periodic grids the nonlinear solve runs on the `n^d` distinct ring
//! unknowns (the seam duplicates are presentation copies, and the stencil
//! restricted to distinct nodes is symmetric, which conjugate gradients
//! requires); the returned field carries the duplicates filled back in.

use crate::grid::{BoundaryCondition, GridError, GridSpec, ScalarField};
use crate::scheme::{reaction, SchemeParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("non-finite value produced at node {node}")]
    NonFinite { node: usize },
    #[error("newton did not reach tol {tol:e} in {iters} iterations (residual {residual:e})")]
    NewtonDidNotConverge { iters: usize, tol: f64, residual: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Sufficient stability condition for the explicit scheme:
/// `0 < eps <= 1/(2d)` and `0 < dt <= (1 - 2 d eps)/2`.
pub fn fex_window_satisfied(params: &SchemeParams) -> bool {
    let two_d = 2.0 * params.d as f64;
    params.eps_ratio > 0.0
        && params.eps_ratio <= 1.0 / two_d
        && params.dt > 0.0
        && params.dt <= (1.0 - two_d * params.eps_ratio) / 2.0
}

/// One forward-Euler step. No stability restriction is enforced here — the
/// caller decides (see [`fex_window_satisfied`]); non-finite results are an
/// error so a blown-up run fails loudly rather than silently propagating NaN.
pub fn fex_fd_step(field: &ScalarField, params: &SchemeParams) -> Result<ScalarField, BaselineError> {
    use rayon::prelude::*;
    let spec = *field.spec();
    let u = field.as_slice();
    let two_d = 2.0 * spec.dimension() as f64;
    let (eps, dt) = (params.eps_ratio, params.dt);
    let data: Vec<f64> = (0..u.len())
        .into_par_iter()
        .map(|i| {
            let lap = crate::grid::neighbor_sum_raw(u, &spec, i) - two_d * u[i];
            u[i] + eps * lap - dt * reaction(u[i])
        })
        .collect();
    let out = ScalarField::from_data(spec, data)?;
    if let Some(node) = out.first_non_finite() {
        return Err(BaselineError::NonFinite { node });
    }
    Ok(out)
}

/// Convergence report of one Crank–Nicolson solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CnReport {
    /// Newton updates taken (0 when the initial guess already satisfies tol).
    pub newton_iters: usize,
    /// Max-norm of the nonlinear residual at the accepted iterate.
    pub final_residual: f64,
    /// Conjugate-gradient iterations summed over all Newton steps.
    pub cg_iters_total: usize,
}

/// The grid's distinct unknowns in a packed row-major layout (`span^d`
/// values, `span = n` for periodic grids, all stored nodes otherwise).
struct DistinctSpace {
    spec: GridSpec,
    d: usize,
    span: usize,
    size: usize,
}

impl DistinctSpace {
    fn new(spec: GridSpec) -> Self {
        let d = spec.dimension();
        let m = spec.nodes_per_axis();
        let span = match spec.boundary_condition() {
            BoundaryCondition::Periodic => m - 1,
            _ => m,
        };
        DistinctSpace {
            spec,
            d,
            span,
            size: span.pow(d as u32),
        }
    }

    fn pack(&self, stored: &[f64]) -> Vec<f64> {
        let m = self.spec.nodes_per_axis();
        if self.span == m {
            return stored.to_vec();
        }
        let (d, span) = (self.d, self.span);
        let mut out = vec![0.0; self.size];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut idx = [0usize; 3];
            let mut r = flat;
            for axis in (0..d).rev() {
                idx[axis] = r % span;
                r /= span;
            }
            let mut stored_flat = 0;
            for &i in idx.iter().take(d) {
                stored_flat = stored_flat * m + i;
            }
            *slot = stored[stored_flat];
        }
        out
    }

    fn unpack(&self, packed: &[f64]) -> Vec<f64> {
        let m = self.spec.nodes_per_axis();
        if self.span == m {
            return packed.to_vec();
        }
        let (d, span) = (self.d, self.span);
        let mut out = vec![0.0; self.spec.node_count()];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut idx = [0usize; 3];
            let mut r = flat;
            for axis in (0..d).rev() {
                idx[axis] = r % m;
                r /= m;
            }
            let mut packed_flat = 0;
            for &i in idx.iter().take(d) {
                packed_flat = packed_flat * span + i % span; // seam -> ring node 0
            }
            *slot = packed[packed_flat];
        }
        out
    }

    /// Dimensionless stencil on the packed layout.
    fn lap(&self, x: &[f64], flat: usize) -> f64 {
        let (d, span) = (self.d, self.span);
        let bc = self.spec.boundary_condition();
        let mut sum = 0.0;
        let mut stride = span.pow((d - 1) as u32);
        let mut rest = flat;
        for _ in 0..d {
            let i = rest / stride;
            rest %= stride;
            let here = x[flat];
            let minus = if i > 0 {
                x[flat - stride]
            } else {
                match bc {
                    BoundaryCondition::HomogeneousNeumann => here,
                    BoundaryCondition::HomogeneousDirichlet => 0.0,
                    BoundaryCondition::Periodic => x[flat + (span - 1) * stride],
                }
            };
            let plus = if i + 1 < span {
                x[flat + stride]
            } else {
                match bc {
                    BoundaryCondition::HomogeneousNeumann => here,
                    BoundaryCondition::HomogeneousDirichlet => 0.0,
                    BoundaryCondition::Periodic => x[flat - (span - 1) * stride],
                }
            };
            sum += minus + plus;
            if stride >= span {
                stride /= span;
            }
        }
        sum - 2.0 * d as f64 * x[flat]
    }
}

/// Max-norm Crank–Nicolson residual of `new` against `old` (evaluated on the
/// distinct unknowns) — the quantity [`cn_step`] drives below `newton_tol`.
pub fn cn_residual_max(old: &ScalarField, new: &ScalarField, params: &SchemeParams) -> f64 {
    let ds = DistinctSpace::new(*old.spec());
    let u = ds.pack(old.as_slice());
    let v = ds.pack(new.as_slice());
    let b = cn_rhs(&ds, &u, params);
    let mut worst = 0.0f64;
    for i in 0..ds.size {
        worst = worst.max(cn_f(&ds, &v, &b, params, i).abs());
    }
    worst
}

fn cn_rhs(ds: &DistinctSpace, u: &[f64], params: &SchemeParams) -> Vec<f64> {
    let half_eps = 0.5 * params.eps_ratio;
    let half_dt = 0.5 * params.dt;
    (0..ds.size)
        .map(|i| u[i] + half_eps * ds.lap(u, i) - half_dt * reaction(u[i]))
        .collect()
}

#[inline]
fn cn_f(ds: &DistinctSpace, v: &[f64], b: &[f64], params: &SchemeParams, i: usize) -> f64 {
    v[i] - 0.5 * params.eps_ratio * ds.lap(v, i) + 0.5 * params.dt * reaction(v[i]) - b[i]
}

/// One Crank–Nicolson step. Newton iteration with step halving (up to 20
/// halvings whenever a full step would increase the residual) on the distinct
/// unknowns; each linear system `J delta = -F` is solved matrix-free by
/// conjugate gradients to relative tolerance 1e-13 (the Jacobian
/// `J = I - (eps/2) L + (dt/2) diag(3 v^2 - 1)` is symmetric positive
/// definite for `dt < 2`, with `J >= (1 - dt/2) I`).
pub fn cn_step(
    field: &ScalarField,
    params: &SchemeParams,
    newton_tol: f64,
    max_iters: usize,
) -> Result<(ScalarField, CnReport), BaselineError> {
    let ds = DistinctSpace::new(*field.spec());
    let u = ds.pack(field.as_slice());
    let b = cn_rhs(&ds, &u, params);
    let mut v = u;
    let mut cg_total = 0usize;

    let residual = |v: &[f64]| -> (Vec<f64>, f64) {
        let mut f = vec![0.0; ds.size];
        let mut worst = 0.0f64;
        for i in 0..ds.size {
            f[i] = cn_f(&ds, v, &b, params, i);
            worst = worst.max(f[i].abs());
        }
        (f, worst)
    };

    let (mut f, mut res) = residual(&v);
    let mut iters = 0usize;
    while res > newton_tol {
        if iters >= max_iters || !res.is_finite() {
            return Err(BaselineError::NewtonDidNotConverge {
                iters,
                tol: newton_tol,
                residual: res,
            });
        }
        // J delta = -F
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let (delta, cg_iters) = cg_solve(&ds, &v, params, &rhs);
        cg_total += cg_iters;
        // damped update
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=20 {
            let trial: Vec<f64> = v.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            let (ft, rt) = residual(&trial);
            if rt < res || rt <= newton_tol {
                accepted = Some((trial, ft, rt));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, ft, rt)) => {
                v = trial;
                f = ft;
                res = rt;
            }
            None => {
                return Err(BaselineError::NewtonDidNotConverge {
                    iters,
                    tol: newton_tol,
                    residual: res,
                })
            }
        }
        iters += 1;
    }

    let out = ScalarField::from_data(*field.spec(), ds.unpack(&v))?;
    if let Some(node) = out.first_non_finite() {
        return Err(BaselineError::NonFinite { node });
    }
    Ok((
        out,
        CnReport {
            newton_iters: iters,
            final_residual: res,
            cg_iters_total: cg_total,
        },
    ))
}

/// Matrix-free CG for `J(v) x = rhs`; returns (solution, iterations).
fn cg_solve(ds: &DistinctSpace, v: &[f64], params: &SchemeParams, rhs: &[f64]) -> (Vec<f64>, usize) {
    let n = ds.size;
    let half_eps = 0.5 * params.eps_ratio;
    let half_dt = 0.5 * params.dt;
    let apply = |p: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let fprime = 3.0 * v[i] * v[i] - 1.0;
            out[i] = p[i] - half_eps * ds.lap(p, i) + half_dt * fprime * p[i];
        }
    };
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs = dot(&r, &r);
    let target = 1e-13 * rs.sqrt().max(1e-300);
    let max_cg = n.max(64);
    let mut k = 0;
    while rs.sqrt() > target && k < max_cg {
        apply(&p, &mut ap);
        let denom = dot(&p, &ap);
        if denom <= 0.0 {
            break; // numerically lost positive definiteness; return best iterate
        }
        let alpha = rs / denom;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
        k += 1;
    }
    (x, k)
}
