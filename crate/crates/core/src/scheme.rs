//! The production integrator: explicit in diffusion, trapezoidal in the
//! cubic reaction, solvable node-by-node in closed form.
//!
//! One step advances every node through
//!
//! ```text
//!   xi    = (1 - 2 d eps) phi_i - (dt/2) f(phi_i) + eps * neighbor_sum(i)
//!   theta + (dt/2) f(theta) = xi,          f(v) = v^3 - v,
//! ```
//!
//! and sets the new value to the unique real root `theta` of the cubic. The
//! stencil weight `eps` is tied to the physical interface parameter by
//! `eps = eps_interface^2 * dt / dx^2`; under the parameter window enforced by
//! [`derive_params`] (`0 < omega1 <= 1/(2d)`, `s > 1`, `dt <= 1 - 2 d eps`)
//! the map `phi^n -> phi^{n+1}` takes `[-1,1]` into itself and dissipates the
//! discrete free energy. Outside that window the same update can still be run
//! through the unchecked constructors; that mode exists to reproduce
//! instability experiments and disables the `xi`-range assertion.

use rayon::prelude::*;

use crate::grid::{neighbor_sum_raw, ScalarField};

/// `f(v) = v^3 - v`, the double-well reaction term.
#[inline(always)]
pub fn reaction(v: f64) -> f64 {
    (v * v - 1.0) * v
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemeError {
    #[error("omega1 must lie in (0, 1/(2d)] = (0, {bound}], got {omega1}")]
    Omega1OutOfRange { omega1: f64, bound: f64 },
    #[error("relaxation factor must exceed 1, got s = {s} (omega1 = {omega1}, eps = {eps_ratio})")]
    RelaxationTooSmall { s: f64, omega1: f64, eps_ratio: f64 },
    #[error("time step must satisfy 0 < dt <= 1 - 2 d eps = {bound}, got dt = {dt}")]
    TimeStepOutOfRange { dt: f64, bound: f64 },
    #[error("cubic solve needs 0 < dt < 2, got dt = {0}")]
    BadCubicTimeStep(f64),
    #[error("parameter {name} must be positive and finite, got {value}")]
    BadParameter { name: &'static str, value: f64 },
    #[error("|xi| = {xi} exceeds 1 at flat node {node}: the maximum-principle precondition is broken (use unchecked parameters to run anyway)")]
    XiOutOfRange { node: usize, xi: f64 },
    #[error("non-finite update at flat node {node}")]
    NonFinite { node: usize },
}

/// Fully derived parameter set for one scheme/grid/time-step combination.
///
/// `validated` records whether the stability window was checked at
/// construction; [`step`] asserts the `xi in [-1,1]` precondition only for
/// validated parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeParams {
    pub d: usize,
    pub dx: f64,
    pub dt: f64,
    /// Stencil weight `eps = omega1 / s = eps_interface^2 dt / dx^2`.
    pub eps_ratio: f64,
    /// Physical interface width parameter (the PDE carries its square).
    pub eps_interface: f64,
    pub omega1: f64,
    /// Relaxation factor `s = omega1 / eps_ratio`.
    pub s: f64,
    /// Lattice speed `c = dx / dt` (used by the kinetic formulation).
    pub c: f64,
    pub validated: bool,
}

/// The customary lattice weight for each dimension: `1/3`, `1/5`, `1/6`.
pub fn default_omega1(d: usize) -> f64 {
    match d {
        1 => 1.0 / 3.0,
        2 => 1.0 / 5.0,
        _ => 1.0 / 6.0,
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), SchemeError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(SchemeError::BadParameter { name, value })
    }
}

/// Derive the full parameter set from the physical inputs and validate the
/// stability window. On failure the error names the violated condition; the
/// `*_unchecked` constructors reproduce deliberate violations.
pub fn derive_params(
    d: usize,
    omega1: f64,
    eps_interface: f64,
    dx: f64,
    dt: f64,
) -> Result<SchemeParams, SchemeError> {
    let p = derive_params_unchecked(d, omega1, eps_interface, dx, dt)?;
    validate(p)
}

/// Same derivation, skipping the stability checks (`validated = false`).
pub fn derive_params_unchecked(
    d: usize,
    omega1: f64,
    eps_interface: f64,
    dx: f64,
    dt: f64,
) -> Result<SchemeParams, SchemeError> {
    check_positive("omega1", omega1)?;
    check_positive("eps_interface", eps_interface)?;
    check_positive("dx", dx)?;
    check_positive("dt", dt)?;
    let eps_ratio = eps_interface * eps_interface * dt / (dx * dx);
    Ok(SchemeParams {
        d,
        dx,
        dt,
        eps_ratio,
        eps_interface,
        omega1,
        s: omega1 / eps_ratio,
        c: dx / dt,
        validated: false,
    })
}

/// Build parameters directly from the stencil weight `eps_ratio` (the
/// dimensionless knob some experiments fix instead of `eps_interface`),
/// with validation.
pub fn params_from_eps_ratio(
    d: usize,
    omega1: f64,
    eps_ratio: f64,
    dx: f64,
    dt: f64,
) -> Result<SchemeParams, SchemeError> {
    let p = params_from_eps_ratio_unchecked(d, omega1, eps_ratio, dx, dt)?;
    validate(p)
}

/// Unchecked variant of [`params_from_eps_ratio`] (`validated = false`).
pub fn params_from_eps_ratio_unchecked(
    d: usize,
    omega1: f64,
    eps_ratio: f64,
    dx: f64,
    dt: f64,
) -> Result<SchemeParams, SchemeError> {
    check_positive("omega1", omega1)?;
    check_positive("eps_ratio", eps_ratio)?;
    check_positive("dx", dx)?;
    check_positive("dt", dt)?;
    Ok(SchemeParams {
        d,
        dx,
        dt,
        eps_ratio,
        eps_interface: (eps_ratio * dx * dx / dt).sqrt(),
        omega1,
        s: omega1 / eps_ratio,
        c: dx / dt,
        validated: false,
    })
}

fn validate(mut p: SchemeParams) -> Result<SchemeParams, SchemeError> {
    let bound = 1.0 / (2.0 * p.d as f64);
    if !(p.omega1 > 0.0 && p.omega1 <= bound) {
        return Err(SchemeError::Omega1OutOfRange {
            omega1: p.omega1,
            bound,
        });
    }
    if !(p.s > 1.0) {
        return Err(SchemeError::RelaxationTooSmall {
            s: p.s,
            omega1: p.omega1,
            eps_ratio: p.eps_ratio,
        });
    }
    let dt_bound = 1.0 - 2.0 * p.d as f64 * p.eps_ratio;
    if !(p.dt > 0.0 && p.dt <= dt_bound) {
        return Err(SchemeError::TimeStepOutOfRange {
            dt: p.dt,
            bound: dt_bound,
        });
    }
    p.validated = true;
    Ok(p)
}

/// The explicit part of the update at one node.
pub fn xi_at_node(field: &ScalarField, flat: usize, params: &SchemeParams) -> f64 {
    let u = field.as_slice()[flat];
    let nsum = crate::grid::neighbor_sum(field, flat);
    xi_value(u, nsum, params)
}

#[inline(always)]
fn xi_value(u: f64, nsum: f64, p: &SchemeParams) -> f64 {
    (1.0 - 2.0 * p.d as f64 * p.eps_ratio) * u - 0.5 * p.dt * reaction(u) + p.eps_ratio * nsum
}

/// Solve `theta + (dt/2)(theta^3 - theta) = xi` for the unique real root.
///
/// Rearranged to depressed form `theta^3 + 3 dbar theta = 2 zeta` with
/// `zeta = xi/dt` and `dbar = (dt - 2)/(3 dt) < 0`, so the discriminant
/// `zeta^2 - dbar^3` is strictly positive and Cardano's formula applies with
/// real arithmetic. The two cube-root terms are combined sign-matched to
/// avoid cancellation, then polished with one Newton step (the residual
/// derivative `1 + (dt/2)(3 theta^2 - 1) >= 1 - dt/2` never vanishes).
pub fn solve_cubic(xi: f64, dt: f64) -> Result<f64, SchemeError> {
    if !(dt > 0.0 && dt < 2.0) {
        return Err(SchemeError::BadCubicTimeStep(dt));
    }
    let dbar = (dt - 2.0) / (3.0 * dt);
    let (theta, _) = cubic_root_raw(xi, dt, dbar);
    Ok(theta)
}

/// Returns the root and whether the bisection fallback had to run.
#[inline]
pub(crate) fn cubic_root_raw(xi: f64, dt: f64, dbar: f64) -> (f64, bool) {
    let zeta = xi / dt;
    let rad = (zeta * zeta - dbar * dbar * dbar).sqrt();
    // Cardano: theta0 = cbrt(zeta + rad) + cbrt(zeta - rad). Pick the
    // cancellation-free term for the cube root and recover the other from
    // the product cbrt(A)*cbrt(B) = dbar.
    let theta0 = if zeta >= 0.0 {
        let a = (zeta + rad).cbrt();
        a + dbar / a
    } else {
        let b = (zeta - rad).cbrt();
        dbar / b + b
    };
    // One Newton polish of p(theta) = theta + (dt/2)(theta^3 - theta) - xi.
    let half_dt = 0.5 * dt;
    let p0 = theta0 + half_dt * (theta0 * theta0 * theta0 - theta0) - xi;
    let dp0 = 1.0 + half_dt * (3.0 * theta0 * theta0 - 1.0);
    let theta = theta0 - p0 / dp0;
    let p = theta + half_dt * (theta * theta * theta - theta) - xi;
    if p.abs() <= 1e-12 * xi.abs().max(1.0) {
        return (theta, false);
    }
    // Safeguarded bisection; p is strictly increasing, so any bracket with a
    // sign change pins the root. In practice this path never runs for finite
    // inputs — it is insurance against pathological rounding.
    let scale = (2.0 * xi.abs() / dt).cbrt().max(1.0) + 1.0;
    let (mut lo, mut hi) = (-scale, scale);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let pm = mid + half_dt * (mid * mid * mid - mid) - xi;
        if pm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * scale {
            break;
        }
    }
    (0.5 * (lo + hi), true)
}

/// Per-step census returned alongside the new field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    /// Max norm of the updated field.
    pub max_abs: f64,
    /// Smallest and largest `xi` encountered this step.
    pub xi_range: (f64, f64),
    /// Nodes where the closed form needed the bisection safeguard.
    pub newton_fallback_count: usize,
}

/// Advance the field by one time step.
///
/// Embarrassingly parallel over nodes; the result is bit-identical to serial
/// execution for any thread count. For validated parameters the step fails
/// with [`SchemeError::XiOutOfRange`] if some `|xi|` exceeds `1 + 1e-12`
/// (a broken precondition is reported, never clamped away).
pub fn step(field: &ScalarField, params: &SchemeParams) -> Result<(ScalarField, StepReport), SchemeError> {
    if !(params.dt > 0.0 && params.dt < 2.0) {
        return Err(SchemeError::BadCubicTimeStep(params.dt));
    }
    let spec = *field.spec();
    let u = field.as_slice();
    let dbar = (params.dt - 2.0) / (3.0 * params.dt);

    struct NodeOut {
        theta: f64,
        xi: f64,
        fallback: bool,
    }

    let outs: Vec<NodeOut> = (0..u.len())
        .into_par_iter()
        .map(|flat| {
            let nsum = neighbor_sum_raw(u, &spec, flat);
            let xi = xi_value(u[flat], nsum, params);
            let (theta, fallback) = cubic_root_raw(xi, params.dt, dbar);
            NodeOut { theta, xi, fallback }
        })
        .collect();

    let mut report = StepReport {
        max_abs: 0.0,
        xi_range: (f64::INFINITY, f64::NEG_INFINITY),
        newton_fallback_count: 0,
    };
    let mut data = Vec::with_capacity(outs.len());
    for (flat, out) in outs.iter().enumerate() {
        if params.validated && out.xi.abs() > 1.0 + 1e-12 {
            return Err(SchemeError::XiOutOfRange {
                node: flat,
                xi: out.xi,
            });
        }
        if !out.theta.is_finite() {
            return Err(SchemeError::NonFinite { node: flat });
        }
        report.max_abs = report.max_abs.max(out.theta.abs());
        report.xi_range.0 = report.xi_range.0.min(out.xi);
        report.xi_range.1 = report.xi_range.1.max(out.xi);
        report.newton_fallback_count += out.fallback as usize;
        data.push(out.theta);
    }
    let next = ScalarField::from_data(spec, data).expect("same grid");
    Ok((next, report))
}
