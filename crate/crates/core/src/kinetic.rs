//! Mesoscopic DdQ(2d+1) regularized lattice-Boltzmann formulation.
//!
//! This is the derivation-level ancestor of [`crate::scheme`]: one kinetic
//! step streams per-velocity distributions
//!
//! ```text
//!   f_k(x, t+dt) - (dt/2) F_k(x, t+dt)
//!       = f_k^eq(x - c_k dt, t)
//!       + s_A * w_k c_k . Pi_ne(x - c_k dt, t)
//!       + (dt/2) F_k(x, t)
//! ```
//!
//! with `f_k^eq = w_k phi`, source `F_k = -w_k f(phi)`, regularized
//! non-equilibrium flux `Pi_ne = -dt c_s^2 grad(phi) / s`, `s_A = (1-s)/c_s^2`
//! and `c_s^2 = 2 w_1 c^2`. Summing the right-hand side over `k` collapses
//! algebraically to the macroscopic `xi`, so the zeroth moment of a kinetic
//! step reproduces [`crate::scheme::step`] to rounding accuracy — the test
//! suite leans on that as an independent oracle for the production scheme.
//!
//! Off-grid pulls (`x - c_k dt` outside the stored nodes) are resolved with
//! the same mirror / zero-extension / wrap-around rules as the grid stencil;
//! anything else would break the moment equivalence.

use rayon::prelude::*;

use crate::grid::{GridSpec, ScalarField};
use crate::scheme::{cubic_root_raw, reaction, SchemeError, SchemeParams};

/// Maximum number of lattice velocities (d = 3 gives 2d+1 = 7).
pub const MAX_Q: usize = 7;

/// The DdQ(2d+1) velocity set and weights.
///
/// Velocity ordering: `c_0 = 0`; `c_k = +c e_k` for `k = 1..d`;
/// `c_{k+d} = -c e_k`. Weights: `w_0 = 1 - 2 d w1`, all others `w1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeModel {
    pub d: usize,
    /// Lattice speed `c = dx/dt`.
    pub c: f64,
    pub omega1: f64,
}

impl LatticeModel {
    pub fn new(d: usize, c: f64, omega1: f64) -> Self {
        LatticeModel { d, c, omega1 }
    }

    pub fn from_params(p: &SchemeParams) -> Self {
        LatticeModel {
            d: p.d,
            c: p.c,
            omega1: p.omega1,
        }
    }

    /// Number of discrete velocities, `2d + 1`.
    pub fn q(&self) -> usize {
        2 * self.d + 1
    }

    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 {
            1.0 - 2.0 * self.d as f64 * self.omega1
        } else {
            self.omega1
        }
    }

    /// Velocity vector of population `k` (unused components 0).
    pub fn velocity(&self, k: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        if k == 0 {
            return v;
        }
        if k <= self.d {
            v[k - 1] = self.c;
        } else {
            v[k - 1 - self.d] = -self.c;
        }
        v
    }

    /// Lattice sound speed squared, `c_s^2 = 2 w1 c^2`.
    pub fn cs2(&self) -> f64 {
        2.0 * self.omega1 * self.c * self.c
    }
}

/// Equilibrium distribution `f_k^eq = w_k phi`, returned in a fixed-size
/// buffer; entries past `model.q()` are zero.
pub fn equilibrium(phi: f64, model: &LatticeModel) -> [f64; MAX_Q] {
    let mut f = [0.0; MAX_Q];
    for (k, fk) in f.iter_mut().enumerate().take(model.q()) {
        *fk = model.weight(k) * phi;
    }
    f
}

/// Velocity-direction-matched first-order difference of the field.
///
/// `Plus` is the forward difference anchored at the plus-neighbor
/// (`(phi(i+1) - phi(i)) / dx`), `Minus` the backward difference anchored at
/// the minus-neighbor (`(phi(i) - phi(i-1)) / dx`); out-of-range neighbors
/// follow the grid's boundary closure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PullDirection {
    Plus,
    Minus,
}

pub fn gradient_upwind(field: &ScalarField, flat: usize, axis: usize, dir: PullDirection) -> f64 {
    let spec = field.spec();
    let u = field.as_slice();
    let here = u[flat];
    let (minus, plus) = axis_neighbors(u, spec, flat, axis);
    match dir {
        PullDirection::Plus => (plus - here) / spec.dx(),
        PullDirection::Minus => (here - minus) / spec.dx(),
    }
}

use crate::grid::axis_neighbor_values_raw as axis_neighbors;

/// Per-node distributions stored node-major: `data[node * q + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField {
    spec: GridSpec,
    q: usize,
    data: Vec<f64>,
}

impl DistributionField {
    /// Initialize every node at equilibrium of the given macroscopic field.
    pub fn at_equilibrium(field: &ScalarField, model: &LatticeModel) -> Self {
        let spec = *field.spec();
        let q = model.q();
        let mut data = Vec::with_capacity(field.len() * q);
        for &phi in field.as_slice() {
            let feq = equilibrium(phi, model);
            data.extend_from_slice(&feq[..q]);
        }
        DistributionField { spec, q, data }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Distributions at one node.
    pub fn node(&self, flat: usize) -> &[f64] {
        &self.data[flat * self.q..(flat + 1) * self.q]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Zeroth moment `phi_i = sum_k f_k(i)` as a scalar field.
pub fn moment_phi(dist: &DistributionField) -> ScalarField {
    let q = dist.q;
    let data: Vec<f64> = dist
        .data
        .chunks_exact(q)
        .map(|fk| fk.iter().sum())
        .collect();
    ScalarField::from_data(dist.spec, data).expect("moment length")
}

/// One regularized lattice-Boltzmann step (streaming + trapezoidal source),
/// resolving the implicit node relation with the same closed-form cubic as
/// the macroscopic scheme.
pub fn kinetic_step(
    dist: &DistributionField,
    params: &SchemeParams,
    model: &LatticeModel,
) -> Result<DistributionField, SchemeError> {
    debug_assert_eq!(model.d, params.d);
    debug_assert_eq!(model.omega1, params.omega1);
    if !(params.dt > 0.0 && params.dt < 2.0) {
        return Err(SchemeError::BadCubicTimeStep(params.dt));
    }
    let phi = moment_phi(dist);
    let spec = dist.spec;
    let u = phi.as_slice();
    let d = params.d;
    let q = dist.q;
    let dt = params.dt;
    let dbar = (dt - 2.0) / (3.0 * dt);
    let w0 = 1.0 - 2.0 * d as f64 * params.omega1;
    let w1 = params.omega1;
    // Streamed non-equilibrium weight: s_A w_k c_k . Pi_ne collapses to
    // w1 (s-1)/s times the direction-matched one-node difference of phi.
    let reg = w1 * (params.s - 1.0) / params.s;

    let results: Vec<([f64; MAX_Q], f64, bool)> = (0..u.len())
        .into_par_iter()
        .map(|flat| {
            let here = u[flat];
            let source = -0.5 * dt * reaction(here);
            let mut rhs = [0.0; MAX_Q];
            rhs[0] = w0 * here + w0 * source;
            for axis in 0..d {
                let (minus, plus) = axis_neighbors(u, &spec, flat, axis);
                // k = 1..d pulls from the minus neighbor (velocity +c e_axis)
                rhs[1 + axis] = w1 * minus + reg * (here - minus) + w1 * source;
                // k = d+1..2d pulls from the plus neighbor (velocity -c e_axis)
                rhs[1 + axis + d] = w1 * plus + reg * (here - plus) + w1 * source;
            }
            // fixed-order sum k = 0..2d reproduces the macroscopic xi
            let mut xi = 0.0;
            for &r in rhs.iter().take(q) {
                xi += r;
            }
            let (theta, fallback) = cubic_root_raw(xi, dt, dbar);
            (rhs, theta, fallback)
        })
        .collect();

    let mut data = Vec::with_capacity(dist.data.len());
    for (flat, (rhs, theta, _)) in results.iter().enumerate() {
        if !theta.is_finite() {
            return Err(SchemeError::NonFinite { node: flat });
        }
        let new_source = -0.5 * dt * reaction(*theta);
        data.push(rhs[0] + w0 * new_source);
        for &r in rhs.iter().take(q).skip(1) {
            data.push(r + w1 * new_source);
        }
    }
    Ok(DistributionField { spec, q, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BoundaryCondition, GridSpec};
    use crate::scheme::derive_params;

    fn model(d: usize) -> LatticeModel {
        LatticeModel::new(d, 32.0, crate::scheme::default_omega1(d))
    }

    #[test]
    fn weight_and_velocity_moment_identities() {
        for d in 1..=3 {
            let m = model(d);
            let q = m.q();
            let wsum: f64 = (0..q).map(|k| m.weight(k)).sum();
            assert!((wsum - 1.0).abs() <= f64::EPSILON);
            for axis in 0..d {
                let c1: f64 = (0..q).map(|k| m.weight(k) * m.velocity(k)[axis]).sum();
                assert_eq!(c1, 0.0);
                for axis2 in 0..d {
                    let c2: f64 = (0..q)
                        .map(|k| m.weight(k) * m.velocity(k)[axis] * m.velocity(k)[axis2])
                        .sum();
                    let want = if axis == axis2 { m.cs2() } else { 0.0 };
                    assert!((c2 - want).abs() <= 4.0 * f64::EPSILON * m.cs2());
                }
            }
        }
    }

    #[test]
    fn equilibrium_matches_weights() {
        let m = model(1);
        assert_eq!(equilibrium(0.0, &m), [0.0; MAX_Q]);
        let f = equilibrium(1.0, &m);
        for k in 0..3 {
            assert!((f[k] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(&f[3..], &[0.0; 4]);
        // zeroth moment recovers phi for an arbitrary value
        let f = equilibrium(-0.37, &model(2));
        let phi: f64 = f.iter().sum();
        assert!((phi + 0.37).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn directional_gradients_on_a_periodic_sawtooth() {
        // ring values [0, 1, 2, 3] with dx = 1 (stored node 4 duplicates ring
        // node 0): interior one-sided slopes are 1, and the ring closure makes
        // the slope across the wrap -(n-1) = -3.
        let g = GridSpec::new(1, 4, 4.0, [0.0; 3], BoundaryCondition::Periodic).unwrap();
        let u = ScalarField::from_data(g, vec![0.0, 1.0, 2.0, 3.0, 0.0]).unwrap();
        assert_eq!(gradient_upwind(&u, 0, 0, PullDirection::Plus), 1.0);
        assert_eq!(gradient_upwind(&u, 2, 0, PullDirection::Plus), 1.0);
        assert_eq!(gradient_upwind(&u, 2, 0, PullDirection::Minus), 1.0);
        // wrap: plus neighbor of ring node 3 is ring node 0
        assert_eq!(gradient_upwind(&u, 3, 0, PullDirection::Plus), -3.0);
        // wrap: minus neighbor of ring node 0 is ring node 3
        assert_eq!(gradient_upwind(&u, 0, 0, PullDirection::Minus), -3.0);
        // the stored duplicate sees exactly what ring node 0 sees
        assert_eq!(
            gradient_upwind(&u, 4, 0, PullDirection::Plus),
            gradient_upwind(&u, 0, 0, PullDirection::Plus)
        );
        assert_eq!(
            gradient_upwind(&u, 4, 0, PullDirection::Minus),
            gradient_upwind(&u, 0, 0, PullDirection::Minus)
        );
    }

    #[test]
    fn neumann_mirror_zeroes_the_face_gradient() {
        let g = GridSpec::new(1, 4, 4.0, [0.0; 3], BoundaryCondition::HomogeneousNeumann).unwrap();
        let u = ScalarField::from_data(g, (0..6).map(|i| i as f64).collect()).unwrap();
        assert_eq!(gradient_upwind(&u, 0, 0, PullDirection::Minus), 0.0);
        assert_eq!(gradient_upwind(&u, 5, 0, PullDirection::Plus), 0.0);
        assert_eq!(gradient_upwind(&u, 2, 0, PullDirection::Plus), 1.0);
    }

    #[test]
    fn uniform_well_state_is_a_kinetic_fixed_point() {
        let p = derive_params(2, 0.2, 0.05, 1.0 / 8.0, 1e-2).unwrap();
        let m = LatticeModel::from_params(&p);
        let g = GridSpec::new(2, 8, 1.0, [0.0; 3], BoundaryCondition::Periodic).unwrap();
        for v in [1.0, 0.0, -1.0] {
            let u = ScalarField::from_data(g, vec![v; g.node_count()]).unwrap();
            let dist = DistributionField::at_equilibrium(&u, &m);
            let next = kinetic_step(&dist, &p, &m).unwrap();
            for (a, b) in dist.as_slice().iter().zip(next.as_slice()) {
                assert_eq!(a, b, "phi = {v}");
            }
        }
    }

    #[test]
    fn moment_of_equilibrium_returns_the_field() {
        let g = GridSpec::new(2, 5, 1.0, [0.0; 3], BoundaryCondition::HomogeneousNeumann).unwrap();
        let u = ScalarField::from_fn(g, |x| (7.0 * x[0] - 3.0 * x[1]).sin() * 0.8);
        let m = model(2);
        let back = moment_phi(&DistributionField::at_equilibrium(&u, &m));
        for (a, b) in u.as_slice().iter().zip(back.as_slice()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn kinetic_moment_tracks_macroscopic_step() {
        for bc in [
            BoundaryCondition::HomogeneousNeumann,
            BoundaryCondition::HomogeneousDirichlet,
            BoundaryCondition::Periodic,
        ] {
            let p = derive_params(1, 1.0 / 3.0, 0.04, 1.0 / 16.0, 5e-3).unwrap();
            let m = LatticeModel::from_params(&p);
            let g = GridSpec::new(1, 16, 1.0, [0.0; 3], bc).unwrap();
            let u0 = ScalarField::from_fn(g, |x| 0.9 * (11.0 * x[0]).sin());
            let mut dist = DistributionField::at_equilibrium(&u0, &m);
            let mut mac = u0;
            for step_no in 0..10 {
                dist = kinetic_step(&dist, &p, &m).unwrap();
                let (next, _) = crate::scheme::step(&mac, &p).unwrap();
                mac = next;
                let kin = moment_phi(&dist);
                let mut gap: f64 = 0.0;
                for (a, b) in kin.as_slice().iter().zip(mac.as_slice()) {
                    gap = gap.max((a - b).abs());
                }
                assert!(gap <= 1e-13, "{bc} step {step_no}: gap {gap:.2e}");
            }
        }
    }
}
