//! Uniform Cartesian grids and the matrix-free central-difference stencil.
//!
//! A grid covers the cube `[origin, origin + X]^d` with axis spacing
//! `dx = X / n`. The set of *stored* nodes depends on the boundary condition:
//!
//! * homogeneous Neumann: `n + 2` nodes per axis at cell centers
//!   `origin + dx*(i - 1/2)`, `i = 0..n+1`; the layer half a spacing outside
//!   each face makes the zero-flux mirror closure exact,
//! * homogeneous Dirichlet: `n - 1` interior nodes `origin + dx*i` for
//!   `i = 1..n-1`; boundary values are pinned to zero and not stored
//!   (stored index `j` is full-grid node `j + 1`),
//! * periodic: `n + 1` nodes `origin + dx*i`, `i = 0..n`; the node at
//!   `origin + X` is a stored duplicate of the one at `origin`, and the
//!   stencil closes circulantly over the `n` distinct ring nodes (the
//!   duplicate reads the same neighbors as node 0 and is never read itself).
//!
//! Fields are flat `Vec<f64>` in row-major order with the last axis fastest.
//! All stencil operations are matrix-free; [`explicit_matrix`] assembles the
//! dense operator only for small diagnostic grids.

use std::fmt;

use rayon::prelude::*;

/// Boundary condition attached to every face of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// Zero normal derivative, closed by mirroring across each face.
    HomogeneousNeumann,
    /// Zero value on each face; boundary nodes are eliminated.
    HomogeneousDirichlet,
    /// Identification of opposite faces.
    Periodic,
}

impl BoundaryCondition {
    /// Short tag used in configs and output file headers.
    pub fn tag(self) -> &'static str {
        match self {
            BoundaryCondition::HomogeneousNeumann => "neumann",
            BoundaryCondition::HomogeneousDirichlet => "dirichlet",
            BoundaryCondition::Periodic => "periodic",
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("axis must be split into at least {min} cells for {bc} conditions, got n = {n}")]
    TooFewCells {
        min: usize,
        bc: BoundaryCondition,
        n: usize,
    },
    #[error("domain edge length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("field has {got} entries, grid stores {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value at flat node {0}")]
    NonFinite(usize),
}

/// Geometry of a uniform grid: dimension, resolution, extent and closure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    d: usize,
    n: usize,
    x_len: f64,
    origin: [f64; 3],
    bc: BoundaryCondition,
}

impl GridSpec {
    /// Build a grid over `[origin_j, origin_j + x_len]^d` split into `n`
    /// cells per axis. `origin` entries beyond `d` are ignored.
    pub fn new(
        d: usize,
        n: usize,
        x_len: f64,
        origin: [f64; 3],
        bc: BoundaryCondition,
    ) -> Result<Self, GridError> {
        if !(1..=3).contains(&d) {
            return Err(GridError::BadDimension(d));
        }
        if !(x_len.is_finite() && x_len > 0.0) {
            return Err(GridError::BadLength(x_len));
        }
        // Dirichlet needs at least one interior node, periodic at least two
        // distinct nodes for the circulant closure to make sense.
        let min = match bc {
            BoundaryCondition::HomogeneousNeumann => 1,
            BoundaryCondition::HomogeneousDirichlet => 2,
            BoundaryCondition::Periodic => 2,
        };
        if n < min {
            return Err(GridError::TooFewCells { min, bc, n });
        }
        let mut org = [0.0; 3];
        org[..d].copy_from_slice(&origin[..d]);
        Ok(GridSpec {
            d,
            n,
            x_len,
            origin: org,
            bc,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    /// Number of cells per axis (the resolution parameter `n`).
    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn edge_length(&self) -> f64 {
        self.x_len
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn dx(&self) -> f64 {
        self.x_len / self.n as f64
    }

    /// Stored nodes per axis; depends on the boundary closure (see module doc).
    pub fn nodes_per_axis(&self) -> usize {
        match self.bc {
            BoundaryCondition::HomogeneousNeumann => self.n + 2,
            BoundaryCondition::HomogeneousDirichlet => self.n - 1,
            BoundaryCondition::Periodic => self.n + 1,
        }
    }

    /// Total number of stored nodes, `nodes_per_axis()^d`.
    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.d as u32)
    }

    /// Flat index of a multi-index (row-major, last axis fastest).
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.d);
        let m = self.nodes_per_axis();
        let mut flat = 0;
        for &i in idx {
            debug_assert!(i < m);
            flat = flat * m + i;
        }
        flat
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let m = self.nodes_per_axis();
        let mut idx = [0usize; 3];
        for axis in (0..self.d).rev() {
            idx[axis] = flat % m;
            flat /= m;
        }
        debug_assert_eq!(flat, 0);
        idx
    }

    /// Physical coordinate of stored node `i` along `axis`.
    pub fn axis_coordinate(&self, axis: usize, i: usize) -> f64 {
        let dx = self.dx();
        self.origin[axis]
            + match self.bc {
                // Cell centers, one ghost layer outside each face.
                BoundaryCondition::HomogeneousNeumann => dx * (i as f64 - 0.5),
                // Stored index j is full-grid node j + 1.
                BoundaryCondition::HomogeneousDirichlet => dx * (i as f64 + 1.0),
                BoundaryCondition::Periodic => dx * i as f64,
            }
    }

    /// Physical coordinates of a stored node (unused axes are 0).
    pub fn node_coordinates(&self, idx: &[usize]) -> [f64; 3] {
        debug_assert_eq!(idx.len(), self.d);
        let mut x = [0.0; 3];
        for (axis, &i) in idx.iter().enumerate() {
            x[axis] = self.axis_coordinate(axis, i);
        }
        x
    }
}

/// A scalar field stored on a [`GridSpec`] as a flat row-major vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.node_count();
        ScalarField {
            spec,
            data: vec![0.0; n],
        }
    }

    pub fn from_data(spec: GridSpec, data: Vec<f64>) -> Result<Self, GridError> {
        if data.len() != spec.node_count() {
            return Err(GridError::LengthMismatch {
                got: data.len(),
                want: spec.node_count(),
            });
        }
        Ok(ScalarField { spec, data })
    }

    /// Fill from a function of the node coordinates.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let d = spec.dimension();
        let data: Vec<f64> = (0..spec.node_count())
            .into_par_iter()
            .map(|flat| {
                let idx = spec.multi_index(flat);
                let x = spec.node_coordinates(&idx[..d]);
                f(&x[..d])
            })
            .collect();
        ScalarField { spec, data }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Discrete max norm.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Flat index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }
}

/// Resolve the flat index of the minus/plus neighbor along `axis`, or `None`
/// when the neighbor falls outside the stored range (the caller substitutes
/// the boundary closure). `stride` is `nodes_per_axis^(d-1-axis)`.
///
/// Periodic axes identify stored node `n` with node `0` and resolve all
/// neighbors on the canonical ring `0..n`: the minus neighbor of nodes `0`
/// and `n` is node `n-1`, the plus neighbor of nodes `n-1` and `n` is node
/// `1` resp. `0`. (Wrapping over all n+1 stored nodes instead would model a
/// ring of circumference `X + dx` — an O(dx) geometry error.)
#[inline]
fn neighbor_flat(i: usize, m: usize, flat: usize, stride: usize, bc: BoundaryCondition) -> (Option<usize>, Option<usize>) {
    match bc {
        BoundaryCondition::Periodic => {
            let n = m - 1; // distinct ring nodes
            let r = if i == n { 0 } else { i };
            let jm = if r == 0 { n - 1 } else { r - 1 };
            let jp = if r == n - 1 { 0 } else { r + 1 };
            let base = flat - i * stride;
            (Some(base + jm * stride), Some(base + jp * stride))
        }
        _ => {
            let minus = if i == 0 { None } else { Some(flat - stride) };
            let plus = if i == m - 1 { None } else { Some(flat + stride) };
            (minus, plus)
        }
    }
}

/// Sum of the 2d stencil neighbors of one node under the grid's boundary
/// closure: mirrored values (the node itself) for Neumann, zero extension for
/// Dirichlet, wrap-around for periodic. Accumulation order is fixed per axis
/// (minus then plus, axis 0 first) so results are bit-reproducible.
#[inline]
pub fn neighbor_sum(field: &ScalarField, flat: usize) -> f64 {
    let spec = field.spec();
    let u = field.as_slice();
    neighbor_sum_raw(u, spec, flat)
}

#[inline]
pub(crate) fn neighbor_sum_raw(u: &[f64], spec: &GridSpec, flat: usize) -> f64 {
    let d = spec.dimension();
    let m = spec.nodes_per_axis();
    let bc = spec.boundary_condition();
    let here = u[flat];
    let mut acc = 0.0;
    let mut stride = m.pow(d as u32 - 1);
    let mut rest = flat;
    for _axis in 0..d {
        let i = rest / stride;
        rest %= stride;
        let (minus, plus) = neighbor_flat(i, m, flat, stride, bc);
        acc += match minus {
            Some(j) => u[j],
            None => match bc {
                BoundaryCondition::HomogeneousNeumann => here,
                BoundaryCondition::HomogeneousDirichlet => 0.0,
                BoundaryCondition::Periodic => unreachable!(),
            },
        };
        acc += match plus {
            Some(j) => u[j],
            None => match bc {
                BoundaryCondition::HomogeneousNeumann => here,
                BoundaryCondition::HomogeneousDirichlet => 0.0,
                BoundaryCondition::Periodic => unreachable!(),
            },
        };
        stride = if stride == 1 { 1 } else { stride / m };
    }
    acc
}

/// BC-resolved values of the two neighbors of `flat` along `axis` (minus,
/// plus): mirror (the node's own value) for Neumann faces, zero for Dirichlet
/// faces, canonical ring wrap for periodic axes.
#[inline]
pub fn axis_neighbor_values(field: &ScalarField, flat: usize, axis: usize) -> (f64, f64) {
    axis_neighbor_values_raw(field.as_slice(), field.spec(), flat, axis)
}

#[inline]
pub(crate) fn axis_neighbor_values_raw(u: &[f64], spec: &GridSpec, flat: usize, axis: usize) -> (f64, f64) {
    let d = spec.dimension();
    let m = spec.nodes_per_axis();
    let bc = spec.boundary_condition();
    let stride = m.pow((d - 1 - axis) as u32);
    let i = flat / stride % m;
    let (minus, plus) = neighbor_flat(i, m, flat, stride, bc);
    let fallback = |side: Option<usize>| match side {
        Some(j) => u[j],
        None => match bc {
            BoundaryCondition::HomogeneousNeumann => u[flat],
            BoundaryCondition::HomogeneousDirichlet => 0.0,
            BoundaryCondition::Periodic => unreachable!(),
        },
    };
    (fallback(minus), fallback(plus))
}

/// Apply the dimensionless central-difference operator
/// `(L u)_i = sum_of_neighbors(i) - 2 d u_i`
/// (the discrete Laplacian times `dx^2`) over the whole field.
pub fn apply_stencil(field: &ScalarField) -> ScalarField {
    let spec = *field.spec();
    let u = field.as_slice();
    let two_d = 2.0 * spec.dimension() as f64;
    let data: Vec<f64> = (0..u.len())
        .into_par_iter()
        .map(|flat| neighbor_sum_raw(u, &spec, flat) - two_d * u[flat])
        .collect();
    ScalarField { spec, data }
}

/// Dense assembly of the stencil operator of [`apply_stencil`], for
/// diagnostics on small grids. Row `r`, column `c` hold the coefficient of
/// node `c` in `(L u)_r`. Intended for `node_count() <= 4096`.
pub fn explicit_matrix(spec: &GridSpec) -> nalgebra::DMatrix<f64> {
    let n = spec.node_count();
    let d = spec.dimension();
    let m = spec.nodes_per_axis();
    let bc = spec.boundary_condition();
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    for flat in 0..n {
        a[(flat, flat)] -= 2.0 * d as f64;
        let mut stride = m.pow(d as u32 - 1);
        let mut rest = flat;
        for _axis in 0..d {
            let i = rest / stride;
            rest %= stride;
            let (minus, plus) = neighbor_flat(i, m, flat, stride, bc);
            for nb in [minus, plus] {
                match nb {
                    Some(j) => a[(flat, j)] += 1.0,
                    None => {
                        if bc == BoundaryCondition::HomogeneousNeumann {
                            // mirror closure: the missing neighbor is the node itself
                            a[(flat, flat)] += 1.0;
                        }
                        // Dirichlet: zero extension contributes nothing
                    }
                }
            }
            stride = if stride == 1 { 1 } else { stride / m };
        }
    }
    a
}
