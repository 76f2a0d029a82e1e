//! Uniform grids on the unit square, nodal fields and discrete calculus.
//!
//! Nodes are stored row-major with `j` (the y index) outer and `i` (x) inner,
//! boundary ring included. Interior unknowns of the Dirichlet problems use the
//! same ordering restricted to `1 <= i, j <= n - 1`.

use crate::error::{HipError, Result};
use crate::par;
use crate::spectral;

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(HipError::GridTooSmall(n));
        }
        Ok(Self { n })
    }

    /// Cells per side.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Nodes per side, `n + 1`.
    #[inline]
    pub fn side(&self) -> usize {
        self.n + 1
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.side() * self.side()
    }

    #[inline]
    pub fn interior_side(&self) -> usize {
        self.n - 1
    }

    #[inline]
    pub fn interior_count(&self) -> usize {
        self.interior_side() * self.interior_side()
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.side(), k / self.side())
    }

    /// Interior unknown index of node `(i, j)`; caller guarantees it is interior.
    #[inline]
    pub fn interior_idx(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.interior_side() + (i - 1)
    }

    #[inline]
    pub fn interior_ij(&self, k: usize) -> (usize, usize) {
        let m = self.interior_side();
        (k % m + 1, k / m + 1)
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// Trapezoidal quadrature weight of node `(i, j)`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let h = self.h();
        let w = |i: usize| if i == 0 || i == self.n { 0.5 * h } else { h };
        w(i) * w(j)
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.node_count())
            .map(|k| {
                let (i, j) = self.ij(k);
                self.weight(i, j)
            })
            .collect()
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(HipError::GridMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(HipError::LengthMismatch { expected: grid.node_count(), actual: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            let (i, j) = grid.ij(k);
            return Err(HipError::NonFinite { i, j });
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness scan; used internally where the
    /// values come from finite arithmetic on finite inputs.
    pub(crate) fn from_vec(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_vec(grid, vec![0.0; grid.node_count()])
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self::from_vec(grid, vec![c; grid.node_count()])
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Self {
        let mut values = vec![0.0; grid.node_count()];
        par::fill_indexed(&mut values, |k| {
            let (i, j) = grid.ij(k);
            f(grid.coord(i), grid.coord(j))
        });
        Self::from_vec(grid, values)
    }

    /// Embeds interior values into a field that is zero on the boundary ring.
    pub fn from_interior(grid: Grid, interior: &[f64]) -> Self {
        debug_assert_eq!(interior.len(), grid.interior_count());
        let mut values = vec![0.0; grid.node_count()];
        let m = grid.interior_side();
        for j in 1..grid.n() {
            let src = &interior[(j - 1) * m..j * m];
            let start = grid.idx(1, j);
            values[start..start + m].copy_from_slice(src);
        }
        Self::from_vec(grid, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn interior(&self) -> Vec<f64> {
        let g = self.grid;
        let m = g.interior_side();
        let mut out = Vec::with_capacity(g.interior_count());
        for j in 1..g.n() {
            let start = g.idx(1, j);
            out.extend_from_slice(&self.values[start..start + m]);
        }
        out
    }

    /// Copy with the boundary ring set to zero.
    pub fn with_zero_boundary(&self) -> Self {
        Self::from_interior(self.grid, &self.interior())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Self {
        let mut values = vec![0.0; self.values.len()];
        par::fill_indexed(&mut values, |k| f(self.values[k]));
        Self::from_vec(self.grid, values)
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64 + Sync + Send) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let mut values = vec![0.0; self.values.len()];
        par::fill_indexed(&mut values, |k| f(self.values[k], other.values[k]));
        Ok(Self::from_vec(self.grid, values))
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute value on the boundary ring and where it occurs.
    pub fn boundary_max_abs(&self) -> (f64, usize, usize) {
        let g = self.grid;
        let mut best = (0.0, 0, 0);
        for j in 0..g.side() {
            for i in 0..g.side() {
                if g.is_boundary(i, j) {
                    let v = self.at(i, j).abs();
                    if v > best.0 {
                        best = (v, i, j);
                    }
                }
            }
        }
        best
    }

    pub fn check_zero_boundary(&self) -> Result<()> {
        let (v, i, j) = self.boundary_max_abs();
        if v > 0.0 {
            return Err(HipError::NonzeroBoundary { i, j, value: self.at(i, j) });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        for comp in [&x, &y] {
            if comp.len() != grid.node_count() {
                return Err(HipError::LengthMismatch { expected: grid.node_count(), actual: comp.len() });
            }
            if let Some(k) = comp.iter().position(|v| !v.is_finite()) {
                let (i, j) = grid.ij(k);
                return Err(HipError::NonFinite { i, j });
            }
        }
        Ok(Self { grid, x, y })
    }

    pub(crate) fn from_vecs(grid: Grid, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { grid, x, y }
    }

    pub fn constant(grid: Grid, a: f64, b: f64) -> Self {
        Self::from_vecs(grid, vec![a; grid.node_count()], vec![b; grid.node_count()])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let (x, y) = (0..grid.node_count())
            .map(|k| {
                let (i, j) = grid.ij(k);
                f(grid.coord(i), grid.coord(j))
            })
            .unzip();
        Self::from_vecs(grid, x, y)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> (f64, f64) {
        let k = self.grid.idx(i, j);
        (self.x[k], self.y[k])
    }

    /// Nodal Euclidean length.
    pub fn magnitude(&self) -> ScalarField {
        let mut values = vec![0.0; self.x.len()];
        par::fill_indexed(&mut values, |k| self.x[k].hypot(self.y[k]));
        ScalarField::from_vec(self.grid, values)
    }

    /// Nodal dot product with another vector field.
    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        self.grid.check_same(&other.grid)?;
        let mut values = vec![0.0; self.x.len()];
        par::fill_indexed(&mut values, |k| self.x[k] * other.x[k] + self.y[k] * other.y[k]);
        Ok(ScalarField::from_vec(self.grid, values))
    }

    /// Multiplies each node's vector by a scalar field.
    pub fn scale_by(&self, s: &ScalarField) -> Result<VectorField> {
        self.grid.check_same(&s.grid)?;
        let x = self.x.iter().zip(&s.values).map(|(a, c)| a * c).collect();
        let y = self.y.iter().zip(&s.values).map(|(a, c)| a * c).collect();
        Ok(Self::from_vecs(self.grid, x, y))
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.grid.check_same(&other.grid)?;
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a - b).collect();
        let y = self.y.iter().zip(&other.y).map(|(a, b)| a - b).collect();
        Ok(Self::from_vecs(self.grid, x, y))
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.grid.check_same(&other.grid)?;
        let x = self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect();
        let y = self.y.iter().zip(&other.y).map(|(a, b)| a + b).collect();
        Ok(Self::from_vecs(self.grid, x, y))
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// First derivative along one axis of a line of `n + 1` samples at node `i`:
/// central in the interior, second-order one-sided at the two ends.
#[inline]
fn diff1(get: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i == 0 {
        (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h)
    } else if i == n {
        (3.0 * get(n) - 4.0 * get(n - 1) + get(n - 2)) / (2.0 * h)
    } else {
        (get(i + 1) - get(i - 1)) / (2.0 * h)
    }
}

/// Second derivative along one axis: three-point centered in the interior,
/// four-point second-order one-sided at the ends.
#[inline]
fn diff2(get: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    let h2 = h * h;
    if i == 0 {
        (2.0 * get(0) - 5.0 * get(1) + 4.0 * get(2) - get(3)) / h2
    } else if i == n {
        (2.0 * get(n) - 5.0 * get(n - 1) + 4.0 * get(n - 2) - get(n - 3)) / h2
    } else {
        (get(i + 1) - 2.0 * get(i) + get(i - 1)) / h2
    }
}

fn d_dx(v: &[f64], g: Grid) -> Vec<f64> {
    let (n, h) = (g.n(), g.h());
    let mut out = vec![0.0; g.node_count()];
    par::fill_indexed(&mut out, |k| {
        let (i, j) = g.ij(k);
        diff1(|a| v[g.idx(a, j)], i, n, h)
    });
    out
}

fn d_dy(v: &[f64], g: Grid) -> Vec<f64> {
    let (n, h) = (g.n(), g.h());
    let mut out = vec![0.0; g.node_count()];
    par::fill_indexed(&mut out, |k| {
        let (i, j) = g.ij(k);
        diff1(|b| v[g.idx(i, b)], j, n, h)
    });
    out
}

/// Nodal gradient: central differences inside, second-order one-sided
/// stencils on the boundary ring.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid;
    VectorField::from_vecs(g, d_dx(&f.values, g), d_dy(&f.values, g))
}

/// Nodal divergence with the same stencils as [`gradient`]. For `f` and `v`
/// both vanishing on the boundary ring, `<grad f, v> = -<f, div v>` holds in
/// the trapezoidal inner products up to rounding.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let dx = d_dx(&v.x, g);
    let dy = d_dy(&v.y, g);
    ScalarField::from_vec(g, dx.iter().zip(&dy).map(|(a, b)| a + b).collect())
}

/// Euclidean transpose of [`gradient`] as a map from nodal vector fields to
/// nodal scalars: `sum_k grad(f)_k . v_k = sum_k f_k gradient_transpose(v)_k`.
pub fn gradient_transpose(v: &VectorField) -> ScalarField {
    let g = v.grid;
    let (n, h) = (g.n(), g.h());
    let weights = |i: usize| -> [(usize, f64); 3] {
        if i == 0 {
            [(0, -3.0 / (2.0 * h)), (1, 4.0 / (2.0 * h)), (2, -1.0 / (2.0 * h))]
        } else if i == n {
            [(n, 3.0 / (2.0 * h)), (n - 1, -4.0 / (2.0 * h)), (n - 2, 1.0 / (2.0 * h))]
        } else {
            [(i + 1, 1.0 / (2.0 * h)), (i - 1, -1.0 / (2.0 * h)), (i, 0.0)]
        }
    };
    let mut out = vec![0.0; g.node_count()];
    for j in 0..=n {
        for i in 0..=n {
            let k = g.idx(i, j);
            for (a, w) in weights(i) {
                out[g.idx(a, j)] += w * v.x[k];
            }
            for (b, w) in weights(j) {
                out[g.idx(i, b)] += w * v.y[k];
            }
        }
    }
    ScalarField::from_vec(g, out)
}

/// Trapezoidal L2 inner product on the unit square.
pub fn l2_inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.grid.check_same(&g.grid)?;
    let grid = f.grid;
    Ok(par::sum_indexed(grid.node_count(), |k| {
        let (i, j) = grid.ij(k);
        grid.weight(i, j) * f.values[k] * g.values[k]
    }))
}

pub fn l2_norm(f: &ScalarField) -> f64 {
    l2_inner(f, f).expect("same grid").sqrt()
}

/// Trapezoidal inner product of vector fields (sum over both components).
pub fn l2_inner_vec(a: &VectorField, b: &VectorField) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    let grid = a.grid;
    Ok(par::sum_indexed(grid.node_count(), |k| {
        let (i, j) = grid.ij(k);
        grid.weight(i, j) * (a.x[k] * b.x[k] + a.y[k] * b.y[k])
    }))
}

/// `(|f|^2 + |grad f|^2)^{1/2}` with the nodal gradient; valid for fields with
/// arbitrary boundary values.
pub fn h1_norm(f: &ScalarField) -> f64 {
    let grad = gradient(f);
    (l2_inner(f, f).expect("same grid") + l2_inner_vec(&grad, &grad).expect("same grid")).sqrt()
}

/// Spectral `H^s` norm on the Dirichlet sine scale,
/// `(sum_{k,l} (1 + pi^2 (k^2 + l^2))^s c_{kl}^2)^{1/2}` with `c_{kl}` the
/// coefficients of `f` in the L2-orthonormal basis `2 sin(k pi x) sin(l pi y)`.
pub fn sobolev_norm(f: &ScalarField, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(HipError::NegativeOrder(s));
    }
    f.check_zero_boundary()?;
    let coeffs = spectral::sine_coefficients(f);
    Ok(spectral::weighted_norm(&coeffs, f.grid.interior_side(), s))
}

/// Grid surrogate of the C2 norm: `max|f| + max|Df| + max|D^2 f|`, each maximum
/// taken over nodes and over derivative components.
pub fn c2_norm(f: &ScalarField) -> f64 {
    let g = f.grid;
    let (n, h) = (g.n(), g.h());
    let v = &f.values;
    let grad = gradient(f);
    let dxy = d_dy(&grad.x, g);
    let mut second = 0.0f64;
    for j in 0..g.side() {
        for i in 0..g.side() {
            let fxx = diff2(|a| v[g.idx(a, j)], i, n, h);
            let fyy = diff2(|b| v[g.idx(i, b)], j, n, h);
            second = second.max(fxx.abs()).max(fyy.abs()).max(dxy[g.idx(i, j)].abs());
        }
    }
    f.max_abs() + grad.max_abs() + second
}
