//! Dirichlet problems for `div(sigma grad u)` in flux form.
//!
//! The discrete operator at an interior node is
//! `(1/h^2) sum_e sigma_e (u_nbr - u)` over the four incident edges, with the
//! interface value `sigma_e` the arithmetic mean of the two end nodes. The
//! interior block `A = -Delta_sigma` is symmetric positive definite; boundary
//! values enter through a lift on the right-hand side.

use crate::error::{HipError, Result};
use crate::mesh::{Grid, ScalarField};
use crate::par;
use crate::solver::{pcg, CgOptions, DefaultPreconditioner};
use crate::sparse::{CsrMatrix, SymmetricBuilder};

/// Strictly positive conductivity with a certified lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Conductivity {
    field: ScalarField,
    sigma_min: f64,
}

impl Conductivity {
    /// Uses the smallest nodal value as the certified bound.
    pub fn new(field: ScalarField) -> Result<Self> {
        let bound = field.min();
        if !(bound > 0.0) {
            let k = field.values().iter().position(|&v| v == bound).unwrap_or(0);
            let (i, j) = field.grid().ij(k);
            return Err(HipError::NotPositive { i, j, value: bound, bound: 0.0 });
        }
        Ok(Self { field, sigma_min: bound })
    }

    pub fn with_bound(field: ScalarField, sigma_min: f64) -> Result<Self> {
        if !(sigma_min > 0.0) {
            return Err(HipError::InvalidArgument(format!("lower bound must be positive, got {sigma_min}")));
        }
        let g = field.grid();
        if let Some(k) = field.values().iter().position(|&v| v < sigma_min) {
            let (i, j) = g.ij(k);
            return Err(HipError::NotPositive { i, j, value: field.values()[k], bound: sigma_min });
        }
        Ok(Self { field, sigma_min })
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Self::new(ScalarField::constant(grid, c))
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn grid(&self) -> Grid {
        self.field.grid()
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    /// Iteration cap is `iter_factor * n`.
    pub iter_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, iter_factor: 20 }
    }
}

impl SolverOptions {
    pub fn cg(&self, grid: Grid) -> CgOptions {
        CgOptions { rel_tol: self.rel_tol, max_iter: self.iter_factor * grid.n() }
    }
}

/// Interface conductivities of a nodal coefficient field.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Interfaces {
    grid: Grid,
    /// `east[j * n + i]` sits between nodes `(i, j)` and `(i + 1, j)`.
    east: Vec<f64>,
    /// `north[j * (n + 1) + i]` sits between nodes `(i, j)` and `(i, j + 1)`.
    north: Vec<f64>,
}

impl Interfaces {
    pub(crate) fn new(coef: &ScalarField) -> Self {
        let g = coef.grid();
        let n = g.n();
        let mut east = vec![0.0; n * (n + 1)];
        let mut north = vec![0.0; n * (n + 1)];
        for j in 0..=n {
            for i in 0..n {
                east[j * n + i] = 0.5 * (coef.at(i, j) + coef.at(i + 1, j));
            }
        }
        for j in 0..n {
            for i in 0..=n {
                north[j * (n + 1) + i] = 0.5 * (coef.at(i, j) + coef.at(i, j + 1));
            }
        }
        Self { grid: g, east, north }
    }

    #[inline]
    pub(crate) fn east(&self, i: usize, j: usize) -> f64 {
        self.east[j * self.grid.n() + i]
    }

    #[inline]
    pub(crate) fn north(&self, i: usize, j: usize) -> f64 {
        self.north[j * (self.grid.n() + 1) + i]
    }

    /// `(Delta_coef u)` at interior node `(i, j)`.
    #[inline]
    pub(crate) fn apply_at(&self, u: &ScalarField, i: usize, j: usize) -> f64 {
        let h2 = self.grid.h() * self.grid.h();
        let c = u.at(i, j);
        (self.east(i, j) * (u.at(i + 1, j) - c)
            + self.east(i - 1, j) * (u.at(i - 1, j) - c)
            + self.north(i, j) * (u.at(i, j + 1) - c)
            + self.north(i, j - 1) * (u.at(i, j - 1) - c))
            / h2
    }
}

/// `Delta_coef u = div(coef grad u)` at the interior nodes, flux form.
pub fn flux_apply(coef: &ScalarField, u: &ScalarField) -> Result<Vec<f64>> {
    if coef.grid() != u.grid() {
        return Err(HipError::GridMismatch { left: coef.grid().n(), right: u.grid().n() });
    }
    let g = u.grid();
    let faces = Interfaces::new(coef);
    let mut out = vec![0.0; g.interior_count()];
    par::fill_indexed(&mut out, |k| {
        let (i, j) = g.interior_ij(k);
        faces.apply_at(u, i, j)
    });
    Ok(out)
}

/// Transpose of `coef -> flux_apply(coef, u)` applied to interior weights
/// `psi`: returns `m` with `sum_k psi_k flux_apply(coef, u)_k = sum_nodes m coef`.
pub fn flux_coef_transpose(u: &ScalarField, psi_interior: &[f64]) -> ScalarField {
    let g = u.grid();
    let n = g.n();
    let h2 = g.h() * g.h();
    let psi = ScalarField::from_interior(g, psi_interior);
    let mut m = vec![0.0; g.node_count()];
    // edge (a, b) contributes c_e (u_b - u_a)(psi_a - psi_b) / h^2 with
    // c_e = (coef_a + coef_b) / 2
    let mut edge = |a: (usize, usize), b: (usize, usize)| {
        let w = 0.5 * (u.at(b.0, b.1) - u.at(a.0, a.1)) * (psi.at(a.0, a.1) - psi.at(b.0, b.1)) / h2;
        m[g.idx(a.0, a.1)] += w;
        m[g.idx(b.0, b.1)] += w;
    };
    for j in 0..=n {
        for i in 0..n {
            edge((i, j), (i + 1, j));
        }
    }
    for j in 0..n {
        for i in 0..=n {
            edge((i, j), (i, j + 1));
        }
    }
    ScalarField::from_vec(g, m)
}

/// Assembled interior system `A = -Delta_sigma` for one conductivity.
pub struct DirichletSystem {
    grid: Grid,
    matrix: CsrMatrix,
    faces: Interfaces,
    precond: DefaultPreconditioner,
    options: SolverOptions,
}

impl std::fmt::Debug for DirichletSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletSystem")
            .field("n", &self.grid.n())
            .field("nnz", &self.matrix.nnz())
            .field("options", &self.options)
            .finish()
    }
}

pub fn assemble(sigma: &Conductivity) -> DirichletSystem {
    assemble_with(sigma, SolverOptions::default())
}

pub fn assemble_with(sigma: &Conductivity, options: SolverOptions) -> DirichletSystem {
    let g = sigma.grid();
    let n = g.n();
    let h2 = g.h() * g.h();
    let faces = Interfaces::new(sigma.field());
    let mut builder = SymmetricBuilder::new(g.interior_count());
    let mut edge = |a: (usize, usize), b: (usize, usize), c: f64| {
        let w = c / h2;
        let ia = !g.is_boundary(a.0, a.1);
        let ib = !g.is_boundary(b.0, b.1);
        if ia {
            let ka = g.interior_idx(a.0, a.1);
            builder.add(ka, ka, w);
        }
        if ib {
            let kb = g.interior_idx(b.0, b.1);
            builder.add(kb, kb, w);
        }
        if ia && ib {
            builder.add(g.interior_idx(a.0, a.1), g.interior_idx(b.0, b.1), -w);
        }
    };
    for j in 1..n {
        for i in 0..n {
            edge((i, j), (i + 1, j), faces.east(i, j));
        }
    }
    for j in 0..n {
        for i in 1..n {
            edge((i, j), (i, j + 1), faces.north(i, j));
        }
    }
    let matrix = builder.build();
    let precond = DefaultPreconditioner::for_matrix(&matrix);
    DirichletSystem { grid: g, matrix, faces, precond, options }
}

impl DirichletSystem {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// The interior matrix `-Delta_sigma`.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn options(&self) -> SolverOptions {
        self.options
    }

    /// `Delta_sigma u` at interior nodes, boundary values of `u` included.
    pub fn apply(&self, u: &ScalarField) -> Vec<f64> {
        let g = self.grid;
        let mut out = vec![0.0; g.interior_count()];
        par::fill_indexed(&mut out, |k| {
            let (i, j) = g.interior_ij(k);
            self.faces.apply_at(u, i, j)
        });
        out
    }

    /// Boundary contribution moved to the right-hand side of `A u = b`.
    pub fn lift(&self, f: &ScalarField) -> Vec<f64> {
        let g = self.grid;
        let n = g.n();
        let h2 = g.h() * g.h();
        let mut b = vec![0.0; g.interior_count()];
        for j in 1..n {
            for i in 1..n {
                let mut s = 0.0;
                if i == 1 {
                    s += self.faces.east(0, j) * f.at(0, j);
                }
                if i == n - 1 {
                    s += self.faces.east(n - 1, j) * f.at(n, j);
                }
                if j == 1 {
                    s += self.faces.north(i, 0) * f.at(i, 0);
                }
                if j == n - 1 {
                    s += self.faces.north(i, n - 1) * f.at(i, n);
                }
                b[g.interior_idx(i, j)] = s / h2;
            }
        }
        b
    }

    /// Solves `A x = b` for an interior vector.
    pub fn solve_interior(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(pcg(&self.matrix, &self.precond, b, self.options.cg(self.grid), None)?.x)
    }

    /// Solves `Delta_sigma u = rhs` in the interior with `u = f` on the ring.
    pub fn solve_dirichlet(&self, f: &ScalarField, rhs: &ScalarField) -> Result<ScalarField> {
        let g = self.grid;
        if f.grid() != g || rhs.grid() != g {
            return Err(HipError::GridMismatch { left: g.n(), right: f.grid().n().max(rhs.grid().n()) });
        }
        let mut b = self.lift(f);
        for (bk, rk) in b.iter_mut().zip(rhs.interior()) {
            *bk -= rk;
        }
        let x = self.solve_interior(&b)?;
        let mut values = f.values().to_vec();
        for (k, xk) in x.into_iter().enumerate() {
            let (i, j) = g.interior_ij(k);
            values[g.idx(i, j)] = xk;
        }
        ScalarField::new(g, values)
    }

    /// Solves `Delta_sigma u = rhs` with `u = 0` on the ring; `rhs` is given at
    /// the interior nodes.
    pub fn solve_zero_bc(&self, rhs_interior: &[f64]) -> Result<ScalarField> {
        let b: Vec<f64> = rhs_interior.iter().map(|v| -v).collect();
        let x = self.solve_interior(&b)?;
        Ok(ScalarField::from_interior(self.grid, &x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{l2_norm, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    #[test]
    fn unit_conductivity_is_five_point() {
        let g = grid(8);
        let sys = assemble(&Conductivity::constant(g, 1.0).unwrap());
        let a = sys.matrix();
        let h2 = g.h() * g.h();
        let k = g.interior_idx(3, 4);
        assert!((a.get(k, k) - 4.0 / h2).abs() < 1e-9);
        assert!((a.get(k, g.interior_idx(4, 4)) + 1.0 / h2).abs() < 1e-9);
        assert!((a.get(k, g.interior_idx(3, 5)) + 1.0 / h2).abs() < 1e-9);
        assert_eq!(a.get(k, g.interior_idx(4, 5)), 0.0);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn hand_assembled_rows_for_one_plus_x() {
        // n = 8 (h = 1/8), sigma = 1 + x; row of node (1, 1):
        // east interface (1 + 1/8 + 1 + 2/8)/2 = 1.1875, west 1.0625,
        // north/south 1.125 each; diagonal = 4.5 / h^2.
        let g = grid(8);
        let sigma = Conductivity::new(ScalarField::from_fn(g, |x, _| 1.0 + x)).unwrap();
        let sys = assemble(&sigma);
        let a = sys.matrix();
        let h2 = g.h() * g.h();
        let k = g.interior_idx(1, 1);
        assert!((a.get(k, k) * h2 - 4.5).abs() < 1e-12);
        assert!((a.get(k, g.interior_idx(2, 1)) * h2 + 1.1875).abs() < 1e-12);
        assert!((a.get(k, g.interior_idx(1, 2)) * h2 + 1.125).abs() < 1e-12);
        // the west and south neighbors are boundary nodes and go to the lift
        assert_eq!(a.row(k).count(), 3);
        for r in 0..a.rows() {
            assert!(a.row_sum(r) >= -1e-9);
        }
    }

    #[test]
    fn rejects_nonpositive_conductivity() {
        let g = grid(8);
        let f = ScalarField::from_fn(g, |x, _| x - 0.5);
        assert!(matches!(Conductivity::new(f.clone()), Err(HipError::NotPositive { .. })));
        assert!(Conductivity::with_bound(ScalarField::constant(g, 1.0), 2.0).is_err());
    }

    #[test]
    fn linear_boundary_data_reproduced() {
        let g = grid(32);
        let sys = assemble(&Conductivity::constant(g, 1.0).unwrap());
        let f = ScalarField::from_fn(g, |x, _| x);
        let u = sys.solve_dirichlet(&f, &ScalarField::zeros(g)).unwrap();
        assert!(u.sub(&f).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn exponential_conductivity_ode() {
        let g = grid(128);
        let exact = |x: f64| (1.0 - (-x).exp()) / (1.0 - (-1.0f64).exp());
        let sys = assemble(&Conductivity::new(ScalarField::from_fn(g, |x, _| x.exp())).unwrap());
        let u = sys.solve_dirichlet(&ScalarField::from_fn(g, |x, _| exact(x)), &ScalarField::zeros(g)).unwrap();
        assert!((u.at(64, 64) - 0.62246).abs() < 1e-4);
        assert!((exact(0.5) - 0.622459).abs() < 1e-6);
    }

    #[test]
    fn zero_bc_examples() {
        let g = grid(64);
        let sys = assemble(&Conductivity::constant(g, 1.0).unwrap());
        let zero = sys.solve_zero_bc(&vec![0.0; g.interior_count()]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let s = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin());
        let rhs = s.scale(-2.0 * PI * PI);
        let u = sys.solve_zero_bc(&rhs.interior()).unwrap();
        let err = u.sub(&s.with_zero_boundary()).unwrap().max_abs();
        assert!(err < 2.0 * g.h() * g.h(), "{err}");
    }

    #[test]
    fn zero_bc_is_linear() {
        let g = grid(32);
        let sigma = Conductivity::new(ScalarField::from_fn(g, |x, y| 1.0 + x * y)).unwrap();
        let sys = assemble_with(&sigma, SolverOptions { rel_tol: 1e-13, iter_factor: 20 });
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r1: Vec<f64> = (0..g.interior_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r2: Vec<f64> = (0..g.interior_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let comb: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let u1 = sys.solve_zero_bc(&r1).unwrap();
        let u2 = sys.solve_zero_bc(&r2).unwrap();
        let uc = sys.solve_zero_bc(&comb).unwrap();
        let expect = u1.scale(2.0).add_scaled(-0.5, &u2).unwrap();
        assert!(uc.sub(&expect).unwrap().max_abs() <= 1e-9 * expect.max_abs());
    }

    #[test]
    fn spd_and_maximum_principle() {
        let g = grid(24);
        let sigma = Conductivity::new(ScalarField::from_fn(g, |x, y| 1.0 + 0.5 * (3.0 * x).sin() * y)).unwrap();
        let sys = assemble(&sigma);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let v: Vec<f64> = (0..g.interior_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let av = sys.matrix().matvec(&v);
            assert!(par::dot(&v, &av) > 0.0);
        }
        let f = ScalarField::from_fn(g, |x, y| (5.0 * x).cos() + y * y);
        let u = sys.solve_dirichlet(&f, &ScalarField::zeros(g)).unwrap();
        let (lo, hi) = f.interior().iter().fold((f.min(), f.max()), |acc, _| acc);
        let (blo, bhi) = (0..g.node_count())
            .filter(|&k| {
                let (i, j) = g.ij(k);
                g.is_boundary(i, j)
            })
            .map(|k| f.values()[k])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        assert!(lo <= blo && bhi <= hi);
        assert!(u.min() >= blo - 1e-12 && u.max() <= bhi + 1e-12);
    }

    #[test]
    fn manufactured_solution_order_two() {
        let err = |n: usize| {
            let g = grid(n);
            let sigma = Conductivity::new(ScalarField::from_fn(g, |x, _| 1.0 + x)).unwrap();
            let exact = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin());
            // div((1+x) grad u*) = u*_x + (1+x) Laplace u*
            let rhs = ScalarField::from_fn(g, |x, y| {
                PI * (PI * x).cos() * (PI * y).sin() - (1.0 + x) * 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()
            });
            let u = assemble(&sigma).solve_dirichlet(&exact, &rhs).unwrap();
            l2_norm(&u.sub(&exact).unwrap())
        };
        let order = (err(64) / err(128)).log2();
        assert!((order - 2.0).abs() <= 0.1, "order {order}");
    }

    #[test]
    fn flux_transpose_matches_apply() {
        let g = grid(12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let coef = ScalarField::from_fn(g, |x, y| x * y + 0.3);
        let u = ScalarField::from_fn(g, |x, y| (2.0 * x).sin() + y);
        let psi: Vec<f64> = (0..g.interior_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lhs = par::dot(&psi, &flux_apply(&coef, &u).unwrap());
        let m = flux_coef_transpose(&u, &psi);
        let rhs: f64 = m.values().iter().zip(coef.values()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}
