//! The transport operator `T0 = grad u0 . grad`, the pointwise projections
//! onto and against `grad u0`, and the second-order operator
//!
//! `L v = -div(sigma0 grad v) + p div(sigma0 (grad u0 . grad v / |grad u0|^2) grad u0)`
//!
//! whose composition with `T0` factors the linearized data map.
//!
//! `L` is assembled from its weak form
//! `(sigma0 P_perp grad v, P_perp grad phi) + (1 - p)(sigma0 P_par grad v, P_par grad phi)`
//! with a corner quadrature: every cell contributes at each of its four
//! corners, using the one-sided cell differences meeting there. The result is
//! exactly symmetric, a sum of squares (hence semidefinite for `p <= 1`),
//! coincides with the five-point flux Laplacian at `p = 0`, and reproduces the
//! constant-coefficient stencil when `grad u0` is axis aligned.

use crate::eigen::{smallest_eigenpair, EigenOptions};
use crate::elliptic::Conductivity;
use crate::error::{HipError, Result};
use crate::forward::{checked_speed, differential, Exponent, LinearizationBundle, DEFAULT_GRAD_FLOOR};
use crate::mesh::{gradient, Grid, ScalarField, VectorField};
use crate::par;
use crate::solver::DefaultPreconditioner;
use crate::sparse::{CsrMatrix, SymmetricBuilder};

/// `T0 rho = grad u0 . grad rho` at every node.
pub fn transport_apply(u0: &ScalarField, rho: &ScalarField) -> Result<ScalarField> {
    gradient(u0).dot(&gradient(rho))
}

fn unit_direction(u0: &ScalarField, floor: f64) -> Result<VectorField> {
    let grad = gradient(u0);
    let speed = checked_speed(&grad, floor)?;
    grad.scale_by(&speed.map(|s| 1.0 / s))
}

/// `P_par v = (grad u0 . v / |grad u0|^2) grad u0`.
pub fn project_parallel(u0: &ScalarField, v: &VectorField) -> Result<VectorField> {
    let e = unit_direction(u0, DEFAULT_GRAD_FLOOR)?;
    e.scale_by(&e.dot(v)?)
}

/// `P_perp v = v - P_par v`.
pub fn project_perp(u0: &ScalarField, v: &VectorField) -> Result<VectorField> {
    v.sub(&project_parallel(u0, v)?)
}

/// `L` as a sparse symmetric matrix over interior nodes, scaled so that
/// `L x` approximates the strong form at the nodes (the bilinear form is
/// `h^2 x^T L y` in the trapezoidal inner product).
#[derive(Debug, Clone)]
pub struct ProjectedGradientOperator {
    grid: Grid,
    p: Exponent,
    matrix: CsrMatrix,
    /// Per cell corner: the weight `sigma0 / 4` and the unit direction of the
    /// corner gradient of `u0`, in the order visited by [`corners`].
    corner_data: CornerData,
}

/// A cell corner with the three nodes entering its one-sided gradient:
/// the corner itself and its x- and y-neighbors in the cell, with signs.
struct Corner {
    node: (usize, usize),
    xn: (usize, usize),
    yn: (usize, usize),
    /// `+1` when the corner is the left/bottom end of its edge.
    sx: f64,
    sy: f64,
}

fn corners(grid: Grid) -> impl Iterator<Item = Corner> {
    let n = grid.n();
    (0..n).flat_map(move |j| {
        (0..n).flat_map(move |i| {
            [(0usize, 0usize), (1, 0), (0, 1), (1, 1)].into_iter().map(move |(di, dj)| {
                let (a, b) = (i + di, j + dj);
                let xn = (if di == 0 { i + 1 } else { i }, b);
                let yn = (a, if dj == 0 { j + 1 } else { j });
                let sx = if di == 0 { -1.0 } else { 1.0 };
                let sy = if dj == 0 { -1.0 } else { 1.0 };
                Corner { node: (a, b), xn, yn, sx, sy }
            })
        })
    })
}

impl Corner {
    /// One-sided gradient `(d_x, d_y)` of `f` at the corner.
    fn gradient(&self, f: &ScalarField, h: f64) -> (f64, f64) {
        let c = f.at(self.node.0, self.node.1);
        (self.sx * (c - f.at(self.xn.0, self.xn.1)) / h, self.sy * (c - f.at(self.yn.0, self.yn.1)) / h)
    }
}

pub fn assemble_l(sigma0: &Conductivity, u0: &ScalarField, p: Exponent) -> Result<ProjectedGradientOperator> {
    assemble_l_with_floor(sigma0, u0, p, DEFAULT_GRAD_FLOOR)
}

pub fn assemble_l_with_floor(
    sigma0: &Conductivity,
    u0: &ScalarField,
    p: Exponent,
    grad_floor: f64,
) -> Result<ProjectedGradientOperator> {
    let g = sigma0.grid();
    g.check_same(&u0.grid())?;
    checked_speed(&gradient(u0), grad_floor)?;
    let (matrix, corner_data) = assemble_form(sigma0, u0, p.value(), grad_floor)?;
    Ok(ProjectedGradientOperator { grid: g, p, matrix, corner_data })
}

type CornerData = Vec<(f64, f64, f64)>;

fn assemble_form(sigma0: &Conductivity, u0: &ScalarField, pv: f64, grad_floor: f64) -> Result<(CsrMatrix, CornerData)> {
    let g = sigma0.grid();
    let h = g.h();
    let mut builder = SymmetricBuilder::new(g.interior_count());
    let mut corner_data = Vec::with_capacity(4 * g.n() * g.n());
    for c in corners(g) {
        let (gx, gy) = c.gradient(u0, h);
        let norm = gx.hypot(gy);
        if !(norm >= grad_floor) {
            return Err(HipError::GradientFloorViolated { i: c.node.0, j: c.node.1, value: norm, floor: grad_floor });
        }
        let (ex, ey) = (gx / norm, gy / norm);
        let weight = 0.25 * sigma0.field().at(c.node.0, c.node.1);
        corner_data.push((weight, ex, ey));
        // M = I - p e e^T, form weight * (G v)^T M (G v) with G v the corner
        // gradient; coefficients of the three nodes in (d_x, d_y), times h
        let m = [[1.0 - pv * ex * ex, -pv * ex * ey], [-pv * ex * ey, 1.0 - pv * ey * ey]];
        let coeffs = [(c.node, (-c.sx, -c.sy)), (c.xn, (c.sx, 0.0)), (c.yn, (0.0, c.sy))];
        let scale = weight / (h * h);
        for (a, &(na, ca)) in coeffs.iter().enumerate() {
            if g.is_boundary(na.0, na.1) {
                continue;
            }
            let ka = g.interior_idx(na.0, na.1);
            for &(nb, cb) in &coeffs[a..] {
                if g.is_boundary(nb.0, nb.1) {
                    continue;
                }
                let kb = g.interior_idx(nb.0, nb.1);
                let q = ca.0 * (m[0][0] * cb.0 + m[0][1] * cb.1) + ca.1 * (m[1][0] * cb.0 + m[1][1] * cb.1);
                // the builder mirrors off-diagonal entries, which accounts for
                // the pair appearing once
                builder.add(ka, kb, q * scale);
            }
        }
    }
    Ok((builder.build(), corner_data))
}

impl ProjectedGradientOperator {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// `L v` at the interior nodes for a field vanishing on the ring.
    pub fn apply(&self, v: &ScalarField) -> Result<Vec<f64>> {
        self.grid.check_same(&v.grid())?;
        v.check_zero_boundary()?;
        Ok(self.matrix.matvec(&v.interior()))
    }

    /// `(|sqrt(sigma0) P_perp grad v|^2, |sqrt(sigma0) P_par grad v|^2)` with the
    /// quadrature used for assembly, so that
    /// `<L v, v> = perp + (1 - p) par` holds up to rounding.
    pub fn form_split(&self, v: &ScalarField) -> Result<(f64, f64)> {
        self.grid.check_same(&v.grid())?;
        let h = self.grid.h();
        let (mut perp, mut par) = (0.0, 0.0);
        for (c, &(w, ex, ey)) in corners(self.grid).zip(&self.corner_data) {
            let (gx, gy) = c.gradient(v, h);
            let along = gx * ex + gy * ey;
            let (px, py) = (gx - along * ex, gy - along * ey);
            perp += w * h * h * (px * px + py * py);
            par += w * h * h * along * along;
        }
        Ok((perp, par))
    }
}

/// Relative mismatch between the two sides of the factorization
/// `sigma0 T0(dF(sigma0 rho) / (sigma0 |grad u0|^p)) = -L Delta_{sigma0}^{-1}(sigma0 T0 rho)`
/// at the interior nodes.
pub fn factorization_residual(
    bundle: &LinearizationBundle,
    l: &ProjectedGradientOperator,
    rho: &ScalarField,
) -> Result<f64> {
    rho.check_zero_boundary()?;
    let sigma0 = bundle.sigma0().field();
    let u0 = bundle.u0();
    let df = differential(bundle, &rho.mul(sigma0)?)?;
    let normalized = df.zip_map(&sigma0.mul(bundle.speed_pow())?, |a, b| a / b)?;
    let lhs = sigma0.mul(&transport_apply(u0, &normalized)?)?.interior();

    let source = sigma0.mul(&transport_apply(u0, rho)?)?;
    // v0 = -Delta^{-1}(sigma0 T0 rho): Delta v0 = -source
    let v0 = bundle.system().solve_zero_bc(&source.interior().iter().map(|s| -s).collect::<Vec<_>>())?;
    let rhs = l.apply(&v0)?;

    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let scale = par::norm(&lhs);
    let num = par::norm(&diff);
    if scale == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / scale)
}

/// Smallest eigenvalue of `L`: the minimal Rayleigh quotient
/// `<L v, v> / |v|^2` over zero-boundary fields. For `p < 1` the operator is
/// positive definite and this is also its smallest singular value.
pub fn l_spectral_bound(l: &ProjectedGradientOperator, opts: EigenOptions) -> Result<f64> {
    let pre = DefaultPreconditioner::for_matrix(&l.matrix);
    Ok(smallest_eigenpair(&l.matrix, &pre, opts)?.value)
}

/// Discrete `T0` from zero-boundary fields to all nodes, as a matrix of size
/// `node_count x interior_count`.
pub fn transport_matrix(u0: &ScalarField) -> CsrMatrix {
    let g = u0.grid();
    let (n, h) = (g.n(), g.h());
    let grad = gradient(u0);
    // one-dimensional derivative weights at position i: (offset node, weight)
    let stencil = |i: usize| -> Vec<(usize, f64)> {
        if i == 0 {
            vec![(0, -3.0 / (2.0 * h)), (1, 4.0 / (2.0 * h)), (2, -1.0 / (2.0 * h))]
        } else if i == n {
            vec![(n, 3.0 / (2.0 * h)), (n - 1, -4.0 / (2.0 * h)), (n - 2, 1.0 / (2.0 * h))]
        } else {
            vec![(i + 1, 1.0 / (2.0 * h)), (i - 1, -1.0 / (2.0 * h))]
        }
    };
    let mut triplets = Vec::new();
    for k in 0..g.node_count() {
        let (i, j) = g.ij(k);
        let (gx, gy) = grad.at(i, j);
        for (a, w) in stencil(i) {
            if !g.is_boundary(a, j) {
                triplets.push((k, g.interior_idx(a, j), gx * w));
            }
        }
        for (b, w) in stencil(j) {
            if !g.is_boundary(i, b) {
                triplets.push((k, g.interior_idx(i, b), gy * w));
            }
        }
    }
    CsrMatrix::from_triplets(g.node_count(), g.interior_count(), triplets)
}

/// Smallest singular value of `T0` on zero-boundary fields, measured in the
/// trapezoidal norms: `min |T0 rho| / |rho|`.
pub fn transport_spectral_bound(u0: &ScalarField, opts: EigenOptions) -> Result<f64> {
    checked_speed(&gradient(u0), DEFAULT_GRAD_FLOOR)?;
    let g = u0.grid();
    let t = transport_matrix(u0);
    let weights = g.weights();
    let h2 = g.h() * g.h();
    // normal operator T^T W T / h^2, assembled row by row of T
    let mut builder = SymmetricBuilder::new(g.interior_count());
    for (r, weight) in weights.iter().enumerate() {
        let w = weight / h2;
        let row: Vec<(usize, f64)> = t.row(r).collect();
        for (a, &(ca, va)) in row.iter().enumerate() {
            for &(cb, vb) in &row[a..] {
                builder.add(ca, cb, w * va * vb);
            }
        }
    }
    let normal = builder.build();
    let pre = DefaultPreconditioner::for_matrix(&normal);
    Ok(smallest_eigenpair(&normal, &pre, opts)?.value.sqrt())
}

/// Stream function with `grad ut = (sigma0 grad u0)^perp`, `(a, b)^perp = (b, -a)`,
/// normalized by `ut(0, 0) = 0`. Integrates with the trapezoid rule first
/// along `y = 0` and then vertically; the same integral along the transposed
/// path (first `x = 0`, then horizontally) gives the returned consistency
/// residual `max |difference|`.
pub fn harmonic_conjugate(sigma0: &Conductivity, u0: &ScalarField, tolerance: f64) -> Result<(ScalarField, f64)> {
    let g = sigma0.grid();
    g.check_same(&u0.grid())?;
    checked_speed(&gradient(u0), DEFAULT_GRAD_FLOOR)?;
    let (n, h) = (g.n(), g.h());
    let grad = gradient(u0);
    let s = sigma0.field();
    // components of the rotated current
    let px = |i: usize, j: usize| s.at(i, j) * grad.at(i, j).1;
    let py = |i: usize, j: usize| -s.at(i, j) * grad.at(i, j).0;

    let mut first = vec![0.0; g.node_count()];
    for i in 1..=n {
        first[g.idx(i, 0)] = first[g.idx(i - 1, 0)] + 0.5 * h * (px(i - 1, 0) + px(i, 0));
    }
    for i in 0..=n {
        for j in 1..=n {
            first[g.idx(i, j)] = first[g.idx(i, j - 1)] + 0.5 * h * (py(i, j - 1) + py(i, j));
        }
    }
    let mut second = vec![0.0; g.node_count()];
    for j in 1..=n {
        second[g.idx(0, j)] = second[g.idx(0, j - 1)] + 0.5 * h * (py(0, j - 1) + py(0, j));
    }
    for j in 0..=n {
        for i in 1..=n {
            second[g.idx(i, j)] = second[g.idx(i - 1, j)] + 0.5 * h * (px(i - 1, j) + px(i, j));
        }
    }
    let residual = first.iter().zip(&second).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if residual > tolerance {
        return Err(HipError::CurlResidual { residual, tolerance });
    }
    Ok((ScalarField::new(g, first)?, residual))
}

/// `c = 1 / |grad u0|`.
/// Five-point discretization of `-(d_yy + (1 - p) d_xx)` on the interior
/// nodes with zero boundary values: the form `L` reduces to it for
/// `sigma0 = 1`, `u0 = x`.
pub fn reference_stencil(grid: Grid, p: Exponent) -> CsrMatrix {
    let m = grid.interior_side();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let q = 1.0 - p.value();
    let mut triplets = Vec::with_capacity(5 * m * m);
    for j in 0..m {
        for i in 0..m {
            let r = j * m + i;
            triplets.push((r, r, (2.0 + 2.0 * q) * inv_h2));
            if i > 0 {
                triplets.push((r, r - 1, -q * inv_h2));
            }
            if i + 1 < m {
                triplets.push((r, r + 1, -q * inv_h2));
            }
            if j > 0 {
                triplets.push((r, r - m, -inv_h2));
            }
            if j + 1 < m {
                triplets.push((r, r + m, -inv_h2));
            }
        }
    }
    CsrMatrix::from_triplets(m * m, m * m, triplets)
}

/// Largest entrywise difference between two matrices of the same shape.
pub fn max_entry_difference(a: &CsrMatrix, b: &CsrMatrix) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..a.rows() {
        for (c, v) in a.row(r) {
            worst = worst.max((v - b.get(r, c)).abs());
        }
        for (c, v) in b.row(r) {
            worst = worst.max((v - a.get(r, c)).abs());
        }
    }
    worst
}

pub fn wave_speed(u0: &ScalarField) -> Result<ScalarField> {
    Ok(checked_speed(&gradient(u0), DEFAULT_GRAD_FLOOR)?.map(|s| 1.0 / s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::SolverOptions;
    use crate::mesh::l2_inner;
    use crate::presets::SigmaPreset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Grid {
        Grid::new(n).unwrap()
    }

    fn x_field(g: Grid) -> ScalarField {
        ScalarField::from_fn(g, |x, _| x)
    }

    fn random_zero_boundary(g: Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        let v: Vec<f64> = (0..g.interior_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        ScalarField::from_interior(g, &v)
    }

    #[test]
    fn transport_examples() {
        let g = grid(16);
        let x = x_field(g);
        assert_eq!(transport_apply(&x, &ScalarField::constant(g, 3.0)).unwrap().max_abs(), 0.0);
        let t = transport_apply(&x, &x).unwrap();
        assert!(t.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let u = ScalarField::from_fn(g, |x, _| 0.5 * x * x);
        let rho = ScalarField::from_fn(g, |_, y| (std::f64::consts::PI * y).sin());
        assert!(transport_apply(&u, &rho).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn transport_matrix_matches_nodal_product() {
        let g = grid(12);
        let u = ScalarField::from_fn(g, |x, y| x + 0.3 * (2.0 * y).sin());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = random_zero_boundary(g, &mut rng);
        let direct = transport_apply(&u, &rho).unwrap();
        let via = transport_matrix(&u).matvec(&rho.interior());
        assert!(direct.values().iter().zip(&via).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn projections() {
        let g = grid(16);
        let x = x_field(g);
        let v = VectorField::constant(g, 2.0, -3.0);
        let par_v = project_parallel(&x, &v).unwrap();
        let perp_v = project_perp(&x, &v).unwrap();
        assert!(par_v.x().iter().all(|a| (a - 2.0).abs() < 1e-12) && par_v.y().iter().all(|a| a.abs() < 1e-12));
        assert!(perp_v.x().iter().all(|a| a.abs() < 1e-12) && perp_v.y().iter().all(|a| (a + 3.0).abs() < 1e-12));

        let u = ScalarField::from_fn(g, |x, y| x + 0.2 * x * y + 0.1 * y * y);
        assert!(project_perp(&u, &gradient(&u)).unwrap().max_abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = VectorField::new(
            g,
            (0..g.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..g.node_count()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let p1 = project_parallel(&u, &w).unwrap();
        let p2 = project_parallel(&u, &p1).unwrap();
        assert!(p2.sub(&p1).unwrap().max_abs() < 1e-12);
        let q = project_perp(&u, &w).unwrap();
        assert!(p1.dot(&q).unwrap().max_abs() < 1e-12);
        let sum = p1.add(&q).unwrap();
        assert!(sum.sub(&w).unwrap().max_abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn p_zero_limit_is_flux_laplacian() {
        // p = 0 is outside the exponent range of the functional, but the
        // form is defined there and the projections recombine to the identity
        let g = grid(10);
        let sigma = Conductivity::new(ScalarField::from_fn(g, |x, y| 1.0 + x * y)).unwrap();
        let u = ScalarField::from_fn(g, |x, y| x + 0.1 * y);
        let (l, _) = assemble_form(&sigma, &u, 0.0, DEFAULT_GRAD_FLOOR).unwrap();
        let a = crate::elliptic::assemble(&sigma);
        for r in 0..g.interior_count() {
            for (c, v) in a.matrix().row(r) {
                assert!((l.get(r, c) - v).abs() <= 1e-12 * v.abs());
            }
            assert_eq!(l.row(r).filter(|&(_, v)| v != 0.0).count(), a.matrix().row(r).count());
        }
    }

    #[test]
    fn l_is_symmetric_and_semidefinite() {
        let g = grid(16);
        let sigma = SigmaPreset::standard_bump().build(g).unwrap();
        let b = LinearizationBundle::new(sigma.clone(), &x_field(g), Exponent::new(1.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [0.5, 1.0] {
            let l = assemble_l(&sigma, b.u0(), Exponent::new(p).unwrap()).unwrap();
            assert_eq!(l.matrix().asymmetry(), 0.0);
            for _ in 0..100 {
                let v = random_zero_boundary(g, &mut rng);
                let lv = ScalarField::from_interior(g, &l.apply(&v).unwrap());
                let form = l2_inner(&lv, &v).unwrap();
                assert!(form >= 0.0);
                let (perp, par) = l.form_split(&v).unwrap();
                assert!((form - (perp + (1.0 - p) * par)).abs() <= 1e-10 * form.max(1.0));
            }
        }
    }

    #[test]
    fn constant_background_gives_reference_stencil() {
        let g = grid(12);
        let sigma = Conductivity::constant(g, 1.0).unwrap();
        for p in [0.25, 0.5, 1.0] {
            let p = Exponent::new(p).unwrap();
            let l = assemble_l(&sigma, &x_field(g), p).unwrap();
            assert!(max_entry_difference(l.matrix(), &reference_stencil(g, p)) <= 1e-12);
        }
    }

    #[test]
    fn rayleigh_quotient_constant_case() {
        let g = grid(32);
        let sigma = Conductivity::constant(g, 1.0).unwrap();
        for (p, expect) in [(1.0, 1.0), (0.5, 1.5)] {
            let l = assemble_l(&sigma, &x_field(g), Exponent::new(p).unwrap()).unwrap();
            let lam = l_spectral_bound(&l, EigenOptions::default()).unwrap();
            // discrete eigenvalue of the five-point stencil
            let d = 4.0 * (g.n() * g.n()) as f64 * (std::f64::consts::PI * g.h() / 2.0).sin().powi(2);
            assert!((lam - expect * d).abs() <= 1e-7 * lam, "{lam}");
        }
    }

    #[test]
    fn transport_bound_scales_exactly() {
        let g = grid(32);
        let s1 = transport_spectral_bound(&x_field(g), EigenOptions::default()).unwrap();
        let s2 = transport_spectral_bound(&x_field(g).scale(2.0), EigenOptions::default()).unwrap();
        assert_eq!(s2, 2.0 * s1);
        assert!((s1 - std::f64::consts::PI).abs() < 0.1 * std::f64::consts::PI);
    }

    #[test]
    fn conjugate_examples() {
        let g = grid(16);
        let one = Conductivity::constant(g, 1.0).unwrap();
        let (t, res) = harmonic_conjugate(&one, &x_field(g), 1e-10).unwrap();
        assert!(res < 1e-13);
        assert!(t.sub(&ScalarField::from_fn(g, |_, y| -y)).unwrap().max_abs() < 1e-13);
        let (t, _) = harmonic_conjugate(&one, &ScalarField::from_fn(g, |_, y| y), 1e-10).unwrap();
        assert!(t.sub(&x_field(g)).unwrap().max_abs() < 1e-13);
        // a potential that is not sigma-harmonic is flagged
        let bent = ScalarField::from_fn(g, |x, y| x + 0.3 * x * y * y);
        assert!(matches!(harmonic_conjugate(&one, &bent, 1e-6), Err(HipError::CurlResidual { .. })));
    }

    #[test]
    fn wave_speed_examples() {
        let g = grid(16);
        assert!(wave_speed(&x_field(g)).unwrap().values().iter().all(|c| (c - 1.0).abs() < 1e-12));
        assert!(wave_speed(&x_field(g).scale(2.0)).unwrap().values().iter().all(|c| (c - 0.5).abs() < 1e-12));
        let sigma = SigmaPreset::standard_bump().build(g).unwrap();
        let b = LinearizationBundle::with_options(
            sigma,
            &x_field(g),
            Exponent::new(1.0).unwrap(),
            1e-3,
            SolverOptions::default(),
        )
        .unwrap();
        let c = wave_speed(b.u0()).unwrap();
        let direct = gradient(b.u0()).magnitude();
        assert!(c.values().iter().zip(direct.values()).all(|(a, d)| *a == 1.0 / d));
    }

    #[test]
    fn factorization_trivial_cases() {
        let g = grid(16);
        let b =
            LinearizationBundle::new(Conductivity::constant(g, 1.0).unwrap(), &x_field(g), Exponent::new(0.5).unwrap())
                .unwrap();
        let l = assemble_l(b.sigma0(), b.u0(), b.p()).unwrap();
        assert_eq!(factorization_residual(&b, &l, &ScalarField::zeros(g)).unwrap(), 0.0);
        assert!(factorization_residual(&b, &l, &x_field(g)).is_err());
    }
}
