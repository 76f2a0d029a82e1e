//! Preconditioned conjugate gradients for symmetric positive-definite systems.

use crate::error::{HipError, Result};
use crate::par;
use crate::sparse::CsrMatrix;

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

/// Symmetric positive-definite approximation of the inverse.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        let inv_diag = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
        Self { inv_diag }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * di;
        }
    }
}

/// Zero fill-in incomplete Cholesky factor `A ~ L L^T`.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    // strictly lower part of L by rows, and its transpose for the back solve
    lower: CsrMatrix,
    upper: CsrMatrix,
    inv_diag: Vec<f64>,
}

impl IncompleteCholesky {
    /// Returns `None` if a pivot breaks down (the matrix is not an M-matrix
    /// and the zero fill-in factorization does not exist).
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let n = a.rows();
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|r| a.row(r).filter(|&(c, _)| c < r).collect()).collect();
        let mut diag = vec![0.0; n];
        for r in 0..n {
            // L[r][c] = (A[r][c] - sum_{k<c} L[r][k] L[c][k]) / L[c][c]
            for idx in 0..rows[r].len() {
                let (c, a_rc) = rows[r][idx];
                let mut s = a_rc;
                let (left, right) = (&rows[r][..idx], &rows[c]);
                let (mut p, mut q) = (0, 0);
                while p < left.len() && q < right.len() {
                    match left[p].0.cmp(&right[q].0) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            s -= left[p].1 * right[q].1;
                            p += 1;
                            q += 1;
                        }
                    }
                }
                rows[r][idx].1 = s / diag[c];
            }
            let d = a.get(r, r) - rows[r].iter().map(|(_, v)| v * v).sum::<f64>();
            if !(d > 0.0) {
                return None;
            }
            diag[r] = d.sqrt();
        }
        let lower = CsrMatrix::from_triplets(
            n,
            n,
            rows.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |&(c, v)| (r, c, v))),
        );
        let upper = lower.transpose();
        let inv_diag = diag.iter().map(|d| 1.0 / d).collect();
        Some(Self { lower, upper, inv_diag })
    }
}

impl Preconditioner for IncompleteCholesky {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let s = self.lower.row_dot(i, z);
            z[i] = (r[i] - s) * self.inv_diag[i];
        }
        for i in (0..n).rev() {
            let s = self.upper.row_dot(i, z);
            z[i] = (z[i] - s) * self.inv_diag[i];
        }
    }
}

/// Incomplete Cholesky when it exists, Jacobi otherwise.
pub enum DefaultPreconditioner {
    Ic(IncompleteCholesky),
    Jacobi(Jacobi),
}

impl DefaultPreconditioner {
    pub fn for_matrix(a: &CsrMatrix) -> Self {
        match IncompleteCholesky::new(a) {
            Some(ic) => Self::Ic(ic),
            None => Self::Jacobi(Jacobi::new(&a.diagonal())),
        }
    }
}

impl Preconditioner for DefaultPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Self::Ic(p) => p.apply(r, z),
            Self::Jacobi(p) => p.apply(r, z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Stop once `|b - A x| <= rel_tol |b|`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Callback receiving the iterate and the residual.
pub type CgMonitor<'a> = &'a mut dyn FnMut(&[f64], &[f64]);

/// Preconditioned CG from a zero initial guess. `monitor` sees the iterate and
/// the residual after every update.
pub fn pcg<A, P>(
    op: &A,
    precond: &P,
    b: &[f64],
    opts: CgOptions,
    mut monitor: Option<CgMonitor<'_>>,
) -> Result<CgOutcome>
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    let n = op.dim();
    debug_assert_eq!(b.len(), n);
    let b_norm = par::norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgOutcome { x, iterations: 0, rel_residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = par::dot(&r, &z);
    let mut rel = 1.0;
    for it in 1..=opts.max_iter {
        op.apply(&p, &mut ap);
        let pap = par::dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(HipError::SolverDiverged { iterations: it, residual: rel });
        }
        let alpha = rz / pap;
        par::axpy(alpha, &p, &mut x);
        par::axpy(-alpha, &ap, &mut r);
        rel = par::norm(&r) / b_norm;
        if let Some(m) = monitor.as_deref_mut() {
            m(&x, &r);
        }
        if rel <= opts.rel_tol {
            return Ok(CgOutcome { x, iterations: it, rel_residual: rel });
        }
        precond.apply(&r, &mut z);
        let rz_new = par::dot(&r, &z);
        par::xpby(&z, rz_new / rz, &mut p);
        rz = rz_new;
    }
    Err(HipError::SolverDiverged { iterations: opts.max_iter, residual: rel })
}
