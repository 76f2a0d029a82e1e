//! Smallest eigenvalue of a sparse SPD operator by inverse iteration.
//!
//! Each step applies `A^{-1}` through an inner PCG solve. Instead of keeping
//! only the last iterate, the whole history is used: this is Lanczos on
//! `A^{-1}` with full reorthogonalization, whose Ritz values converge much
//! faster than the plain power sequence when the low end of the spectrum is
//! clustered.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HipError, Result};
use crate::par;
use crate::solver::{pcg, CgOptions, LinearOperator, Preconditioner};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Relative change of the eigenvalue between consecutive steps.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Relative residual of the inner solves.
    pub solve_tol: f64,
    /// Inner iteration cap.
    pub solve_max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, max_iter: 300, solve_tol: 1e-12, solve_max_iter: 20_000, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct EigenEstimate {
    pub value: f64,
    /// Unit Ritz vector.
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// Residual of the Ritz pair of `A^{-1}`, relative to its eigenvalue.
    pub residual: f64,
}

pub fn smallest_eigenpair<A, P>(op: &A, precond: &P, opts: EigenOptions) -> Result<EigenEstimate>
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    let n = op.dim();
    if n == 0 {
        return Err(HipError::InvalidArgument("empty operator".into()));
    }
    let cg = CgOptions { rel_tol: opts.solve_tol, max_iter: opts.solve_max_iter };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nq = par::norm(&q);
    q.iter_mut().for_each(|v| *v /= nq);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter.min(n) {
        let mut w = pcg(op, precond, &q, cg, None)?.x;
        let a = par::dot(&q, &w);
        basis.push(q);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = par::dot(b, &w);
                par::axpy(-c, b, &mut w);
            }
        }
        alpha.push(a);
        let b = par::norm(&w);

        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (top, theta) = eig.eigenvalues.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
            if v > acc.1 {
                (i, v)
            } else {
                acc
            }
        });
        if !(theta > 0.0) {
            return Err(HipError::InvalidArgument("operator is not positive definite".into()));
        }
        let value = 1.0 / theta;
        change = ((value - last) / value).abs();
        last = value;
        // residual bound of the Ritz pair of A^{-1}: |beta_k s_k| / theta
        let s_last = eig.eigenvectors[(k - 1, top)];
        let lanczos_res = (b * s_last).abs() / theta;
        let exhausted = b <= 1e-14 * theta;
        if (change <= opts.rel_tol && lanczos_res <= 1e-4) || exhausted || k == n {
            let mut x = vec![0.0; n];
            for (j, bj) in basis.iter().enumerate() {
                par::axpy(eig.eigenvectors[(j, top)], bj, &mut x);
            }
            let nx = par::norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            return Ok(EigenEstimate { value, vector: x, iterations: it, residual: lanczos_res });
        }
        beta.push(b);
        q = w.into_iter().map(|v| v / b).collect();
    }
    Err(HipError::EigenNotConverged { iterations: opts.max_iter, change })
}
