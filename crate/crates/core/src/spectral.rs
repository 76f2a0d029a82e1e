//! Discrete sine transform on the interior nodes, used for the Dirichlet
//! spectral Sobolev scale and for band-limited random fields.

use std::f64::consts::PI;

use crate::mesh::{Grid, ScalarField};
use crate::par;

/// `S[k][i] = sqrt(2h) sin((k+1) pi (i+1) h)`; orthogonal and symmetric.
fn sine_matrix(grid: Grid) -> Vec<f64> {
    let m = grid.interior_side();
    let h = grid.h();
    let scale = (2.0 * h).sqrt();
    let mut s = vec![0.0; m * m];
    for k in 0..m {
        for i in 0..m {
            // reduce the argument mod 2n so the table is exactly symmetric
            let arg = ((k + 1) * (i + 1)) % (2 * grid.n());
            s[k * m + i] = scale * (PI * arg as f64 * h).sin();
        }
    }
    s
}

/// `out = S * a * S^T` for row-major `m x m` matrices (rows indexed by y).
fn transform(s: &[f64], a: &[f64], m: usize) -> Vec<f64> {
    // tmp[j][k] = sum_i a[j][i] S[k][i]
    let tmp = par::map_indexed(m * m, |idx| {
        let (j, k) = (idx / m, idx % m);
        let row = &a[j * m..(j + 1) * m];
        let srow = &s[k * m..(k + 1) * m];
        row.iter().zip(srow).map(|(x, y)| x * y).sum::<f64>()
    });
    // out[l][k] = sum_j S[l][j] tmp[j][k]
    par::map_indexed(m * m, |idx| {
        let (l, k) = (idx / m, idx % m);
        (0..m).map(|j| s[l * m + j] * tmp[j * m + k]).sum::<f64>()
    })
}

/// Coefficients `c[l][k]` (row-major, `l` the y-mode) of the interior values of
/// `f` in the basis `2 sin(k pi x) sin(l pi y)`, modes starting at 1.
pub fn sine_coefficients(f: &ScalarField) -> Vec<f64> {
    let grid = f.grid();
    let m = grid.interior_side();
    let s = sine_matrix(grid);
    let c = transform(&s, &f.interior(), m);
    let h = grid.h();
    c.into_iter().map(|v| v * h).collect()
}

/// Inverse of [`sine_coefficients`]: a zero-boundary field from coefficients.
pub fn synthesize(grid: Grid, coeffs: &[f64]) -> ScalarField {
    let m = grid.interior_side();
    debug_assert_eq!(coeffs.len(), m * m);
    let s = sine_matrix(grid);
    let vals = transform(&s, coeffs, m);
    let inv_h = 1.0 / grid.h();
    let interior: Vec<f64> = vals.into_iter().map(|v| v * inv_h).collect();
    ScalarField::from_interior(grid, &interior)
}

#[inline]
pub fn dirichlet_eigenvalue(k: usize, l: usize) -> f64 {
    PI * PI * ((k * k + l * l) as f64)
}

pub fn weighted_norm(coeffs: &[f64], m: usize, s: f64) -> f64 {
    let mut acc = 0.0;
    for l in 0..m {
        for k in 0..m {
            let c = coeffs[l * m + k];
            if c != 0.0 {
                acc += (1.0 + dirichlet_eigenvalue(k + 1, l + 1)).powf(s) * c * c;
            }
        }
    }
    acc.sqrt()
}
