//! Data-parallel kernels with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the helpers below run on the
//! ambient rayon pool; without it they are plain loops. Reductions are split
//! into fixed-size chunks whose partial sums are combined in order, so results
//! are bitwise identical between the two builds and across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used for reductions and row-blocked kernels.
pub const CHUNK: usize = 2048;

/// Inputs shorter than this run sequentially even in the parallel build; the
/// chunking is unchanged so results do not depend on the choice.
pub const PAR_MIN_LEN: usize = 8 * CHUNK;

/// Evaluates `f(i)` for `i in 0..len`, returning results in index order.
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if len < PAR_MIN_LEN {
            return map_indexed_seq(len, f);
        }
        (0..len).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(len, f)
    }
}

/// Like [`map_indexed`] but for a few expensive tasks: always fans out in the
/// parallel build, whatever `len` is.
pub fn map_tasks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..len).into_par_iter().with_max_len(1).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(len, f)
    }
}

pub fn map_indexed_seq<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Fills `out[i] = f(i)` in parallel chunks.
pub fn fill_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if out.len() < PAR_MIN_LEN {
            return fill_indexed_seq(out, f);
        }
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
            let base = c * CHUNK;
            for (k, slot) in chunk.iter_mut().enumerate() {
                *slot = f(base + k);
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        fill_indexed_seq(out, f)
    }
}

pub fn fill_indexed_seq<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64,
{
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = f(k);
    }
}

fn chunk_sums_seq<F>(len: usize, f: &F) -> Vec<f64>
where
    F: Fn(usize) -> f64,
{
    (0..len.div_ceil(CHUNK))
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(len);
            (c * CHUNK..end).map(f).sum::<f64>()
        })
        .collect()
}

/// Deterministic sum of `f(i)` for `i in 0..len`.
pub fn sum_indexed<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if len < PAR_MIN_LEN {
        return sum_indexed_seq(len, f);
    }
    #[cfg(feature = "parallel")]
    let partials: Vec<f64> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(len);
            (c * CHUNK..end).map(&f).sum::<f64>()
        })
        .collect();
    #[cfg(not(feature = "parallel"))]
    let partials = chunk_sums_seq(len, &f);
    partials.iter().sum()
}

pub fn sum_indexed_seq<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    chunk_sums_seq(len, &f).iter().sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_indexed(a.len(), |i| a[i] * b[i])
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(feature = "parallel")]
    {
        if y.len() < PAR_MIN_LEN {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi += alpha * xi;
            }
            return;
        }
        y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(yc, xc)| {
            for (yi, xi) in yc.iter_mut().zip(xc) {
                *yi += alpha * xi;
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }
}

/// `y = x + beta * y`
pub fn xpby(x: &[f64], beta: f64, y: &mut [f64]) {
    #[cfg(feature = "parallel")]
    {
        if y.len() < PAR_MIN_LEN {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = xi + beta * *yi;
            }
            return;
        }
        y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(yc, xc)| {
            for (yi, xi) in yc.iter_mut().zip(xc) {
                *yi = xi + beta * *yi;
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi + beta * *yi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_match_sequential_bitwise() {
        let len = 9 * CHUNK + 17;
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        assert_eq!(sum_indexed(len, f).to_bits(), sum_indexed_seq(len, f).to_bits());
    }

    #[test]
    fn map_preserves_order() {
        let v = map_indexed(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn axpy_and_xpby() {
        let x = vec![1.0; 5000];
        let mut y = vec![2.0; 5000];
        axpy(0.5, &x, &mut y);
        assert!(y.iter().all(|&v| v == 2.5));
        xpby(&x, 2.0, &mut y);
        assert!(y.iter().all(|&v| v == 6.0));
    }
}
