//! Compressed sparse row matrices with exact-symmetry assembly.

use std::collections::BTreeMap;

use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(rows: usize, cols: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (r, c, v) in triplets {
            debug_assert!(r < rows && c < cols);
            *map.entry((r, c)).or_insert(0.0) += v;
        }
        Self::from_sorted(rows, cols, map)
    }

    fn from_sorted(rows: usize, cols: usize, map: BTreeMap<(usize, usize), f64>) -> Self {
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(map.len());
        let mut values = Vec::with_capacity(map.len());
        for ((r, c), v) in map {
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { rows, cols, row_ptr, col_idx, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|r| self.get(r, r)).collect()
    }

    #[inline]
    pub(crate) fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (start, end) = (self.row_ptr[r], self.row_ptr[r + 1]);
        let cols = &self.col_idx[start..end];
        let vals = &self.values[start..end];
        let mut s = 0.0;
        for k in 0..cols.len() {
            s += vals[k] * x[cols[k]];
        }
        s
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        par::fill_indexed(y, |r| self.row_dot(r, x));
    }

    pub fn matvec_into_seq(&self, x: &[f64], y: &mut [f64]) {
        par::fill_indexed_seq(y, |r| self.row_dot(r, x));
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                col_idx[slot] = r;
                values[slot] = v;
                next[c] += 1;
            }
        }
        CsrMatrix { rows: self.cols, cols: self.rows, row_ptr, col_idx, values }
    }

    /// Largest `|A_rc - A_cr|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).map(|(_, v)| v).sum()
    }
}

/// Accumulates the upper triangle of a symmetric matrix and mirrors it, so the
/// result is symmetric bit for bit regardless of accumulation order.
#[derive(Debug, Default)]
pub struct SymmetricBuilder {
    dim: usize,
    upper: BTreeMap<(usize, usize), f64>,
}

impl SymmetricBuilder {
    pub fn new(dim: usize) -> Self {
        Self { dim, upper: BTreeMap::new() }
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let key = if r <= c { (r, c) } else { (c, r) };
        *self.upper.entry(key).or_insert(0.0) += v;
    }

    pub fn build(self) -> CsrMatrix {
        let mut full = BTreeMap::new();
        for ((r, c), v) in self.upper {
            full.insert((r, c), v);
            if r != c {
                full.insert((c, r), v);
            }
        }
        CsrMatrix::from_sorted(self.dim, self.dim, full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_accumulate() {
        let m = CsrMatrix::from_triplets(2, 3, [(0, 1, 1.0), (0, 1, 2.0), (1, 2, -1.0)]);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, -1.0]);
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 3.0);
        assert_eq!(t.get(2, 1), -1.0);
    }

    #[test]
    fn symmetric_builder_is_exact() {
        let mut b = SymmetricBuilder::new(3);
        b.add(0, 1, 0.1);
        b.add(1, 0, 0.2);
        b.add(2, 2, 1.0);
        let m = b.build();
        assert_eq!(m.asymmetry(), 0.0);
        assert_eq!(m.get(1, 0), 0.1 + 0.2);
    }

    #[test]
    fn seq_and_par_matvec_agree() {
        let n = 5000;
        let m = CsrMatrix::from_triplets(n, n, (0..n).flat_map(|i| [(i, i, 2.0), (i, (i + 7) % n, -0.3)]));
        let x: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        m.matvec_into(&x, &mut a);
        m.matvec_into_seq(&x, &mut b);
        assert_eq!(a, b);
    }
}
