//! Sparse assembly, products and direct solves.

use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Triplets { n_rows, n_cols, entries: Vec::new() }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn to_csr(&self) -> Csr {
        Csr::from_triplets(self.n_rows, self.n_cols, &self.entries)
    }

    pub fn lu(&self) -> Result<SparseLu> {
        SparseLu::new(self.n_rows, &self.entries)
    }
}

/// Compressed sparse rows, used for operator application.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(n_rows: usize, n_cols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut sorted = entries.to_vec();
        sorted.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col = Vec::with_capacity(sorted.len());
        let mut val: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { n_rows, n_cols, row_ptr, col, val }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows).map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.val[k] * x[self.col[k]]).sum()).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col[r.clone()].binary_search(&j) {
            Ok(k) => self.val[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// max |A_ij - A_ji| over stored entries, relative to max |A_ij|.
    pub fn asymmetry(&self) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k];
                den = den.max(self.val[k].abs());
                num = num.max((self.val[k] - self.get(j, i)).abs());
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub fn to_triplets(&self) -> Triplets {
        let mut t = Triplets::new(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                t.entries.push((i, self.col[k], self.val[k]));
            }
        }
        t
    }
}

/// Sparse LU factorization of a square matrix.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl SparseLu {
    pub fn new(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let trip: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let a =
            SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip).map_err(|e| Error::SolverFailure(format!("assembly: {e:?}")))?;
        let lu = a.sp_lu().map_err(|e| Error::SolverFailure(format!("factorization: {e:?}")))?;
        Ok(SparseLu { n, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.solve_many(&[b.to_vec()])?;
        Ok(out.pop().unwrap())
    }

    pub fn solve_many(&self, bs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let m = Mat::<f64>::from_fn(self.n, bs.len(), |i, j| bs[j][i]);
        let x = self.lu.solve(&m);
        let mut out = Vec::with_capacity(bs.len());
        for j in 0..bs.len() {
            let col: Vec<f64> = (0..self.n).map(|i| x[(i, j)]).collect();
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::SolverFailure("non-finite solution".into()));
            }
            out.push(col);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let mut t = Triplets::new(3, 3);
        for (i, j, v) in [(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (2, 2, 2.0), (1, 2, 0.5)] {
            t.push(i, j, v);
        }
        let lu = t.lu().unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]).unwrap();
        let y = t.to_csr().apply(&x);
        for (a, b) in y.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn csr_sums_duplicates() {
        let c = Csr::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (0, 1, 1.0)]);
        assert_eq!(c.get(0, 0), 3.0);
        assert_eq!(c.asymmetry(), 0.0);
    }
}
