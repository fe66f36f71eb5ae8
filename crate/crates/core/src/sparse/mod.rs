//! Compressed sparse row matrices over real or complex scalars, with the
//! iterative solvers used by the time stepper.

mod scalar;
mod solve;

pub use scalar::Scalar;
pub use solve::{
    solve_complex, solve_spd, ComplexSolver, SolveError, SolveReport, SolverOptions, SpdSolver,
    DEFAULT_TOL,
};

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Largest row or column count accepted from a matrix-market dump.
const MM_MAX_DIM: usize = 1 << 26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("entry ({row}, {col}) outside a {n_rows}x{n_cols} matrix")]
    OutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("matrices do not share a sparsity pattern")]
    PatternMismatch,
    #[error("matrix market line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Row offsets and strictly increasing column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column sets; each row is sorted and
    /// deduplicated.
    pub fn from_rows(n_cols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows: rows.len(),
            n_cols,
            row_ptr,
            col_idx,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    /// Position of `(row, col)` in the value array.
    #[inline]
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let start = self.row_ptr[row];
        let cols = &self.col_idx[start..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|k| start + k)
    }
}

#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    pattern: Arc<Pattern>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Sums duplicate entries; the result has no explicit duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        entries: &[(usize, usize, T)],
    ) -> Result<Self, SparseError> {
        for &(row, col, _) in entries {
            if row >= n_rows || col >= n_cols {
                return Err(SparseError::OutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
        }
        // Stable sort keeps the summation order fixed for equal keys.
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by_key(|&k| (entries[k].0, entries[k].1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<T> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = entries[k];
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            pattern: Arc::new(Pattern {
                n_rows,
                n_cols,
                row_ptr,
                col_idx,
            }),
            values,
        })
    }

    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![T::zero(); pattern.nnz()];
        Self { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        let entries: Vec<_> = (0..n).map(|i| (i, i, T::one())).collect();
        Self::from_triplets(n, n, &entries).expect("diagonal entries are in range")
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.pattern
            .find(row, col)
            .map_or(T::zero(), |k| self.values[k])
    }

    /// Iterates `(row, col, value)` over stored entries in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows()).flat_map(move |r| {
            let (s, e) = (self.pattern.row_ptr[r], self.pattern.row_ptr[r + 1]);
            (s..e).map(move |k| (r, self.pattern.col_idx[k], self.values[k]))
        })
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n_rows()).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n_rows()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n_cols(), "matvec: input length");
        assert_eq!(y.len(), self.n_rows(), "matvec: output length");
        let p = &*self.pattern;
        let row = |r: usize| {
            let mut acc = T::zero();
            for k in p.row_ptr[r]..p.row_ptr[r + 1] {
                acc += self.values[k] * x[p.col_idx[k]];
            }
            acc
        };
        if self.n_rows() >= 4096 {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(r, out)| *out = row(r));
        } else {
            y.iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
        }
    }

    /// `sum_k c_k A_k` over matrices sharing one pattern.
    pub fn linear_combination(terms: &[(T, &CsrMatrix<T>)]) -> Result<Self, SparseError> {
        let (_, first) = terms.first().ok_or(SparseError::PatternMismatch)?;
        let mut out = CsrMatrix::zeros(first.pattern.clone());
        for (c, m) in terms {
            if !Arc::ptr_eq(&m.pattern, &first.pattern) && *m.pattern != *first.pattern {
                return Err(SparseError::PatternMismatch);
            }
            out.values
                .iter_mut()
                .zip(&m.values)
                .for_each(|(o, v)| *o += *c * *v);
        }
        Ok(out)
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `max |a_ij - conj(a_ji)|`; zero for Hermitian (or, over the reals,
    /// symmetric) matrices.
    pub fn hermitian_deviation(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.n_cols()]; self.n_rows()];
        for (r, c, v) in self.triplets() {
            out[r][c] += v;
        }
        out
    }

    /// Matrix-market style coordinate dump (1-based indices).
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        let field = if T::IS_COMPLEX { "complex" } else { "real" };
        let _ = writeln!(out, "%%MatrixMarket matrix coordinate {field} general");
        let _ = writeln!(out, "{} {} {}", self.n_rows(), self.n_cols(), self.nnz());
        for (r, c, v) in self.triplets() {
            let _ = writeln!(out, "{} {} {}", r + 1, c + 1, v.to_mm_string());
        }
        out
    }

    pub fn from_matrix_market(text: &str) -> Result<Self, SparseError> {
        let perr = |line: usize, msg: &str| SparseError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, banner) = lines.next().ok_or_else(|| perr(1, "empty input"))?;
        let words: Vec<String> = banner
            .split_whitespace()
            .map(str::to_ascii_lowercase)
            .collect();
        if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
            return Err(perr(1, "missing %%MatrixMarket matrix banner"));
        }
        if words[2] != "coordinate" || words[4] != "general" {
            return Err(perr(1, "only coordinate general matrices are supported"));
        }
        let want = if T::IS_COMPLEX { "complex" } else { "real" };
        if words[3] != want {
            return Err(perr(1, "scalar field does not match the requested type"));
        }
        let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
        let (sl, size) = body.next().ok_or_else(|| perr(2, "missing size line"))?;
        let dims: Vec<usize> = size
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| perr(sl, "size line must be three integers"))?;
        let [n_rows, n_cols, nnz] = dims[..] else {
            return Err(perr(sl, "size line must be `rows cols nnz`"));
        };
        if n_rows > MM_MAX_DIM || n_cols > MM_MAX_DIM {
            return Err(perr(sl, "matrix dimensions too large"));
        }
        let mut entries = Vec::with_capacity(nnz.min(1 << 20));
        for _ in 0..nnz {
            let (ln, l) = body
                .next()
                .ok_or_else(|| perr(0, "fewer entries than declared"))?;
            let mut it = l.split_whitespace();
            let mut index = || -> Result<usize, SparseError> {
                let v: usize = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| perr(ln, "bad index"))?;
                v.checked_sub(1)
                    .ok_or_else(|| perr(ln, "indices are 1-based"))
            };
            let (r, c) = (index()?, index()?);
            let rest: Vec<&str> = it.collect();
            let v = T::parse_mm(&rest).ok_or_else(|| perr(ln, "bad value"))?;
            entries.push((r, c, v));
        }
        if let Some((ln, _)) = body.next() {
            return Err(perr(ln, "more entries than declared"));
        }
        Self::from_triplets(n_rows, n_cols, &entries)
    }
}

impl CsrMatrix<f64> {
    pub fn to_complex(&self) -> CsrMatrix<Complex64> {
        self.map(|v| Complex64::new(v, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    #[test]
    fn duplicates_are_summed() {
        let a = CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.get(0, 0), 3.0);
    }

    #[test]
    fn empty_matrix_gives_zero_product() {
        let a = CsrMatrix::<f64>::from_triplets(3, 3, &[]).unwrap();
        assert_eq!(a.matvec(&[1.0, 2.0, 3.0]), vec![0.0; 3]);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let err = CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, SparseError::OutOfRange { row: 2, .. }));
    }

    #[test]
    fn columns_strictly_increase() {
        let a = CsrMatrix::from_triplets(
            2,
            4,
            &[
                (0, 3, 1.0),
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 3, 1.0),
                (1, 0, 4.0),
            ],
        )
        .unwrap();
        for r in 0..2 {
            let p = a.pattern();
            let cols = &p.col_idx()[p.row_ptr()[r]..p.row_ptr()[r + 1]];
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn matrix_market_round_trip() {
        let a = CsrMatrix::from_triplets(
            2,
            3,
            &[(0, 0, C::new(1.5, -2.0)), (1, 2, C::new(0.0, 3.25))],
        )
        .unwrap();
        let text = a.to_matrix_market();
        let b = CsrMatrix::<C>::from_matrix_market(&text).unwrap();
        assert_eq!(b.to_dense(), a.to_dense());
        assert!(CsrMatrix::<f64>::from_matrix_market(&text).is_err());
        assert!(CsrMatrix::<f64>::from_matrix_market(
            "%%MatrixMarket matrix coordinate real general\n1 1 1\n0 1 2.0\n"
        )
        .is_err());
    }

    #[test]
    fn linear_combination_requires_shared_pattern() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(
            CsrMatrix::linear_combination(&[(1.0, &a), (1.0, &b)]).unwrap_err(),
            SparseError::PatternMismatch
        );
        let c = CsrMatrix::linear_combination(&[(2.0, &a), (-0.5, &a)]).unwrap();
        assert_eq!(c.get(1, 1), 1.5);
    }
}
