//! Compressed sparse row matrices and the sparse LU used for every saddle
//! solve.
//!
//! Assembly goes through [`TripletBuilder`]: entries are sorted by
//! `(row, col)` with a stable sort and summed in insertion order, so the
//! assembled values only depend on the order of the element loop.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{PfError, Result};

#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, val));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over the stored entries of `row`.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[row]..self.row_ptr[row + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let r = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[r.clone()].binary_search(&col) {
            Ok(i) => self.values[r.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.matvec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                b.push(j, i, v);
            }
        }
        b.build()
    }

    /// `self + other` (same shape).
    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        self.add_scaled(other, 1.0)
    }

    pub fn add_scaled(&self, other: &CsrMatrix, scale: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                b.push(i, j, v);
            }
            for (j, v) in other.row(i) {
                b.push(i, j, scale * v);
            }
        }
        b.build()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut col = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                col[j] += v.abs();
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> = self.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| PfError::Internal(format!("sparse conversion failed: {e:?}")))
    }
}

/// Sparse LU factorization (fill-reducing column ordering, partial
/// pivoting) of a square matrix, kept together with the matrix so that
/// residuals and condition estimates can be computed.
pub struct SparseLu {
    matrix: CsrMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    norm_one: f64,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.matrix.nrows).field("nnz", &self.matrix.nnz()).finish()
    }
}

impl SparseLu {
    pub fn factor(matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows != matrix.ncols {
            return Err(PfError::InvalidArgument("LU needs a square matrix".into()));
        }
        let lu = matrix.to_faer()?.sp_lu().map_err(|e| PfError::SingularSystem {
            context: format!("structurally singular matrix ({e:?})"),
            rcond: 0.0,
        })?;
        let norm_one = matrix.norm_one();
        Ok(SparseLu { matrix, lu, norm_one })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    /// Raw solve without residual checking.
    pub fn solve_raw(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_transpose_raw(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_transpose_in_place(x.as_mut());
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solve with up to three steps of iterative refinement. Fails with
    /// [`PfError::SingularSystem`] when the relative residual stays above
    /// `tol` or the solution is not finite.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        self.solve_checked(b, tol, false)
    }

    pub fn solve_transpose(&self, b: &[f64], tol: f64) -> Result<Vec<f64>> {
        self.solve_checked(b, tol, true)
    }

    fn solve_checked(&self, b: &[f64], tol: f64, transpose: bool) -> Result<Vec<f64>> {
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let apply = |x: &[f64]| if transpose { self.matrix.matvec_transpose(x) } else { self.matrix.matvec(x) };
        let inv = |r: &[f64]| if transpose { self.solve_transpose_raw(r) } else { self.solve_raw(r) };
        let mut x = inv(b);
        let mut rel = f64::INFINITY;
        for step in 0..4 {
            if x.iter().any(|v| !v.is_finite()) {
                break;
            }
            let ax = apply(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            rel = norm2(&r) / bnorm;
            if rel <= tol || step == 3 {
                break;
            }
            let dx = inv(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        if rel <= tol {
            Ok(x)
        } else {
            Err(PfError::SingularSystem {
                context: format!("linear residual {rel:e} above tolerance {tol:e}"),
                rcond: self.rcond_estimate(),
            })
        }
    }

    /// Reciprocal 1-norm condition estimate `1 / (‖K‖₁ · est‖K⁻¹‖₁)`, with
    /// the inverse norm from Hager's method plus Higham's alternating test
    /// vector.
    pub fn rcond_estimate(&self) -> f64 {
        let ones = vec![1.0; self.dim()];
        self.rcond_estimate_scaled(&ones, &ones)
    }

    /// Same estimate for the equilibrated matrix `D_r K D_c` with diagonal
    /// row and column scalings.
    pub fn rcond_estimate_scaled(&self, row_scale: &[f64], col_scale: &[f64]) -> f64 {
        let n = self.dim();
        if n == 0 || self.norm_one == 0.0 || row_scale.len() != n || col_scale.len() != n {
            return 0.0;
        }
        let mut col_sums = vec![0.0; n];
        for (i, j, v) in self.matrix.triplets() {
            col_sums[j] += (row_scale[i] * v * col_scale[j]).abs();
        }
        let norm_one = col_sums.iter().cloned().fold(0.0, f64::max);
        // S⁻¹x = D_c⁻¹ K⁻¹ D_r⁻¹ x and S⁻ᵀx = D_r⁻¹ K⁻ᵀ D_c⁻¹ x.
        let solve = |x: &[f64]| -> Vec<f64> {
            let b: Vec<f64> = x.iter().zip(row_scale).map(|(v, r)| v / r).collect();
            self.solve_raw(&b).iter().zip(col_scale).map(|(v, c)| v / c).collect()
        };
        let solve_t = |x: &[f64]| -> Vec<f64> {
            let b: Vec<f64> = x.iter().zip(col_scale).map(|(v, c)| v / c).collect();
            self.solve_transpose_raw(&b).iter().zip(row_scale).map(|(v, r)| v / r).collect()
        };
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = solve(&x);
            if y.iter().any(|v| !v.is_finite()) {
                return 0.0;
            }
            est = y.iter().map(|v| v.abs()).sum::<f64>();
            let xi: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = solve_t(&xi);
            let (j, zmax) = z.iter().enumerate().fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            x = vec![0.0; n];
            x[j] = 1.0;
            last_j = j;
        }
        let alt: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let y = solve(&alt);
        if y.iter().any(|v| !v.is_finite()) {
            return 0.0;
        }
        let alt_est = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        let inv_norm = est.max(alt_est);
        if inv_norm == 0.0 {
            return 0.0;
        }
        1.0 / (norm_one * inv_norm)
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
