//! Square matrices acting on a single factor block (the x or the v side).
//!
//! Discretization operators are either diagonal (masses, velocity and field
//! multipliers), banded stencils stored in CSR form, or dense (Fourier
//! differentiation). All three share the same matvec interface.

use ndarray::{Array1, Array2, ArrayView1};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl SparseMatrix {
    /// Assembles from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros are dropped.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(i, j, v) in triplets {
            assert!(i < n_rows && j < n_cols, "triplet ({i}, {j}) out of bounds");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for (j, v) in row {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            for (j, v) in merged {
                if v != 0.0 {
                    indices.push(j);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            n_rows,
            n_cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// True when every stored entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Iterates over the stored `(col, value)` entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.data[span].iter().copied())
    }

    pub fn matvec(&self, x: ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.n_cols);
        Array1::from_shape_fn(self.n_rows, |i| {
            self.row(i).map(|(j, v)| v * x[j]).sum()
        })
    }

    pub fn matvec_transpose(&self, x: ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut out = Array1::zeros(self.n_cols);
        for i in 0..self.n_rows {
            let xi = x[i];
            for (j, v) in self.row(i) {
                out[j] += v * xi;
            }
        }
        out
    }

    /// Kronecker product `a ⊗ b` with row-major index `i_a * n_b + i_b`.
    pub fn kron(a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(a.nnz() * b.nnz());
        for ia in 0..a.n_rows {
            for (ja, va) in a.row(ia) {
                for ib in 0..b.n_rows {
                    for (jb, vb) in b.row(ib) {
                        triplets.push((ia * b.n_rows + ib, ja * b.n_cols + jb, va * vb));
                    }
                }
            }
        }
        SparseMatrix::from_triplets(a.n_rows * b.n_rows, a.n_cols * b.n_cols, &triplets)
    }

    /// Left-multiplies by `diag(d)`.
    pub fn scale_rows(&self, d: ArrayView1<f64>) -> SparseMatrix {
        assert_eq!(d.len(), self.n_rows);
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.data[k] *= d[i];
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n_rows, self.n_cols));
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                m[[i, j]] += v;
            }
        }
        m
    }
}

/// A square matrix acting on one factor block.
#[derive(Debug, Clone, PartialEq)]
pub enum FactorMatrix {
    Diagonal(Array1<f64>),
    Sparse(SparseMatrix),
    Dense(Array2<f64>),
}

impl FactorMatrix {
    pub fn identity(n: usize) -> Self {
        FactorMatrix::Diagonal(Array1::ones(n))
    }

    pub fn dim(&self) -> usize {
        match self {
            FactorMatrix::Diagonal(d) => d.len(),
            FactorMatrix::Sparse(s) => s.n_rows(),
            FactorMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn is_square(&self) -> bool {
        match self {
            FactorMatrix::Diagonal(_) => true,
            FactorMatrix::Sparse(s) => s.n_rows() == s.n_cols(),
            FactorMatrix::Dense(m) => m.is_square(),
        }
    }

    /// True when every stored entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        match self {
            FactorMatrix::Diagonal(d) => d.iter().all(|&v| v == 0.0),
            FactorMatrix::Sparse(s) => s.is_zero(),
            FactorMatrix::Dense(m) => m.iter().all(|&v| v == 0.0),
        }
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self {
            FactorMatrix::Diagonal(d) => &x * d,
            FactorMatrix::Sparse(s) => s.matvec(x),
            FactorMatrix::Dense(m) => m.dot(&x),
        }
    }

    pub fn apply_transpose(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self {
            FactorMatrix::Diagonal(d) => &x * d,
            FactorMatrix::Sparse(s) => s.matvec_transpose(x),
            FactorMatrix::Dense(m) => m.t().dot(&x),
        }
    }

    pub fn scaled(&self, c: f64) -> FactorMatrix {
        match self {
            FactorMatrix::Diagonal(d) => FactorMatrix::Diagonal(d * c),
            FactorMatrix::Sparse(s) => FactorMatrix::Sparse(s.scaled(c)),
            FactorMatrix::Dense(m) => FactorMatrix::Dense(m * c),
        }
    }

    /// Left-multiplies by `diag(d)`; used to turn stencils into mass-weighted matrices.
    pub fn scale_rows(&self, d: ArrayView1<f64>) -> FactorMatrix {
        match self {
            FactorMatrix::Diagonal(diag) => FactorMatrix::Diagonal(diag * &d),
            FactorMatrix::Sparse(s) => FactorMatrix::Sparse(s.scale_rows(d)),
            FactorMatrix::Dense(m) => {
                let mut out = m.clone();
                for (mut row, &di) in out.rows_mut().into_iter().zip(d.iter()) {
                    row *= di;
                }
                FactorMatrix::Dense(out)
            }
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            FactorMatrix::Diagonal(d) => Array2::from_diag(d),
            FactorMatrix::Sparse(s) => s.to_dense(),
            FactorMatrix::Dense(m) => m.clone(),
        }
    }
}

/// `Σ_i w_i a_i b_i`.
pub fn weighted_dot(w: &Array1<f64>, a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    debug_assert!(w.len() == a.len() && a.len() == b.len());
    w.iter()
        .zip(a.iter())
        .zip(b.iter())
        .map(|((w, a), b)| w * a * b)
        .sum()
}
