//! Compressed-column sparse matrices and the index-set helpers used by the
//! SPAI construction.
//!
//! Values are always stored as `f64`. A matrix "in precision p" is one whose
//! values are all fixed points of `p.round`.

mod mtx;

pub use mtx::{read_matrix_market, read_matrix_market_file, write_matrix_market};

use serde::{Deserialize, Serialize};

use crate::dd::DoubleDouble;
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::precision::Precision;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowind: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from raw CSC arrays, checking every structural
    /// invariant. Explicit zeros are rejected.
    pub fn from_csc(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowind: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if colptr.len() != ncols + 1 || colptr[0] != 0 {
            return Err(Error::Structure("column offsets have the wrong length".into()));
        }
        if rowind.len() != values.len() || *colptr.last().unwrap() != rowind.len() {
            return Err(Error::Structure("offsets do not match the entry count".into()));
        }
        for j in 0..ncols {
            if colptr[j] > colptr[j + 1] {
                return Err(Error::Structure(format!("offsets decrease at column {j}")));
            }
            let rows = &rowind[colptr[j]..colptr[j + 1]];
            if rows.iter().any(|&i| i >= nrows) {
                return Err(Error::Structure(format!("row index out of range in column {j}")));
            }
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Structure(format!(
                    "row indices not strictly increasing in column {j}"
                )));
            }
        }
        if values.contains(&0.0) {
            return Err(Error::Structure("explicit zero stored".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowind,
            values,
        })
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and entries that end up zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::Dimension(format!(
                    "entry ({i}, {j}) outside a {nrows}x{ncols} matrix"
                )));
            }
            sorted.push((j, i, v));
        }
        // stable sort keeps duplicate summation in input order
        sorted.sort_by_key(|&(j, i, _)| (j, i));
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowind = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut idx = 0;
        while idx < sorted.len() {
            let (j, i, mut v) = sorted[idx];
            idx += 1;
            while idx < sorted.len() && sorted[idx].0 == j && sorted[idx].1 == i {
                v += sorted[idx].2;
                idx += 1;
            }
            if v != 0.0 {
                rowind.push(i);
                values.push(v);
                colptr[j + 1] += 1;
            }
        }
        for j in 0..ncols {
            colptr[j + 1] += colptr[j];
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowind,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowind: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(a: &DenseMatrix) -> Self {
        let mut colptr = vec![0usize; a.ncols() + 1];
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                let v = a[(i, j)];
                if v != 0.0 {
                    rowind.push(i);
                    values.push(v);
                }
            }
            colptr[j + 1] = rowind.len();
        }
        Self {
            nrows: a.nrows(),
            ncols: a.ncols(),
            colptr,
            rowind,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowind(&self) -> &[usize] {
        &self.rowind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.colptr[j]..self.colptr[j + 1];
        (&self.rowind[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.col(j);
        rows.binary_search(&i).map_or(0.0, |p| vals[p])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.rowind {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let colptr = counts.clone();
        let mut next = counts;
        let mut rowind = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let dst = next[i];
                rowind[dst] = j;
                values[dst] = v;
                next[i] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr,
            rowind,
            values,
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.nrows];
        for (&i, &v) in self.rowind.iter().zip(&self.values) {
            sums[i] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.ncols)
            .map(|j| self.col(j).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Applies `f` to every stored value and drops entries that become zero.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SparseMatrix {
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowind = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                let w = f(v);
                if w != 0.0 {
                    rowind.push(i);
                    values.push(w);
                }
            }
            colptr[j + 1] = rowind.len();
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            colptr,
            rowind,
            values,
        }
    }

    /// The matrix with every value rounded to `p` (underflowed entries
    /// removed).
    pub fn rounded(&self, p: Precision) -> SparseMatrix {
        self.map_values(|v| p.round(v))
    }

    /// `A * diag(d)`.
    pub fn scale_columns(&self, d: &[f64]) -> Result<SparseMatrix> {
        if d.len() != self.ncols {
            return Err(Error::Dimension("column scaling vector".into()));
        }
        let mut out = self.clone();
        for j in 0..self.ncols {
            for v in &mut out.values[self.colptr[j]..self.colptr[j + 1]] {
                *v *= d[j];
            }
        }
        Ok(out.map_values(|v| v))
    }

    /// `diag(d) * A`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<SparseMatrix> {
        if d.len() != self.nrows {
            return Err(Error::Dimension("row scaling vector".into()));
        }
        let mut out = self.clone();
        for (i, v) in out.rowind.iter().zip(out.values.iter_mut()) {
            *v *= d[*i];
        }
        Ok(out.map_values(|v| v))
    }

    /// `y = A x` with the entries of `A`, every product and every partial
    /// sum rounded to `p`. Columns are processed left to right and rows in
    /// ascending order within a column. With `QuadEmulated` the sums are
    /// carried in double-double and rounded to double once.
    pub fn matvec(&self, x: &[f64], p: Precision) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::Dimension(format!(
                "matvec of {}x{} matrix with vector of length {}",
                self.nrows,
                self.ncols,
                x.len()
            )));
        }
        let y = match p {
            Precision::Double => {
                let mut y = vec![0.0; self.nrows];
                for (j, &xj) in x.iter().enumerate() {
                    let (rows, vals) = self.col(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        y[i] += v * xj;
                    }
                }
                y
            }
            Precision::QuadEmulated => {
                let mut y = vec![DoubleDouble::ZERO; self.nrows];
                for (j, &xj) in x.iter().enumerate() {
                    let (rows, vals) = self.col(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        y[i] += DoubleDouble::from_product(v, xj);
                    }
                }
                y.into_iter().map(DoubleDouble::to_f64).collect()
            }
            _ => {
                let mut y = vec![0.0; self.nrows];
                for (j, &xj) in x.iter().enumerate() {
                    let (rows, vals) = self.col(j);
                    for (&i, &v) in rows.iter().zip(vals) {
                        y[i] = p.add(y[i], p.mul(p.round(v), xj));
                    }
                }
                y
            }
        };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::overflow(format!("sparse matrix-vector product in {p}")));
        }
        Ok(y)
    }

    /// Dense product `self * b` in double.
    pub fn mul_dense(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.ncols != b.nrows() {
            return Err(Error::Dimension("sparse-dense product".into()));
        }
        let mut out = DenseMatrix::zeros(self.nrows, b.ncols());
        for j in 0..self.ncols {
            let brow = b.row(j).to_vec();
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                for (o, bv) in out.row_mut(i).iter_mut().zip(&brow) {
                    *o += v * bv;
                }
            }
        }
        Ok(out)
    }

    /// Structurally symmetric pattern `A + A^T` as adjacency lists without
    /// self loops.
    pub fn symmetric_adjacency(&self) -> Vec<Vec<usize>> {
        let n = self.nrows.max(self.ncols);
        let mut adj = vec![Vec::new(); n];
        for j in 0..self.ncols {
            for &i in self.col(j).0 {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Sorted, duplicate-free set of indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn singleton(i: usize) -> Self {
        Self(vec![i])
    }

    pub fn from_unsorted(mut v: Vec<usize>) -> Self {
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn range(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Position of `i` within the set.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }

    pub fn insert(&mut self, i: usize) -> bool {
        match self.0.binary_search(&i) {
            Ok(_) => false,
            Err(p) => {
                self.0.insert(p, i);
                true
            }
        }
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (0, 0);
        while a < self.0.len() && b < other.0.len() {
            match self.0[a].cmp(&other.0[b]) {
                std::cmp::Ordering::Less => {
                    out.push(self.0[a]);
                    a += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.0[b]);
                    b += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.0[a]);
                    a += 1;
                    b += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[a..]);
        out.extend_from_slice(&other.0[b..]);
        IndexSet(out)
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Self::from_unsorted(iter.into_iter().collect())
    }
}

/// Diagonal column scaling `D` applied as `A^T D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingInfo {
    /// Diagonal of `D`; `d[j]` is the reciprocal of the largest magnitude in
    /// column `j` of the unscaled matrix.
    pub d: Vec<f64>,
}

impl ScalingInfo {
    pub fn identity(n: usize) -> Self {
        Self { d: vec![1.0; n] }
    }

    /// Undoes the scaling: `scaled * D^{-1}`.
    pub fn unscale(&self, scaled: &SparseMatrix) -> Result<SparseMatrix> {
        let inv: Vec<f64> = self.d.iter().map(|v| 1.0 / v).collect();
        scaled.scale_columns(&inv)
    }
}

/// Rows touched by the columns in `j`: `{ i : sum_{j in J} |a_ij| != 0 }`.
pub fn shadow(a: &SparseMatrix, j: &IndexSet) -> IndexSet {
    let mut rows: Vec<usize> = j.iter().flat_map(|c| a.col(c).0.iter().copied()).collect();
    rows.sort_unstable();
    rows.dedup();
    IndexSet(rows)
}

/// Dense `A(I, J)`.
pub fn extract_submatrix(a: &SparseMatrix, i: &IndexSet, j: &IndexSet) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(i.len(), j.len());
    for (c, col) in j.iter().enumerate() {
        let (rows, vals) = a.col(col);
        for (&r, &v) in rows.iter().zip(vals) {
            if let Some(pos) = i.position(r) {
                out[(pos, c)] = v;
            }
        }
    }
    out
}

/// Scales every column so its largest magnitude is exactly one.
pub fn column_scale(at: &SparseMatrix) -> Result<(SparseMatrix, ScalingInfo)> {
    let mut d = Vec::with_capacity(at.ncols());
    let mut scaled = at.clone();
    for j in 0..at.ncols() {
        let (_, vals) = at.col(j);
        let m = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if m == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        d.push(1.0 / m);
        for v in &mut scaled.values[at.colptr[j]..at.colptr[j + 1]] {
            *v /= m;
        }
    }
    Ok((scaled, ScalingInfo { d }))
}
