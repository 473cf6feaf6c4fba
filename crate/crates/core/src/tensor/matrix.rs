use std::fmt;

use crate::error::{Error, Result};

use super::parallelism;

/// Rows per gemm tile. Fixed regardless of thread count so results never
/// depend on `PRNFLD_THREADS`.
const GEMM_CHUNK_ROWS: usize = 64;

/// Dense row-major `f64` matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from row-major data. Rejects wrong lengths and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry {} at flat index {pos}",
                data[pos]
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("Matrix::from_rows", "ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Sum of each column, as a vector of length `cols`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        sums
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// New matrix made of the given columns, in the given order.
    pub fn select_cols(&self, indices: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, indices.len(), |r, c| self.get(r, indices[c]))
    }

    /// Columns `[start, end)`.
    pub fn col_range(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_fn(self.rows, end - start, |r, c| self.get(r, start + c))
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "hcat",
                format!("{} rows vs {} rows", self.rows, other.rows),
            ));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }
}

/// Strided view used to express transposes without copying.
#[derive(Clone, Copy)]
struct View<'a> {
    data: &'a [f64],
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    fn plain(m: &'a Matrix) -> Self {
        View {
            data: &m.data,
            rs: m.cols as isize,
            cs: 1,
        }
    }

    fn transposed(m: &'a Matrix) -> Self {
        View {
            data: &m.data,
            rs: 1,
            cs: m.cols as isize,
        }
    }
}

/// `C = A · B` where A is m×k and B is k×n, both given as strided views.
fn gemm(m: usize, k: usize, n: usize, a: View<'_>, b: View<'_>) -> Matrix {
    let mut out = Matrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return out;
    }
    let run_chunk = |chunk_idx: usize, c: &mut [f64]| {
        let row0 = chunk_idx * GEMM_CHUNK_ROWS;
        let rows = c.len() / n;
        let a_off = row0 as isize * a.rs;
        // SAFETY: every (row, col) addressed through the strides lies inside
        // `a.data` / `b.data` because the views were built from matrices of
        // exactly m×k and k×n; `c` is an exclusive rows×n row-major slice.
        unsafe {
            matrixmultiply::dgemm(
                rows,
                k,
                n,
                1.0,
                a.data.as_ptr().offset(a_off),
                a.rs,
                a.cs,
                b.data.as_ptr(),
                b.rs,
                b.cs,
                0.0,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    };

    let threads = parallelism();
    let chunk_len = GEMM_CHUNK_ROWS * n;
    if threads <= 1 || m <= GEMM_CHUNK_ROWS {
        for (i, c) in out.data.chunks_mut(chunk_len).enumerate() {
            run_chunk(i, c);
        }
    } else {
        let chunks: Vec<(usize, &mut [f64])> = out.data.chunks_mut(chunk_len).enumerate().collect();
        let per_thread = chunks.len().div_ceil(threads);
        let mut groups: Vec<Vec<(usize, &mut [f64])>> = Vec::new();
        let mut iter = chunks.into_iter().peekable();
        while iter.peek().is_some() {
            groups.push(iter.by_ref().take(per_thread).collect());
        }
        std::thread::scope(|scope| {
            for group in groups {
                scope.spawn(|| {
                    for (i, c) in group {
                        run_chunk(i, c);
                    }
                });
            }
        });
    }
    out
}

/// Standard product `a · b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::shape(
            "matmul",
            format!("{}x{} by {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    Ok(gemm(a.rows, a.cols, b.cols, View::plain(a), View::plain(b)))
}

/// `a · bᵀ`.
pub fn matmul_nt(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::shape(
            "matmul_nt",
            format!("{}x{} by ({}x{})ᵀ", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    Ok(gemm(a.rows, a.cols, b.rows, View::plain(a), View::transposed(b)))
}

/// `aᵀ · b`.
pub fn matmul_tn(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(Error::shape(
            "matmul_tn",
            format!("({}x{})ᵀ by {}x{}", a.rows, a.cols, b.rows, b.cols),
        ));
    }
    Ok(gemm(a.cols, a.rows, b.cols, View::transposed(a), View::plain(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RngStream;

    fn naive(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    fn random(rows: usize, cols: usize, rng: &mut RngStream) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.uniform(-1.0, 1.0))
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        assert_eq!(a.shape(), b.shape());
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_product() {
        let id = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(matmul(&id, &b).unwrap(), b);
    }

    #[test]
    fn row_times_column() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn random_product_matches_triple_loop() {
        let mut rng = RngStream::new(7);
        let a = random(7, 5, &mut rng);
        let b = random(5, 3, &mut rng);
        let got = matmul(&a, &b).unwrap();
        assert!(max_abs_diff(&got, &naive(&a, &b)) < 1e-12);
    }

    #[test]
    fn transposed_variants_match_explicit_transpose() {
        let mut rng = RngStream::new(11);
        let a = random(130, 9, &mut rng);
        let b = random(17, 9, &mut rng);
        let nt = matmul_nt(&a, &b).unwrap();
        assert!(max_abs_diff(&nt, &naive(&a, &b.transpose())) < 1e-12);

        let c = random(130, 4, &mut rng);
        let tn = matmul_tn(&a, &c).unwrap();
        assert!(max_abs_diff(&tn, &naive(&a.transpose(), &c)) < 1e-12);
    }

    #[test]
    fn large_chunked_product_matches_triple_loop() {
        let mut rng = RngStream::new(3);
        let a = random(200, 33, &mut rng);
        let b = random(33, 70, &mut rng);
        assert!(max_abs_diff(&matmul(&a, &b).unwrap(), &naive(&a, &b)) < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &b), Err(Error::Shape { .. })));
        assert!(matches!(matmul_tn(&a, &Matrix::zeros(3, 1)), Err(Error::Shape { .. })));
        assert!(matches!(matmul_nt(&a, &Matrix::zeros(1, 2)), Err(Error::Shape { .. })));
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn hcat_and_column_helpers() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = a.hcat(&b).unwrap();
        assert_eq!(c.data(), &[1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        assert_eq!(c.col_range(1, 3).data(), &[2.0, 5.0, 4.0, 6.0]);
        assert_eq!(c.select_cols(&[2, 0]).data(), &[5.0, 1.0, 6.0, 3.0]);
        assert_eq!(c.select_rows(&[1]).data(), &[3.0, 4.0, 6.0]);
        assert_eq!(c.column_sums(), vec![4.0, 6.0, 11.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn associativity(seed in any::<u64>(), m in 1usize..6, k in 1usize..6, l in 1usize..6, n in 1usize..6) {
                let mut rng = RngStream::new(seed);
                let a = random(m, k, &mut rng);
                let b = random(k, l, &mut rng);
                let c = random(l, n, &mut rng);
                let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
                let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
                for (x, y) in left.data().iter().zip(right.data()) {
                    let scale = x.abs().max(y.abs()).max(1.0);
                    prop_assert!((x - y).abs() / scale < 1e-9);
                }
            }
        }
    }
}
