//! Dense column-major tensors and matrices.
//!
//! Every buffer in the crate uses the same linearization: the first index
//! varies fastest. Modes are zero-based. Unfoldings put the selected mode on
//! the rows and the remaining modes, in ascending order, on the columns.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// N-dimensional dense array of `f64` in column-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Dense column-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::shape("a tensor needs at least one mode"));
    }
    if let Some(k) = shape.iter().position(|&e| e == 0) {
        return Err(Error::shape(format!("mode {k} has zero extent in {shape:?}")));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::shape(format!("extent product overflows for {shape:?}")))
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if len != data.len() {
            return Err(Error::shape(format!("shape {shape:?} needs {len} entries, got {}", data.len())));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = check_shape(&shape)?;
        Ok(DenseTensor { shape, data: vec![0.0; len] })
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_shape(&shape)?;
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..len {
            data.push(f(&idx));
            increment(&mut idx, &shape);
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Column-major linear offset of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &e) in idx.iter().zip(&self.shape) {
            debug_assert!(i < e);
            off += i * stride;
            stride *= e;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn reshape(&self, new_shape: &[usize]) -> Result<DenseTensor> {
        self.clone().into_reshape(new_shape)
    }

    /// Replaces the shape metadata without touching the buffer.
    pub fn into_reshape(self, new_shape: &[usize]) -> Result<DenseTensor> {
        let len = check_shape(new_shape)?;
        if len != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} ({} entries) into {new_shape:?} ({len} entries)",
                self.shape,
                self.data.len()
            )));
        }
        Ok(DenseTensor { shape: new_shape.to_vec(), data: self.data })
    }

    /// Reorders modes: output mode `k` is input mode `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<DenseTensor> {
        let n = self.order();
        if perm.len() != n {
            return Err(Error::invalid(format!("permutation {perm:?} has length {}, tensor order is {n}", perm.len())));
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(Error::invalid(format!("{perm:?} is not a permutation of 0..{n}")));
            }
            seen[p] = true;
        }
        if perm.iter().enumerate().all(|(k, &p)| k == p) {
            return Ok(self.clone());
        }

        let in_strides = strides(&self.shape);
        let out_shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let step: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; n];
        let mut src = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[src]);
            // odometer over the output index, tracking the source offset
            for k in 0..n {
                idx[k] += 1;
                src += step[k];
                if idx[k] < out_shape[k] {
                    break;
                }
                src -= step[k] * out_shape[k];
                idx[k] = 0;
            }
        }
        Ok(DenseTensor { shape: out_shape, data })
    }

    /// Mode-`mode` matricization.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        let n = self.order();
        if mode >= n {
            return Err(Error::invalid(format!("mode {mode} out of range for order {n}")));
        }
        let rows = self.shape[mode];
        let cols = self.data.len() / rows;
        let perm = mode_first(n, mode);
        let moved = self.permute(&perm)?;
        Ok(Matrix { rows, cols, data: moved.data })
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<DenseTensor> {
        let len = check_shape(shape)?;
        if mode >= shape.len() {
            return Err(Error::invalid(format!("mode {mode} out of range for order {}", shape.len())));
        }
        if m.rows != shape[mode] || m.rows * m.cols != len {
            return Err(Error::shape(format!(
                "{}x{} matrix cannot fold into {shape:?} along mode {mode}",
                m.rows, m.cols
            )));
        }
        let perm = mode_first(shape.len(), mode);
        let moved_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let moved = DenseTensor { shape: moved_shape, data: m.data.clone() };
        moved.permute(&inverse_permutation(&perm))
    }

    /// Multiplies `m` into mode `mode`: the result's mode-`mode` unfolding is `m * self_(mode)`.
    pub fn mode_product(&self, m: &Matrix, mode: usize) -> Result<DenseTensor> {
        let unfolded = self.unfold(mode)?;
        if m.cols != unfolded.rows {
            return Err(Error::shape(format!(
                "{}x{} matrix cannot multiply mode {mode} of extent {}",
                m.rows, m.cols, unfolded.rows
            )));
        }
        let product = m.matmul(&unfolded)?;
        let mut shape = self.shape.clone();
        shape[mode] = m.rows;
        DenseTensor::fold(&product, mode, &shape)
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::shape(format!("cannot subtract {:?} from {:?}", other.shape, self.shape)));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseTensor { shape: self.shape.clone(), data })
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!("matrix extents must be positive, got {rows}x{cols}")));
        }
        if rows * cols != data.len() {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::shape("ragged rows"));
        }
        let m = Matrix::from_fn(r, c, |i, j| rows[i][j]);
        Matrix::new(r, c, m.data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i + j * self.rows] = value;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.cols).map(|j| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        gemm(self, false, other, false)
    }

    /// `selfᵀ * other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        gemm(self, true, other, false)
    }

    /// `self * otherᵀ` without materializing the transpose.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        gemm(self, false, other, true)
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Trace inner product `trace(selfᵀ other)`.
    pub fn dot(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += alpha * b);
    }

    pub fn scaled(mut self, alpha: f64) -> Matrix {
        self.data.iter_mut().for_each(|v| *v *= alpha);
        self
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self.data[i + i * self.rows] += value;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn into_tensor(self) -> DenseTensor {
        DenseTensor { shape: vec![self.rows, self.cols], data: self.data }
    }

    pub fn from_tensor(t: &DenseTensor) -> Result<Matrix> {
        match t.shape() {
            [r, c] => Matrix::new(*r, *c, t.data.clone()),
            s => Err(Error::shape(format!("expected an order-2 tensor, got shape {s:?}"))),
        }
    }
}

/// Column chunk width used when splitting a product across threads. Fixed so
/// that the partition, and therefore every output entry, does not depend on
/// the size of the thread pool.
const GEMM_CHUNK: usize = 64;
const GEMM_PARALLEL_FLOPS: usize = 1 << 21;

/// `op(a) * op(b)` where `op` optionally transposes.
pub fn gemm(a: &Matrix, trans_a: bool, b: &Matrix, trans_b: bool) -> Result<Matrix> {
    let (m, k, rsa, csa) =
        if trans_a { (a.cols, a.rows, a.rows as isize, 1isize) } else { (a.rows, a.cols, 1isize, a.rows as isize) };
    let (kb, n, rsb, csb) =
        if trans_b { (b.cols, b.rows, b.rows as isize, 1isize) } else { (b.rows, b.cols, 1isize, b.rows as isize) };
    if k != kb {
        return Err(Error::shape(format!("inner dimensions differ: {m}x{k} times {kb}x{n}")));
    }
    let mut c = Matrix::zeros(m, n);
    let kernel = |c_chunk: &mut [f64], col0: usize| {
        let ncols = c_chunk.len() / m;
        // SAFETY: strides describe in-bounds views of `a`, `b` and `c_chunk`;
        // `b` is offset to the first column of this chunk.
        unsafe {
            matrixmultiply::dgemm(
                m,
                k,
                ncols,
                1.0,
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr().offset(col0 as isize * csb),
                rsb,
                csb,
                0.0,
                c_chunk.as_mut_ptr(),
                1,
                m as isize,
            );
        }
    };
    if m * n * k >= GEMM_PARALLEL_FLOPS && n > GEMM_CHUNK {
        c.data.par_chunks_mut(m * GEMM_CHUNK).enumerate().for_each(|(i, chunk)| kernel(chunk, i * GEMM_CHUNK));
    } else {
        kernel(&mut c.data, 0);
    }
    Ok(c)
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(shape.len());
    let mut acc = 1;
    for &e in shape {
        s.push(acc);
        acc *= e;
    }
    s
}

/// Advances a column-major multi-index by one; wraps to zero after the last entry.
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for (i, &e) in idx.iter_mut().zip(shape) {
        *i += 1;
        if *i < e {
            return;
        }
        *i = 0;
    }
}

fn mode_first(n: usize, mode: usize) -> Vec<usize> {
    std::iter::once(mode).chain((0..n).filter(|&k| k != mode)).collect()
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}
