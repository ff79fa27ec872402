//! Dense row-major `f64` matrices and the forward kernels shared by the tape.
//!
//! Column vectors are `n x 1` matrices. Every op here is pure; recording for
//! differentiation happens in [`crate::autodiff`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Default negative slope for [`Activation::LeakyRelu`].
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{}, {:?})", self.rows, self.cols, self.data)
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        DenseMatrix { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input, so it is
    /// meant for literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        DenseMatrix { rows: rows.len(), cols, data }
    }

    /// Column vector.
    pub fn column(values: &[f64]) -> Self {
        DenseMatrix { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn scalar(value: f64) -> Self {
        DenseMatrix { rows: 1, cols: 1, data: vec![value] }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| f64::max(acc, (a - b).abs()))
    }

    /// `self += other`, same shape.
    pub fn add_assign(&mut self, other: &DenseMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// `self += scale * other`, same shape.
    pub fn axpy(&mut self, scale: f64, other: &DenseMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }
}

fn check_same(op: &'static str, a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension { op, left: a.shape(), right: b.shape() });
    }
    Ok(())
}

pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::Dimension { op: "matmul", left: a.shape(), right: b.shape() });
    }
    let mut out = DenseMatrix::zeros(a.rows, b.cols);
    matmul_into(a, b, &mut out);
    Ok(out)
}

/// `out += a * b` without shape checks.
pub(crate) fn matmul_into(a: &DenseMatrix, b: &DenseMatrix, out: &mut DenseMatrix) {
    let (n, k, m) = (a.rows, a.cols, b.cols);
    if m == 1 {
        for i in 0..n {
            let row = &a.data[i * k..(i + 1) * k];
            let mut acc = 0.0;
            for (x, y) in row.iter().zip(&b.data) {
                acc += x * y;
            }
            out.data[i] += acc;
        }
        return;
    }
    for i in 0..n {
        for p in 0..k {
            let aip = a.data[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b.data[p * m..(p + 1) * m];
            let orow = &mut out.data[i * m..(i + 1) * m];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

pub fn add(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_same("add", a, b)?;
    let mut out = a.clone();
    out.add_assign(b);
    Ok(out)
}

pub fn sub(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_same("sub", a, b)?;
    let mut out = a.clone();
    out.axpy(-1.0, b);
    Ok(out)
}

/// Element-wise (Hadamard) product.
pub fn hadamard(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_same("hadamard", a, b)?;
    let mut out = a.clone();
    for (x, y) in out.data.iter_mut().zip(&b.data) {
        *x *= y;
    }
    Ok(out)
}

pub fn scale(a: &DenseMatrix, s: f64) -> DenseMatrix {
    a.map(|x| x * s)
}

/// Point-wise activation functions used by the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    LeakyRelu(f64),
}

impl Activation {
    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE)
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => libm::tanh(x),
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
        }
    }

    /// Derivative expressed through the input `x` and the output `y = f(x)`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::LeakyRelu(slope) => {
                if x >= 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn elementwise(act: Activation, x: &DenseMatrix) -> Result<DenseMatrix> {
    if !x.is_finite() {
        return Err(Error::NonFinite { op: "elementwise" });
    }
    Ok(x.map(|v| act.apply(v)))
}

/// Softmax over every entry of `scores`, with max subtraction.
pub fn softmax(scores: &DenseMatrix) -> Result<DenseMatrix> {
    if scores.is_empty() {
        return Err(Error::Domain("softmax of an empty vector"));
    }
    if !scores.is_finite() {
        return Err(Error::NonFinite { op: "softmax" });
    }
    let max = scores.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = scores.map(|s| libm::exp(s - max));
    let total: f64 = out.data.iter().sum();
    out.data.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// Stacks matrices with equal column counts on top of each other.
pub fn concat_rows(parts: &[&DenseMatrix]) -> Result<DenseMatrix> {
    let cols = parts.first().map_or(0, |p| p.cols);
    let mut data = Vec::new();
    let mut rows = 0;
    for p in parts {
        if p.cols != cols {
            return Err(Error::Dimension { op: "concat_rows", left: (rows, cols), right: p.shape() });
        }
        rows += p.rows;
        data.extend_from_slice(&p.data);
    }
    Ok(DenseMatrix { rows, cols, data })
}

/// Places matrices with equal row counts side by side.
pub fn concat_cols(parts: &[&DenseMatrix]) -> Result<DenseMatrix> {
    let rows = parts.first().map_or(0, |p| p.rows);
    let mut cols = 0;
    for p in parts {
        if p.rows != rows {
            return Err(Error::Dimension { op: "concat_cols", left: (rows, cols), right: p.shape() });
        }
        cols += p.cols;
    }
    let mut out = DenseMatrix::zeros(rows, cols);
    let mut offset = 0;
    for p in parts {
        for r in 0..rows {
            let src = &p.data[r * p.cols..(r + 1) * p.cols];
            out.data[r * cols + offset..r * cols + offset + p.cols].copy_from_slice(src);
        }
        offset += p.cols;
    }
    Ok(out)
}

pub fn squared_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}
