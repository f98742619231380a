use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `f64` array of rank 0, 1 or 2.
///
/// Rank-1 tensors behave as a single row and scalars as a 1×1 matrix for
/// every primitive that needs a matrix view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.len() > 2 {
            return Err(Error::Shape(format!("rank {} tensors are not supported", shape.len())));
        }
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::Shape(format!("shape {:?} needs {} values, got {}", shape, expected, values.len())));
        }
        Ok(Tensor { shape, values })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), values: vec![0.0; len] }
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), values: vec![value; len] }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor { shape: vec![], values: vec![value] }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Tensor { shape: vec![values.len()], values }
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], values)
    }

    /// Stacks equal-length rows into a matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape(format!("row {i} has {} values, expected {cols}", r.len())));
            }
            values.extend_from_slice(r);
        }
        Tensor::matrix(rows.len(), cols, values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rows(&self) -> usize {
        match self.shape.len() {
            2 => self.shape[0],
            _ => 1,
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[1],
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.values.len() == 1
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.values.len(), 1);
        self.values[0]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        let c = self.cols();
        self.values.iter().skip(col).step_by(c).copied().collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Numeric(format!("{what}: non-finite value {} at index {i}", self.values[i]))),
        }
    }

    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor { shape, values }
    }
}

/// `out = x · wᵀ` for row-major `x` (n×k) and `w` (m×k).
pub(crate) fn matmul_nt(x: &[f64], w: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    debug_assert_eq!(x.len(), n * k);
    debug_assert_eq!(w.len(), m * k);
    debug_assert_eq!(out.len(), n * m);
    if n == 0 || m == 0 {
        return;
    }
    // SAFETY: slice lengths checked above; strides describe in-bounds views.
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            x.as_ptr(),
            k as isize,
            1,
            w.as_ptr(),
            1,
            k as isize,
            0.0,
            out.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

/// `out += a · b` for row-major `a` (n×k) and `b` (k×m).
pub(crate) fn matmul_nn_acc(a: &[f64], b: &[f64], n: usize, k: usize, m: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * k);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(out.len(), n * m);
    if n == 0 || m == 0 {
        return;
    }
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            n,
            k,
            m,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            m as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            m as isize,
            1,
        );
    }
}

/// `out += aᵀ · b` for row-major `a` (n×m) and `b` (n×k); `out` is m×k.
pub(crate) fn matmul_tn_acc(a: &[f64], b: &[f64], n: usize, m: usize, k: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * m);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * k);
    if m == 0 || k == 0 {
        return;
    }
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            n,
            k,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            k as isize,
            1,
            1.0,
            out.as_mut_ptr(),
            k as isize,
            1,
        );
    }
}
