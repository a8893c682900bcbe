//! Dense order-d tensors in row-major layout and the block-circulant
//! reference operators.
//!
//! Row-major with the last index fastest means every `(i1, i2)` tube over the
//! trailing modes is a contiguous run of `m3 * ... * md` values, which is the
//! layout the trailing-mode DFT wants.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Materialized circulant oracles refuse to build matrices larger than this.
pub const ORACLE_MAX_ELEMENTS: usize = 1_000_000;

/// Extents `(m1, ..., md)` of a tensor with `d >= 2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    numel: usize,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.len() < 2 {
            return Err(Error::InvalidShape { dims, reason: "order must be at least 2" });
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidShape { dims, reason: "every extent must be positive" });
        }
        let mut numel: usize = 1;
        for &d in &dims {
            numel = numel.checked_mul(d).ok_or_else(|| {
                Error::Size(format!("element count of {dims:?} overflows usize"))
            })?;
        }
        // Payloads are addressed in bytes by the file format and by Vec<f64>.
        if numel.checked_mul(16).is_none() {
            return Err(Error::Size(format!("element count of {dims:?} is not addressable")));
        }
        Ok(Self { dims, numel })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn numel(&self) -> usize {
        self.numel
    }

    pub fn m1(&self) -> usize {
        self.dims[0]
    }

    pub fn m2(&self) -> usize {
        self.dims[1]
    }

    /// Extents of modes 3..d (empty for matrices).
    pub fn trailing(&self) -> &[usize] {
        &self.dims[2..]
    }

    /// `m = m3 * ... * md`, the number of face slices (1 for matrices).
    pub fn face_count(&self) -> usize {
        self.trailing().iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len() - 1).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.dims.len(), "index order mismatch");
        let mut lin = 0;
        for (k, (&i, &d)) in index.iter().zip(&self.dims).enumerate() {
            assert!(i < d, "index {i} out of range for mode {k} of extent {d}");
            lin = lin * d + i;
        }
        lin
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            out[k] = lin % self.dims[k];
            lin /= self.dims[k];
        }
        out
    }

    /// Shape with the first two extents replaced.
    pub fn with_leading(&self, m1: usize, m2: usize) -> Result<Self> {
        let mut dims = self.dims.clone();
        dims[0] = m1;
        dims[1] = m2;
        Shape::new(dims)
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

/// Dense real tensor; entries are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.numel()];
        Self { shape, data }
    }

    pub fn filled(shape: Shape, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        let data = vec![value; shape.numel()];
        Ok(Self { shape, data })
    }

    pub fn ones(shape: Shape) -> Self {
        let data = vec![1.0; shape.numel()];
        Self { shape, data }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::Size(format!(
                "payload of {} values does not fill shape {shape} ({} values)",
                data.len(),
                shape.numel()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    /// Builds a tensor entry by entry from its multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.numel());
        let mut idx = vec![0usize; shape.order()];
        for _ in 0..shape.numel() {
            data.push(f(&idx));
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape.dims()[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Self::from_vec(shape, data)
    }

    /// Wraps data known to be finite (internal arithmetic on finite inputs).
    pub(crate) fn from_raw(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.numel());
        Self { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.shape.linear_index(index)]
    }

    /// Panics on an out-of-range index or a non-finite value.
    pub fn set(&mut self, index: &[usize], value: f64) {
        assert!(value.is_finite(), "tensor entries must be finite");
        let lin = self.shape.linear_index(index);
        self.data[lin] = value;
    }

    pub fn reshape(self, shape: Shape) -> Result<Self> {
        if shape.numel() != self.shape.numel() {
            return Err(Error::ShapeMismatch {
                left: self.shape.dims().to_vec(),
                right: shape.dims().to_vec(),
            });
        }
        Ok(Self { shape, data: self.data })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                left: self.dims().to_vec(),
                right: other.dims().to_vec(),
            });
        }
        Ok(())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self::from_vec(self.shape.clone(), data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_vec(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::from_raw(self.shape.clone(), self.data.iter().map(|v| v * alpha).collect())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||self - other||_F`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Face slice `X(:, :, i3, ..., id)` addressed by its linear trailing index.
    pub fn face(&self, face: usize) -> Result<DenseTensor> {
        let m = self.shape.face_count();
        if face >= m {
            return Err(Error::IndexOutOfRange { index: face, extent: m });
        }
        let (m1, m2) = (self.shape.m1(), self.shape.m2());
        let data = (0..m1 * m2).map(|ij| self.data[ij * m + face]).collect();
        Ok(Self::from_raw(Shape::new(vec![m1, m2])?, data))
    }

    /// Block-circulant matrix of size `(m1 * m) x (m2 * m)`.
    ///
    /// Block `(R, C)` holds the face whose trailing index is
    /// `(b3 - c3 mod m3, ..., bd - cd mod md)`, where `R` and `C` are the
    /// row-major linear indices of `(b3..bd)` and `(c3..cd)`; this is the
    /// nested `circ` layout applied once per trailing mode.
    pub fn bcirc(&self) -> Result<DenseTensor> {
        if self.shape.order() < 3 {
            return Err(Error::Order { required: 3, actual: self.shape.order() });
        }
        let (m1, m2, m) = (self.shape.m1(), self.shape.m2(), self.shape.face_count());
        let rows = m1 * m;
        let cols = m2 * m;
        oracle_size_check(rows, cols)?;
        let trailing = TrailingIndexer::new(self.shape.trailing());
        let mut out = vec![0.0; rows * cols];
        for rb in 0..m {
            for cb in 0..m {
                let f = trailing.difference(rb, cb);
                for i in 0..m1 {
                    for j in 0..m2 {
                        out[(rb * m1 + i) * cols + cb * m2 + j] = self.data[(i * m2 + j) * m + f];
                    }
                }
            }
        }
        Ok(Self::from_raw(Shape::new(vec![rows, cols])?, out))
    }

    /// Stacks the face slices vertically into an `(m1 * m) x m2` matrix.
    pub fn bunfold(&self) -> Result<DenseTensor> {
        if self.shape.order() < 3 {
            return Err(Error::Order { required: 3, actual: self.shape.order() });
        }
        let (m1, m2, m) = (self.shape.m1(), self.shape.m2(), self.shape.face_count());
        oracle_size_check(m1 * m, m2)?;
        let mut out = vec![0.0; m1 * m * m2];
        for f in 0..m {
            for i in 0..m1 {
                for j in 0..m2 {
                    out[(f * m1 + i) * m2 + j] = self.data[(i * m2 + j) * m + f];
                }
            }
        }
        Ok(Self::from_raw(Shape::new(vec![m1 * m, m2])?, out))
    }

    /// Inverse of [`DenseTensor::bunfold`].
    pub fn bfold(matrix: &DenseTensor, shape: &Shape) -> Result<DenseTensor> {
        if shape.order() < 3 {
            return Err(Error::Order { required: 3, actual: shape.order() });
        }
        let (m1, m2, m) = (shape.m1(), shape.m2(), shape.face_count());
        if matrix.shape.order() != 2 || matrix.dims() != [m1 * m, m2] {
            return Err(Error::ShapeMismatch {
                left: matrix.dims().to_vec(),
                right: vec![m1 * m, m2],
            });
        }
        let mut out = vec![0.0; shape.numel()];
        for f in 0..m {
            for i in 0..m1 {
                for j in 0..m2 {
                    out[(i * m2 + j) * m + f] = matrix.data[(f * m1 + i) * m2 + j];
                }
            }
        }
        Ok(Self::from_raw(shape.clone(), out))
    }

    /// Plain matrix product of two order-2 tensors.
    pub fn matmul(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape.order() != 2 || other.shape.order() != 2 || self.dims()[1] != other.dims()[0]
        {
            return Err(Error::ShapeMismatch {
                left: self.dims().to_vec(),
                right: other.dims().to_vec(),
            });
        }
        let (n, p, q) = (self.dims()[0], self.dims()[1], other.dims()[1]);
        let mut out = vec![0.0; n * q];
        for i in 0..n {
            for l in 0..p {
                let a = self.data[i * p + l];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[l * q..(l + 1) * q];
                for (o, b) in out[i * q..(i + 1) * q].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self::from_raw(Shape::new(vec![n, q])?, out))
    }
}

fn oracle_size_check(rows: usize, cols: usize) -> Result<()> {
    match rows.checked_mul(cols) {
        Some(n) if n <= ORACLE_MAX_ELEMENTS => Ok(()),
        _ => Err(Error::Size(format!(
            "materialized circulant of {rows}x{cols} exceeds {ORACLE_MAX_ELEMENTS} elements"
        ))),
    }
}

/// Arithmetic on row-major linear indices over the trailing extents.
#[derive(Clone, Debug)]
pub(crate) struct TrailingIndexer {
    dims: Vec<usize>,
}

impl TrailingIndexer {
    pub(crate) fn new(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec() }
    }

    fn combine(&self, a: usize, b: usize, op: impl Fn(usize, usize, usize) -> usize) -> usize {
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut place = 1;
        for &d in self.dims.iter().rev() {
            out += op(a % d, b % d, d) * place;
            place *= d;
            a /= d;
            b /= d;
        }
        out
    }

    /// Per-mode `(a - b) mod m_j`.
    pub(crate) fn difference(&self, a: usize, b: usize) -> usize {
        self.combine(a, b, |x, y, d| (x + d - y) % d)
    }

    /// Per-mode `-a mod m_j`: the face holding the complex conjugate spectrum.
    pub(crate) fn negate(&self, a: usize) -> usize {
        self.combine(a, 0, |x, _, d| (d - x) % d)
    }
}

/// Dense complex tensor with the same layout as [`DenseTensor`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexTensor {
    shape: Shape,
    data: Vec<Complex64>,
}

impl ComplexTensor {
    pub fn zeros(shape: Shape) -> Self {
        let data = vec![Complex64::new(0.0, 0.0); shape.numel()];
        Self { shape, data }
    }

    pub fn from_vec(shape: Shape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::Size(format!(
                "payload of {} values does not fill shape {shape}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }


    pub fn from_real(real: &DenseTensor) -> Self {
        let data = real.data().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self { shape: real.shape().clone(), data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, index: &[usize]) -> Complex64 {
        self.data[self.shape.linear_index(index)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Real parts and the Frobenius norm of the imaginary parts.
    pub fn split_real(&self) -> (DenseTensor, f64) {
        let re = self.data.iter().map(|v| v.re).collect();
        let im = self.data.iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
        (DenseTensor::from_raw(self.shape.clone(), re), im)
    }
}
