//! t-SVD algebra over the trailing-mode Fourier domain.
//!
//! Every operator here works the same way: transform modes 3..d with an
//! unnormalized DFT, act on each `m1 x m2` Fourier face independently, and
//! transform back with a `1/m_j` normalization per mode. Real inputs have
//! conjugate-symmetric spectra, so only one face out of each conjugate pair is
//! processed and its partner is filled with the complex conjugate.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self as faer_svd, ComputeSvdVectors};
use faer::diag::Diag;
use faer::{Mat, MatRef, Par};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, DenseTensor, Shape, TrailingIndexer};

type CMat = Mat<Complex64>;

/// Imaginary residue tolerated by [`idft_trailing`], relative to the real part.
pub const IMAG_RESIDUE_TOL: f64 = 1e-9;

fn require_order3(shape: &Shape) -> Result<()> {
    if shape.order() < 3 {
        return Err(Error::Order { required: 3, actual: shape.order() });
    }
    Ok(())
}

/// FFT along every trailing mode of a full row-major buffer.
fn fft_trailing_in_place(buf: &mut [Complex64], dims: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    for axis in 2..dims.len() {
        let n = dims[axis];
        if n == 1 {
            continue;
        }
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let stride: usize = dims[axis + 1..].iter().product();
        if stride == 1 {
            fft.process(buf);
            continue;
        }
        let outer = buf.len() / (n * stride);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for (q, v) in line.iter_mut().enumerate() {
                    *v = buf[base + q * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (q, v) in line.iter().enumerate() {
                    buf[base + q * stride] = *v;
                }
            }
        }
    }
}

/// Unnormalized forward DFT along modes 3..d.
pub fn dft_trailing(a: &DenseTensor) -> Result<ComplexTensor> {
    require_order3(a.shape())?;
    let mut out = ComplexTensor::from_real(a);
    fft_trailing_in_place(out.data_mut(), a.dims(), false);
    Ok(out)
}

/// Inverse of [`dft_trailing`]; fails if the result is not real.
pub fn idft_trailing(spectrum: &ComplexTensor) -> Result<DenseTensor> {
    require_order3(spectrum.shape())?;
    let mut buf = spectrum.clone();
    fft_trailing_in_place(buf.data_mut(), spectrum.shape().dims(), true);
    let scale = 1.0 / spectrum.shape().face_count() as f64;
    for v in buf.data_mut() {
        *v *= scale;
    }
    let (real, residue) = buf.split_real();
    let norm = real.frobenius_norm();
    if residue > IMAG_RESIDUE_TOL * norm && residue > f64::MIN_POSITIVE {
        return Err(Error::ImaginaryResidue { residue, scale: norm });
    }
    if let Some(index) = real.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(real)
}

/// One representative per conjugate pair of Fourier faces.
#[derive(Clone, Copy, Debug)]
struct FaceClass {
    face: usize,
    /// The conjugate partner, `None` when the face is its own conjugate (real).
    partner: Option<usize>,
}

fn face_classes(trailing: &[usize]) -> Vec<FaceClass> {
    let idx = TrailingIndexer::new(trailing);
    let m: usize = trailing.iter().product();
    (0..m)
        .filter_map(|f| {
            let g = idx.negate(f);
            match f.cmp(&g) {
                std::cmp::Ordering::Less => Some(FaceClass { face: f, partner: Some(g) }),
                std::cmp::Ordering::Equal => Some(FaceClass { face: f, partner: None }),
                std::cmp::Ordering::Greater => None,
            }
        })
        .collect()
}

fn read_face(spec: &ComplexTensor, face: usize, real: bool) -> CMat {
    let s = spec.shape();
    let (m1, m2, m) = (s.m1(), s.m2(), s.face_count());
    let data = spec.data();
    CMat::from_fn(m1, m2, |i, j| {
        let v = data[(i * m2 + j) * m + face];
        if real {
            Complex64::new(v.re, 0.0)
        } else {
            v
        }
    })
}

/// Assembles a spectrum from per-representative face matrices, filling
/// conjugate partners so that the inverse transform is real.
fn assemble_spectrum(shape: Shape, faces: Vec<(FaceClass, CMat)>) -> ComplexTensor {
    let (m1, m2, m) = (shape.m1(), shape.m2(), shape.face_count());
    let mut out = ComplexTensor::zeros(shape);
    let data = out.data_mut();
    for (class, mat) in faces {
        debug_assert_eq!(mat.shape(), (m1, m2));
        for i in 0..m1 {
            for j in 0..m2 {
                let v = mat[(i, j)];
                let base = (i * m2 + j) * m;
                match class.partner {
                    Some(g) => {
                        data[base + class.face] = v;
                        data[base + g] = v.conj();
                    }
                    None => data[base + class.face] = Complex64::new(v.re, 0.0),
                }
            }
        }
    }
    out
}

/// Runs `op` on every representative Fourier face, in parallel, preserving order.
fn per_face<T, F>(trailing: &[usize], op: F) -> Result<Vec<(FaceClass, T)>>
where
    T: Send,
    F: Fn(FaceClass) -> Result<T> + Sync,
{
    face_classes(trailing)
        .into_par_iter()
        .map(|c| op(c).map(|v| (c, v)))
        .collect()
}

/// SVD of one Fourier face: `face = u * diag(s) * v^H`, `s` nonincreasing.
/// `u` and `v` are thin or square depending on the request.
#[derive(Clone, Debug)]
pub(crate) struct FaceSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

/// Scalars the facewise SVD runs on: real for self-conjugate faces.
trait FaceScalar: faer::traits::ComplexField<Real = f64> + Copy {
    fn re_part(self) -> f64;
    fn abs_sq(self) -> f64;
    fn to_complex(self) -> Complex64;
    fn mul_pow2(self, e: i32) -> Self;
    fn conjugate(self) -> Self;
}

impl FaceScalar for f64 {
    fn re_part(self) -> f64 {
        self
    }
    fn abs_sq(self) -> f64 {
        self * self
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn mul_pow2(self, e: i32) -> Self {
        self * 2f64.powi(e)
    }
    fn conjugate(self) -> Self {
        self
    }
}

impl FaceScalar for Complex64 {
    fn re_part(self) -> f64 {
        self.re
    }
    fn abs_sq(self) -> f64 {
        self.norm_sqr()
    }
    fn to_complex(self) -> Complex64 {
        self
    }
    fn mul_pow2(self, e: i32) -> Self {
        self * 2f64.powi(e)
    }
    fn conjugate(self) -> Self {
        self.conj()
    }
}

/// Guards against a silently inaccurate decomposition: `sum s^2 = ||A||_F^2`.
fn energy_matches(values: &[f64], frob_sq: f64) -> bool {
    let total: f64 = values.iter().map(|v| v * v).sum();
    (total - frob_sq).abs() <= 1e-10 * frob_sq.max(f64::MIN_POSITIVE)
}

/// One sequential attempt, so that results do not depend on the thread count.
fn svd_once<T: FaceScalar>(a: MatRef<'_, T>, vectors: Option<ComputeSvdVectors>) -> Option<(Vec<f64>, Option<(Mat<T>, Mat<T>)>)> {
    let (m, n) = a.shape();
    let size = m.min(n);
    let mut s = Diag::<T>::zeros(size);
    let (mut u, mut v) = match vectors {
        Some(ComputeSvdVectors::Full) => (Mat::<T>::zeros(m, m), Mat::<T>::zeros(n, n)),
        Some(_) => (Mat::<T>::zeros(m, size), Mat::<T>::zeros(n, size)),
        None => (Mat::<T>::zeros(0, 0), Mat::<T>::zeros(0, 0)),
    };
    let mode = vectors.unwrap_or(ComputeSvdVectors::No);
    let mut buf = MemBuffer::new(faer_svd::svd_scratch::<T>(m, n, mode, mode, Par::Seq, Default::default()));
    let (ur, vr) = if vectors.is_some() { (Some(u.as_mut()), Some(v.as_mut())) } else { (None, None) };
    faer_svd::svd(a, s.as_mut(), ur, vr, Par::Seq, MemStack::new(&mut buf), Default::default()).ok()?;
    let values: Vec<f64> = s.column_vector().iter().map(|x| x.re_part()).collect();
    let frob_sq: f64 = (0..n).map(|j| (0..m).map(|i| a[(i, j)].abs_sq()).sum::<f64>()).sum();
    energy_matches(&values, frob_sq).then_some((values, vectors.map(|_| (u, v))))
}

/// The bidiagonal iteration occasionally fails to converge on matrices with
/// exactly repeated singular values (full circulants). The adjoint, or a
/// power-of-two rescaling, takes a different path and is tried in turn.
fn svd_seq<T: FaceScalar>(a: MatRef<'_, T>, vectors: Option<ComputeSvdVectors>) -> Option<(Vec<f64>, Option<(Mat<T>, Mat<T>)>)> {
    let adj = |m: MatRef<'_, T>| Mat::<T>::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conjugate());
    let adjoint = |r: Option<(Vec<f64>, Option<(Mat<T>, Mat<T>)>)>| r.map(|(s, uv)| (s, uv.map(|(u, v)| (v, u))));
    if let Some(out) = svd_once(a, vectors).or_else(|| adjoint(svd_once(adj(a).as_ref(), vectors))) {
        return Some(out);
    }
    let peak = (0..a.ncols()).flat_map(|j| (0..a.nrows()).map(move |i| (i, j))).map(|(i, j)| a[(i, j)].abs_sq()).fold(0.0, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return None;
    }
    let exp = (0.5 * peak.log2()).ceil() as i32;
    let scaled = Mat::<T>::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].mul_pow2(-exp));
    let unscale = |r: Option<(Vec<f64>, Option<(Mat<T>, Mat<T>)>)>| {
        r.map(|(s, uv)| (s.into_iter().map(|x| x * 2f64.powi(exp)).collect(), uv))
    };
    unscale(svd_once(scaled.as_ref(), vectors)).or_else(|| unscale(adjoint(svd_once(adj(scaled.as_ref()).as_ref(), vectors))))
}

/// Self-conjugate faces are real; they get a real SVD so that their singular
/// vectors stay real and the inverse transform of the factors stays real.
fn face_svd(mat: CMat, real: bool, face: usize, full: bool) -> Result<FaceSvd> {
    let mode = Some(if full { ComputeSvdVectors::Full } else { ComputeSvdVectors::Thin });
    let failed = Error::SvdFailed { face };
    let widen = |m: Mat<f64>| Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].to_complex());
    if real {
        let re = Mat::<f64>::from_fn(mat.nrows(), mat.ncols(), |i, j| mat[(i, j)].re);
        let (s, uv) = svd_seq(re.as_ref(), mode).ok_or(failed)?;
        let (u, v) = uv.expect("vectors requested");
        Ok(FaceSvd { u: widen(u), s, v: widen(v) })
    } else {
        let (s, uv) = svd_seq(mat.as_ref(), mode).ok_or(failed)?;
        let (u, v) = uv.expect("vectors requested");
        Ok(FaceSvd { u, s, v })
    }
}

fn face_singular_values_of(mat: CMat, real: bool, face: usize) -> Result<Vec<f64>> {
    let values = if real {
        let re = Mat::<f64>::from_fn(mat.nrows(), mat.ncols(), |i, j| mat[(i, j)].re);
        svd_seq(re.as_ref(), None).map(|(v, _)| v)
    } else {
        svd_seq(mat.as_ref(), None).map(|(v, _)| v)
    };
    values.ok_or(Error::SvdFailed { face })
}

/// Singular values of every Fourier face (all `m` faces, nonincreasing each).
pub fn face_singular_values(a: &DenseTensor) -> Result<Vec<Vec<f64>>> {
    let spec = dft_trailing(a)?;
    let per = per_face(a.shape().trailing(), |c| {
        face_singular_values_of(read_face(&spec, c.face, c.partner.is_none()), c.partner.is_none(), c.face)
    })?;
    let m = a.shape().face_count();
    let mut out = vec![Vec::new(); m];
    for (c, s) in per {
        if let Some(g) = c.partner {
            out[g] = s.clone();
        }
        out[c.face] = s;
    }
    Ok(out)
}

/// `max(m1, m2) * eps * sigma_max`, with `sigma_max` taken over all faces.
pub fn rank_tolerance(m1: usize, m2: usize, sigma_max: f64) -> f64 {
    m1.max(m2) as f64 * f64::EPSILON * sigma_max
}

fn ranks_from_values(shape: &Shape, values: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let sigma_max = values.iter().flat_map(|s| s.first()).fold(0.0f64, |m, &v| m.max(v));
    let tol = rank_tolerance(shape.m1(), shape.m2(), sigma_max);
    let ranks = values.iter().map(|s| s.iter().filter(|&&v| v > tol).count()).collect();
    (ranks, tol)
}

/// Rank of each Fourier face.
pub fn multi_rank(a: &DenseTensor) -> Result<Vec<usize>> {
    let values = face_singular_values(a)?;
    Ok(ranks_from_values(a.shape(), &values).0)
}

/// Number of nonzero singular tubes, i.e. the largest Fourier-face rank.
pub fn tubal_rank(a: &DenseTensor) -> Result<usize> {
    Ok(multi_rank(a)?.into_iter().max().unwrap_or(0))
}

pub fn multi_rank_sum(a: &DenseTensor) -> Result<usize> {
    Ok(multi_rank(a)?.into_iter().sum())
}

/// Tensor nuclear norm: `(1/m) * sum of all Fourier-face singular values`.
pub fn tnn(a: &DenseTensor) -> Result<f64> {
    let values = face_singular_values(a)?;
    let m = a.shape().face_count() as f64;
    Ok(values.iter().flatten().sum::<f64>() / m)
}

/// Largest singular value over all Fourier faces.
pub fn spectral_norm(a: &DenseTensor) -> Result<f64> {
    let values = face_singular_values(a)?;
    Ok(values.iter().flat_map(|s| s.first()).fold(0.0, |m, &v| m.max(v)))
}

/// t-product `a * b` computed facewise in the Fourier domain.
pub fn t_product(a: &DenseTensor, b: &DenseTensor) -> Result<DenseTensor> {
    require_order3(a.shape())?;
    require_order3(b.shape())?;
    if a.shape().m2() != b.shape().m1() || a.shape().trailing() != b.shape().trailing() {
        return Err(Error::ShapeMismatch { left: a.dims().to_vec(), right: b.dims().to_vec() });
    }
    let (sa, sb) = (dft_trailing(a)?, dft_trailing(b)?);
    let faces = per_face(a.shape().trailing(), |c| {
        let real = c.partner.is_none();
        Ok(read_face(&sa, c.face, real) * read_face(&sb, c.face, real))
    })?;
    let out_shape = a.shape().with_leading(a.shape().m1(), b.shape().m2())?;
    idft_trailing(&assemble_spectrum(out_shape, faces))
}

/// t-transpose: swap modes 1 and 2 and reverse slices `2..m_j` of every
/// trailing mode, i.e. face `f` of the result is the transpose of face `-f`.
pub fn transpose(a: &DenseTensor) -> Result<DenseTensor> {
    require_order3(a.shape())?;
    let s = a.shape();
    let (m1, m2, m) = (s.m1(), s.m2(), s.face_count());
    let idx = TrailingIndexer::new(s.trailing());
    let src = a.data();
    let mut out = vec![0.0; s.numel()];
    for f in 0..m {
        let g = idx.negate(f);
        for i in 0..m1 {
            for j in 0..m2 {
                out[(j * m1 + i) * m + f] = src[(i * m2 + j) * m + g];
            }
        }
    }
    Ok(DenseTensor::from_raw(s.with_leading(m2, m1)?, out))
}

/// Identity tensor `m x m x trailing`: first face `I_m`, the rest zero.
pub fn identity_tensor(m: usize, trailing: &[usize]) -> Result<DenseTensor> {
    let mut dims = vec![m, m];
    dims.extend_from_slice(trailing);
    let shape = Shape::new(dims)?;
    let faces = shape.face_count();
    let mut data = vec![0.0; shape.numel()];
    for i in 0..m {
        data[(i * m + i) * faces] = 1.0;
    }
    Ok(DenseTensor::from_raw(shape, data))
}

/// Factors of `X = U * S * V^T`.
#[derive(Clone, Debug)]
pub struct TSvdFactors {
    pub u: DenseTensor,
    pub s: DenseTensor,
    pub v: DenseTensor,
    pub tubal_rank: usize,
    /// Rank of each Fourier face, indexed by linear trailing index.
    pub multi_rank: Vec<usize>,
    /// Threshold below which singular values were counted as zero.
    pub rank_tolerance: f64,
}

impl TSvdFactors {
    pub fn multi_rank_sum(&self) -> usize {
        self.multi_rank.iter().sum()
    }

    /// `U * S * V^T`.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        t_product(&t_product(&self.u, &self.s)?, &transpose(&self.v)?)
    }
}

/// t-SVD from facewise SVDs. The full form has `U: m1 x m1`, `S: m1 x m2`,
/// `V: m2 x m2`; the skinny form keeps the first `tubal_rank` singular tubes.
pub fn t_svd(a: &DenseTensor, skinny: bool) -> Result<TSvdFactors> {
    require_order3(a.shape())?;
    let shape = a.shape().clone();
    let (m1, m2) = (shape.m1(), shape.m2());
    let spec = dft_trailing(a)?;
    let svds = per_face(shape.trailing(), |c| {
        let real = c.partner.is_none();
        face_svd(read_face(&spec, c.face, real), real, c.face, !skinny)
    })?;

    let mut values = vec![Vec::new(); shape.face_count()];
    for (c, f) in &svds {
        values[c.face] = f.s.clone();
        if let Some(g) = c.partner {
            values[g] = f.s.clone();
        }
    }
    let (multi_rank, tol) = ranks_from_values(&shape, &values);
    let tubal = multi_rank.iter().copied().max().unwrap_or(0);
    if skinny && tubal == 0 {
        return Err(Error::ZeroTensor);
    }
    let (ru, rv) = if skinny { (tubal, tubal) } else { (m1, m2) };

    let mut u_faces = Vec::with_capacity(svds.len());
    let mut s_faces = Vec::with_capacity(svds.len());
    let mut v_faces = Vec::with_capacity(svds.len());
    for (c, f) in svds {
        let u = f.u.subcols(0, ru).to_owned();
        let v = f.v.subcols(0, rv).to_owned();
        let mut s = CMat::zeros(ru, rv);
        for (i, &sv) in f.s.iter().enumerate().take(ru.min(rv)) {
            s[(i, i)] = Complex64::new(sv, 0.0);
        }
        u_faces.push((c, u));
        s_faces.push((c, s));
        v_faces.push((c, v));
    }
    Ok(TSvdFactors {
        u: idft_trailing(&assemble_spectrum(shape.with_leading(m1, ru)?, u_faces))?,
        s: idft_trailing(&assemble_spectrum(shape.with_leading(ru, rv)?, s_faces))?,
        v: idft_trailing(&assemble_spectrum(shape.with_leading(m2, rv)?, v_faces))?,
        tubal_rank: tubal,
        multi_rank,
        rank_tolerance: tol,
    })
}

/// Applies `shrink` to the singular values of every Fourier face and
/// rebuilds the tensor. Returns the result and the sum over all faces of its
/// singular values.
fn shrink_faces(a: &DenseTensor, shrink: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Result<(DenseTensor, f64)> {
    require_order3(a.shape())?;
    let spec = dft_trailing(a)?;
    let faces = per_face(a.shape().trailing(), |c| {
        let real = c.partner.is_none();
        let f = face_svd(read_face(&spec, c.face, real), real, c.face, false)?;
        let shrunk = shrink(&f.s);
        let us = CMat::from_fn(f.u.nrows(), f.u.ncols(), |i, j| f.u[(i, j)] * shrunk[j]);
        let weight = if c.partner.is_some() { 2.0 } else { 1.0 };
        let total: f64 = shrunk.iter().sum::<f64>() * weight;
        Ok((&us * f.v.adjoint(), total))
    })?;
    let total = faces.iter().map(|(_, (_, t))| t).sum();
    let faces = faces.into_iter().map(|(c, (m, _))| (c, m)).collect();
    Ok((idft_trailing(&assemble_spectrum(a.shape().clone(), faces))?, total))
}

/// Tensor singular value thresholding: soft-threshold every Fourier-face
/// singular value by `tau`. This is the proximal operator of `tau * tnn`.
pub fn t_svt(a: &DenseTensor, tau: f64) -> Result<DenseTensor> {
    Ok(t_svt_with_norm(a, tau)?.0)
}

/// [`t_svt`] together with the tensor nuclear norm of its output.
pub fn t_svt_with_norm(a: &DenseTensor, tau: f64) -> Result<(DenseTensor, f64)> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("threshold must be finite and >= 0, got {tau}")));
    }
    let (y, total) = shrink_faces(a, |s| s.iter().map(|&v| (v - tau).max(0.0)).collect())?;
    Ok((y, total / a.shape().face_count() as f64))
}

/// Matrix singular value thresholding of a row-major `rows x cols` matrix.
/// Returns the result (row-major) and its nuclear norm.
pub fn matrix_svt(data: &[f64], rows: usize, cols: usize, tau: f64) -> Result<(Vec<f64>, f64)> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("threshold must be finite and >= 0, got {tau}")));
    }
    assert_eq!(data.len(), rows * cols, "matrix buffer length");
    let a = Mat::<f64>::from_fn(rows, cols, |i, j| data[i * cols + j]);
    let (s, uv) = svd_seq(a.as_ref(), Some(ComputeSvdVectors::Thin)).ok_or(Error::SvdFailed { face: 0 })?;
    let (u, v) = uv.expect("vectors requested");
    let shrunk: Vec<f64> = s.iter().map(|&x| (x - tau).max(0.0)).collect();
    let us = Mat::<f64>::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)] * shrunk[j]);
    let y = &us * v.transpose();
    let out = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| y[(i, j)]).collect();
    Ok((out, shrunk.iter().sum()))
}

/// Facewise truncation to at most `r` singular values per Fourier face: the
/// best approximation of tubal rank `<= r` in Frobenius norm.
pub fn truncate_tubal_rank(a: &DenseTensor, r: usize) -> Result<DenseTensor> {
    Ok(shrink_faces(a, |s| s.iter().enumerate().map(|(i, &v)| if i < r { v } else { 0.0 }).collect())?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
        let shape = Shape::new(dims.to_vec()).unwrap();
        let n = shape.numel();
        DenseTensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
        a.distance(b).unwrap() / b.frobenius_norm().max(f64::MIN_POSITIVE)
    }

    fn oracle_product(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
        let shape = a.shape().with_leading(a.shape().m1(), b.shape().m2()).unwrap();
        DenseTensor::bfold(&a.bcirc().unwrap().matmul(&b.bunfold().unwrap()).unwrap(), &shape).unwrap()
    }

    #[test]
    fn dft_of_constant() {
        let shape = Shape::new(vec![2, 2, 3, 2]).unwrap();
        let a = DenseTensor::filled(shape, 1.5).unwrap();
        let spec = dft_trailing(&a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for f3 in 0..3 {
                    for f4 in 0..2 {
                        let v = spec.get(&[i, j, f3, f4]);
                        let expect = if f3 == 0 && f4 == 0 { 6.0 * 1.5 } else { 0.0 };
                        assert!((v.re - expect).abs() < 1e-12 && v.im.abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn dft_roundtrip_and_conjugate_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random(&[3, 2, 4, 2], &mut rng);
        let spec = dft_trailing(&a).unwrap();
        let back = idft_trailing(&spec).unwrap();
        assert!(rel(&back, &a) <= 1e-12);
        for i in 0..3 {
            for j in 0..2 {
                for f3 in 0..4 {
                    for f4 in 0..2 {
                        let v = spec.get(&[i, j, f3, f4]);
                        let w = spec.get(&[i, j, (4 - f3) % 4, (2 - f4) % 2]);
                        assert!((v - w.conj()).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn idft_rejects_non_symmetric_spectrum() {
        let shape = Shape::new(vec![1, 1, 3]).unwrap();
        let mut spec = ComplexTensor::zeros(shape);
        spec.data_mut()[1] = Complex64::new(0.0, 1.0);
        assert!(matches!(idft_trailing(&spec), Err(Error::ImaginaryResidue { .. })));
    }

    #[test]
    fn tube_product_matches_circulant() {
        let a = DenseTensor::from_vec(Shape::new(vec![1, 1, 2]).unwrap(), vec![2.0, 3.0]).unwrap();
        let b = DenseTensor::from_vec(Shape::new(vec![1, 1, 2]).unwrap(), vec![5.0, 7.0]).unwrap();
        let c = t_product(&a, &b).unwrap();
        // [[a1, a2], [a2, a1]] * (b1, b2)
        assert!((c.data()[0] - (2.0 * 5.0 + 3.0 * 7.0)).abs() < 1e-12);
        assert!((c.data()[1] - (3.0 * 5.0 + 2.0 * 7.0)).abs() < 1e-12);
    }

    #[test]
    fn t_product_matches_block_circulant_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dims in [([3, 2, 4].to_vec(), [2, 2, 4].to_vec()), (vec![2, 3, 3, 2], vec![3, 2, 3, 2])] {
            let a = random(&dims.0, &mut rng);
            let b = random(&dims.1, &mut rng);
            assert!(rel(&t_product(&a, &b).unwrap(), &oracle_product(&a, &b)) <= 1e-10);
        }
        let a = random(&[2, 2, 3], &mut rng);
        let b = random(&[2, 2, 3], &mut rng);
        let via_bcirc = oracle_product(&a, &b);
        assert!(rel(&t_product(&a, &b).unwrap(), &via_bcirc) <= 1e-12);
    }

    #[test]
    fn t_product_dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(&[3, 2, 4], &mut rng);
        assert!(t_product(&a, &random(&[3, 2, 4], &mut rng)).is_err());
        assert!(t_product(&a, &random(&[2, 2, 3], &mut rng)).is_err());
    }

    #[test]
    fn identity_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random(&[3, 4, 3, 2], &mut rng);
        let right = t_product(&a, &identity_tensor(4, &[3, 2]).unwrap()).unwrap();
        let left = t_product(&identity_tensor(3, &[3, 2]).unwrap(), &a).unwrap();
        assert!(rel(&right, &a) <= 1e-12 && rel(&left, &a) <= 1e-12);

        let id = identity_tensor(3, &[4]).unwrap();
        let spec = dft_trailing(&id).unwrap();
        for f in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((spec.get(&[i, j, f]) - Complex64::new(expect, 0.0)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn transpose_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random(&[3, 2, 4, 2], &mut rng);
        assert_eq!(transpose(&transpose(&a).unwrap()).unwrap(), a);

        let tube = DenseTensor::from_vec(Shape::new(vec![1, 1, 3]).unwrap(), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(transpose(&tube).unwrap().data(), &[1.0, 3.0, 2.0]);

        let b = random(&[2, 3, 4, 2], &mut rng);
        let lhs = transpose(&t_product(&a, &b).unwrap()).unwrap();
        let rhs = t_product(&transpose(&b).unwrap(), &transpose(&a).unwrap()).unwrap();
        assert!(rel(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn identity_svd_and_norms() {
        let id = identity_tensor(3, &[2]).unwrap();
        let f = t_svd(&id, false).unwrap();
        assert!(rel(&f.s, &id) <= 1e-12);
        assert_eq!(f.tubal_rank, 3);
        assert_eq!(multi_rank_sum(&id).unwrap(), 6);

        let id = identity_tensor(2, &[3]).unwrap();
        assert!((tnn(&id).unwrap() - 2.0).abs() < 1e-12);
        assert!((spectral_norm(&id).unwrap() - 1.0).abs() < 1e-12);
    }

    fn orthogonality_error(u: &DenseTensor) -> f64 {
        let utu = t_product(&transpose(u).unwrap(), u).unwrap();
        let id = identity_tensor(u.shape().m2(), u.shape().trailing()).unwrap();
        utu.distance(&id).unwrap() / id.frobenius_norm()
    }

    #[test]
    fn t_svd_reconstruction_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for dims in [vec![4, 3, 2, 2], vec![3, 5, 4], vec![2, 2, 3, 3]] {
            let a = random(&dims, &mut rng);
            let full = t_svd(&a, false).unwrap();
            assert!(rel(&full.reconstruct().unwrap(), &a) <= 1e-10);
            assert!(orthogonality_error(&full.u) <= 1e-8);
            assert!(orthogonality_error(&full.v) <= 1e-8);
            let uut = t_product(&full.u, &transpose(&full.u).unwrap()).unwrap();
            let id = identity_tensor(dims[0], &dims[2..]).unwrap();
            assert!(uut.distance(&id).unwrap() <= 1e-8 * id.frobenius_norm());
            assert_eq!(full.tubal_rank, *full.multi_rank.iter().max().unwrap());

            let skinny = t_svd(&a, true).unwrap();
            assert!(rel(&skinny.reconstruct().unwrap(), &a) <= 1e-10);
            assert!(orthogonality_error(&skinny.u) <= 1e-8);
        }
    }

    #[test]
    fn s_is_f_diagonal_with_ordered_fourier_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(&[4, 3, 3], &mut rng);
        let f = t_svd(&a, false).unwrap();
        let spec = dft_trailing(&f.s).unwrap();
        for face in 0..3 {
            let mut prev = f64::INFINITY;
            for i in 0..4 {
                for j in 0..3 {
                    let v = spec.get(&[i, j, face]);
                    if i == j {
                        assert!(v.im.abs() < 1e-12 && v.re >= -1e-12 && v.re <= prev + 1e-12);
                        prev = v.re;
                    } else {
                        assert!(v.norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn single_face_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let shape = Shape::new(vec![3, 4, 3]).unwrap();
        let u: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = DenseTensor::from_fn(shape, |ix| if ix[2] == 1 { u[ix[0]] * v[ix[1]] } else { 0.0 }).unwrap();
        let f = t_svd(&a, false).unwrap();
        assert!(rel(&f.reconstruct().unwrap(), &a) <= 1e-10);
        assert_eq!(f.multi_rank, vec![1, 1, 1]);
        assert_eq!(f.tubal_rank, 1);
    }

    #[test]
    fn ranks_of_zero_and_outer_products() {
        let z = DenseTensor::zeros(Shape::new(vec![3, 3, 4]).unwrap());
        assert_eq!(tubal_rank(&z).unwrap(), 0);
        assert_eq!(multi_rank(&z).unwrap(), vec![0; 4]);
        assert!(matches!(t_svd(&z, true), Err(Error::ZeroTensor)));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random(&[5, 1, 4], &mut rng);
        let v = random(&[6, 1, 4], &mut rng);
        let x = t_product(&u, &transpose(&v).unwrap()).unwrap();
        assert_eq!(tubal_rank(&x).unwrap(), 1);
    }

    #[test]
    fn tnn_matches_block_diagonal_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random(&[3, 4, 3, 2], &mut rng);
        let spec = dft_trailing(&a).unwrap();
        let m = 6;
        let bdiag = nalgebra::DMatrix::<Complex64>::from_fn(3 * m, 4 * m, |r, c| {
            let (fr, i) = (r / 3, r % 3);
            let (fc, j) = (c / 4, c % 4);
            if fr == fc {
                spec.data()[(i * 4 + j) * m + fr]
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let nuclear: f64 = bdiag.singular_values().iter().sum();
        let expected = nuclear / m as f64;
        assert!((tnn(&a).unwrap() - expected).abs() <= 1e-10 * expected);
        let spectral = bdiag.singular_values().iter().fold(0.0f64, |m, &v| m.max(v));
        assert!((spectral_norm(&a).unwrap() - spectral).abs() <= 1e-10 * spectral);
    }

    #[test]
    fn dual_norm_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = random(&[3, 3, 4], &mut rng);
            let b = random(&[3, 3, 4], &mut rng);
            // (1/m) <bdiag(abar), bdiag(bbar)> = <a, b> by Parseval.
            let inner = a.inner(&b).unwrap();
            assert!(inner.abs() <= tnn(&a).unwrap() * spectral_norm(&b).unwrap() + 1e-9);
        }
    }

    #[test]
    fn svt_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random(&[3, 3, 2], &mut rng);
        assert!(rel(&t_svt(&a, 0.0).unwrap(), &a) <= 1e-12);
        let big = spectral_norm(&a).unwrap();
        assert!(t_svt(&a, big).unwrap().frobenius_norm() <= 1e-12 * big);
        assert_eq!(t_svt(&a, 2.0 * big).unwrap().frobenius_norm(), 0.0);
        assert!(t_svt(&a, -1.0).is_err());
    }

    #[test]
    fn svt_soft_thresholds_fourier_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random(&[4, 3, 3, 2], &mut rng);
        let tau = 0.6;
        let (y, norm) = t_svt_with_norm(&a, tau).unwrap();
        let before = face_singular_values(&a).unwrap();
        let after = face_singular_values(&y).unwrap();
        for (b, c) in before.iter().zip(&after) {
            for (x, z) in b.iter().zip(c) {
                assert!(((x - tau).max(0.0) - z).abs() <= 1e-9);
            }
        }
        assert!((norm - tnn(&y).unwrap()).abs() <= 1e-10 * norm.max(1.0));
        assert!(tubal_rank(&y).unwrap() <= tubal_rank(&a).unwrap());
    }

    #[test]
    fn svt_beats_sampled_competitors() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random(&[3, 3, 2], &mut rng);
        let tau = 0.4;
        let objective = |y: &DenseTensor| tau * tnn(y).unwrap() + 0.5 * y.distance(&a).unwrap().powi(2);
        let y = t_svt(&a, tau).unwrap();
        let best = objective(&y);
        let radius = 0.1 * a.frobenius_norm();
        for _ in 0..1000 {
            let d = random(&[3, 3, 2], &mut rng);
            let scale = radius * rng.random_range(0.0..1.0) / d.frobenius_norm();
            let mut comp = y.clone();
            comp.axpy(scale, &d).unwrap();
            assert!(best <= objective(&comp) + 1e-12);
        }
    }

    #[test]
    fn truncation_residual_matches_tail_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = random(&[4, 3, 4], &mut rng);
        let t = truncate_tubal_rank(&a, 1).unwrap();
        let tail: f64 = face_singular_values(&a).unwrap().iter().flat_map(|s| s.iter().skip(1)).map(|v| v * v).sum();
        let direct = a.distance(&t).unwrap();
        assert!((direct - (tail / 4.0).sqrt()).abs() <= 1e-10 * direct);
    }

    #[test]
    fn conjugate_pairing_matches_full_facewise_computation() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let a = random(&[3, 4, 4, 3], &mut rng);
        let spec = dft_trailing(&a).unwrap();
        let paired = face_singular_values(&a).unwrap();
        for (f, s) in paired.iter().enumerate() {
            let full = face_singular_values_of(read_face(&spec, f, false), false, f).unwrap();
            for (x, y) in s.iter().zip(&full) {
                assert!((x - y).abs() <= 1e-12 * full[0]);
            }
        }
    }
}
