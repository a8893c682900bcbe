//! ADMM solvers for the three completion models.
//!
//! All models share one skeleton. With a linear transform `T`, a
//! pseudo-inverse `T+`, and a proximal map for the chosen nuclear norm, each
//! iteration performs
//!
//! ```text
//! Y  <- prox_{1/mu}(T(X) - N/mu)
//! X  <- P_Omega(M) + P_Omega^c(T+(Y + N/mu))
//! N  <- N + mu (Y - T(X))
//! mu <- min(growth * mu, mu_max)
//! ```
//!
//! starting from `X = P_Omega(M)`, `N = 0`. The models differ only in `T`:
//! identity with the tensor nuclear norm (TNN), the temporal convolution
//! tensor with the tensor nuclear norm (TCTNN), and the per-fiber stacked
//! circulant matrix with the matrix nuclear norm (TCMNN).

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::SamplingMask;
use crate::temporal_conv::{conv_inverse_raw, conv_tensor_raw, InverseMode, KernelSize, TemporalSeries};
use crate::tensor::{DenseTensor, Shape};
use crate::theory;
use crate::tsvd;

/// Kernel size: fixed, or half the time extent rounded up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KernelChoice {
    #[default]
    Auto,
    Fixed(usize),
}

impl KernelChoice {
    pub fn resolve(self, t: usize) -> Result<usize> {
        let k = match self {
            Self::Auto => KernelSize::half(t).get(),
            Self::Fixed(k) => k,
        };
        Ok(KernelSize::new(k, t)?.get())
    }
}

impl std::str::FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        s.parse()
            .map(Self::Fixed)
            .map_err(|_| Error::InvalidArgument(format!("kernel must be a positive integer or \"auto\", got {s:?}")))
    }
}

impl std::fmt::Display for KernelChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl Serialize for KernelChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for KernelChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(k) => Ok(Self::Fixed(k)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// ADMM parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub mu0: f64,
    pub growth: f64,
    pub max_iters: usize,
    /// Stop once `||X_{l+1} - X_l||_F / ||X_l||_F` falls to this level...
    pub rel_tol: f64,
    /// ...and `||Y - T(X)||_F / ||T(X)||_F` to this one.
    pub feas_tol: f64,
    /// Cap on the penalty parameter.
    pub mu_max: f64,
    pub kernel: KernelChoice,
    pub inverse_mode: InverseMode,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            mu0: 1e-5,
            growth: 1.1,
            max_iters: 500,
            rel_tol: 1e-8,
            feas_tol: 1e-6,
            mu_max: 1e8,
            kernel: KernelChoice::Auto,
            inverse_mode: InverseMode::ScaledAdjoint,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad("mu0 must be positive");
        }
        if !(self.growth > 1.0 && self.growth.is_finite()) {
            return bad("growth must exceed 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        if !(self.feas_tol > 0.0) {
            return bad("feas_tol must be positive");
        }
        if !(self.mu_max >= self.mu0) {
            return bad("mu_max must be at least mu0");
        }
        if self.kernel == KernelChoice::Fixed(0) {
            return bad("kernel size must be at least 1");
        }
        Ok(())
    }
}

/// Iteration history and exit state of one solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub rel_changes: Vec<f64>,
    /// `||Y - T(X)||_F` at exit.
    pub feasibility_gap: f64,
    /// Nuclear norm of the final `Y`.
    pub objective: f64,
    pub converged: bool,
    pub wall_time: Duration,
    /// Guaranteed exact horizon, attached by [`forecast`] as advisory data.
    pub h_max: Option<usize>,
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    schema: u32,
    iterations: usize,
    converged: bool,
    objective: f64,
    feasibility_gap: f64,
    rel_changes: &'a [f64],
    wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_max: Option<usize>,
    config: &'a AdmmConfig,
}

impl SolveReport {
    pub fn to_json(&self, config: &AdmmConfig) -> serde_json::Value {
        serde_json::to_value(ReportDocument {
            schema: 1,
            iterations: self.iterations,
            converged: self.converged,
            objective: self.objective,
            feasibility_gap: self.feasibility_gap,
            rel_changes: &self.rel_changes,
            wall_time_ms: self.wall_time.as_secs_f64() * 1e3,
            h_max: self.h_max,
            config,
        })
        .expect("report fields are plain data")
    }
}

/// A completion model: transform, pseudo-inverse and proximal map.
trait Model {
    fn forward(&self, x: &DenseTensor) -> Result<DenseTensor>;
    fn inverse(&self, y: &DenseTensor) -> Result<DenseTensor>;
    /// Returns `prox_{tau ||.||}(z)` and the norm of the result.
    fn prox(&self, z: &DenseTensor, tau: f64) -> Result<(DenseTensor, f64)>;
    fn norm(&self, y: &DenseTensor) -> Result<f64>;
}

struct Tnn;

impl Model for Tnn {
    fn forward(&self, x: &DenseTensor) -> Result<DenseTensor> {
        Ok(x.clone())
    }
    fn inverse(&self, y: &DenseTensor) -> Result<DenseTensor> {
        Ok(y.clone())
    }
    fn prox(&self, z: &DenseTensor, tau: f64) -> Result<(DenseTensor, f64)> {
        tsvd::t_svt_with_norm(z, tau)
    }
    fn norm(&self, y: &DenseTensor) -> Result<f64> {
        tsvd::tnn(y)
    }
}

struct Tctnn {
    k: usize,
    mode: InverseMode,
}

impl Model for Tctnn {
    fn forward(&self, x: &DenseTensor) -> Result<DenseTensor> {
        conv_tensor_raw(x, self.k)
    }
    fn inverse(&self, y: &DenseTensor) -> Result<DenseTensor> {
        conv_inverse_raw(y, self.mode)
    }
    fn prox(&self, z: &DenseTensor, tau: f64) -> Result<(DenseTensor, f64)> {
        tsvd::t_svt_with_norm(z, tau)
    }
    fn norm(&self, y: &DenseTensor) -> Result<f64> {
        tsvd::tnn(y)
    }
}

/// Stacked circulant `V_k(X)`: fiber `f` of the series contributes rows
/// `f*t .. (f+1)*t` holding its `k` circular shifts as columns.
struct Tcmnn {
    k: usize,
    mode: InverseMode,
    series_shape: Shape,
}

impl Tcmnn {
    fn dims(&self) -> (usize, usize) {
        let t = self.series_shape.m1();
        (t, self.series_shape.numel() / t)
    }
}

/// `V_k(x)` as an `(n t) x k` matrix stored row-major in a 2-D tensor.
pub fn stacked_circulant(x: &DenseTensor, k: usize) -> Result<DenseTensor> {
    let t = x.shape().m1();
    KernelSize::new(k, t)?;
    let n = x.shape().numel() / t;
    let src = x.data();
    let mut out = vec![0.0; n * t * k];
    for f in 0..n {
        for i in 0..t {
            for j in 0..k {
                out[(f * t + i) * k + j] = src[((i + t - j) % t) * n + f];
            }
        }
    }
    DenseTensor::from_vec(Shape::new(vec![n * t, k])?, out)
}

impl Model for Tcmnn {
    fn forward(&self, x: &DenseTensor) -> Result<DenseTensor> {
        stacked_circulant(x, self.k)
    }
    fn inverse(&self, y: &DenseTensor) -> Result<DenseTensor> {
        let (t, n) = self.dims();
        let k = self.k;
        let src = y.data();
        let mut out = vec![0.0; t * n];
        for f in 0..n {
            for s in 0..t {
                out[s * n + f] = match self.mode {
                    InverseMode::FirstSlice => src[(f * t + s) * k],
                    InverseMode::ScaledAdjoint => {
                        (0..k).map(|j| src[(f * t + (s + j) % t) * k + j]).sum::<f64>() / k as f64
                    }
                };
            }
        }
        DenseTensor::from_vec(self.series_shape.clone(), out)
    }
    fn prox(&self, z: &DenseTensor, tau: f64) -> Result<(DenseTensor, f64)> {
        let (data, norm) = tsvd::matrix_svt(z.data(), z.shape().m1(), z.shape().m2(), tau)?;
        Ok((DenseTensor::from_vec(z.shape().clone(), data)?, norm))
    }
    fn norm(&self, y: &DenseTensor) -> Result<f64> {
        Ok(self.prox(y, 0.0)?.1)
    }
}

fn check_inputs(observed: &DenseTensor, mask: &SamplingMask, cfg: &AdmmConfig) -> Result<()> {
    cfg.validate()?;
    if observed.shape() != mask.shape() {
        return Err(Error::ShapeMismatch { left: observed.dims().to_vec(), right: mask.shape().dims().to_vec() });
    }
    if mask.count() == 0 {
        return Err(Error::EmptyMask);
    }
    if let Some(index) = observed.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

fn admm(model: &dyn Model, observed: &DenseTensor, mask: &SamplingMask, cfg: &AdmmConfig) -> Result<(DenseTensor, SolveReport)> {
    let start = Instant::now();
    let known = mask.project(observed)?;
    let mut x = known.clone();
    let mut tx = model.forward(&x)?;

    if mask.is_full() {
        let objective = model.norm(&tx)?;
        let report = SolveReport {
            iterations: 0,
            rel_changes: Vec::new(),
            feasibility_gap: 0.0,
            objective,
            converged: true,
            wall_time: start.elapsed(),
            h_max: None,
        };
        return Ok((x, report));
    }

    let missing = mask.complement();
    let mut n = DenseTensor::zeros(tx.shape().clone());
    let mut mu = cfg.mu0;
    let mut rel_changes = Vec::new();
    let mut y = tx.clone();
    let mut objective = 0.0;
    let mut feasibility_gap = f64::INFINITY;
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        let inv_mu = 1.0 / mu;
        let mut z = tx.clone();
        z.axpy(-inv_mu, &n)?;
        (y, objective) = model.prox(&z, inv_mu)?;

        let mut w = y.clone();
        w.axpy(inv_mu, &n)?;
        let mut next = missing.project(&model.inverse(&w)?)?;
        next.axpy(1.0, &known)?;

        tx = model.forward(&next)?;
        let residual = y.sub(&tx)?;
        n.axpy(mu, &residual)?;
        feasibility_gap = residual.frobenius_norm();

        let scale = x.frobenius_norm();
        let change = next.distance(&x)?;
        let rel = if scale > 0.0 { change / scale } else if change > 0.0 { f64::INFINITY } else { 0.0 };
        rel_changes.push(rel);
        x = next;
        mu = (mu * cfg.growth).min(cfg.mu_max);

        let tx_norm = tx.frobenius_norm();
        let feasible = feasibility_gap <= cfg.feas_tol * tx_norm.max(f64::MIN_POSITIVE);
        if rel <= cfg.rel_tol && feasible {
            converged = true;
            break;
        }
    }

    let report = SolveReport {
        iterations: rel_changes.len(),
        rel_changes,
        feasibility_gap,
        objective,
        converged,
        wall_time: start.elapsed(),
        h_max: None,
    };
    drop(y);
    Ok((x, report))
}

/// Tensor completion by TNN minimization on the raw tensor.
pub fn solve_tnn(observed: &DenseTensor, mask: &SamplingMask, cfg: &AdmmConfig) -> Result<(DenseTensor, SolveReport)> {
    if observed.shape().order() < 3 {
        return Err(Error::Order { required: 3, actual: observed.shape().order() });
    }
    check_inputs(observed, mask, cfg)?;
    admm(&Tnn, observed, mask, cfg)
}

/// Completion by TNN minimization of the temporal convolution tensor.
pub fn solve_tctnn(observed: &TemporalSeries, mask: &SamplingMask, cfg: &AdmmConfig) -> Result<(TemporalSeries, SolveReport)> {
    let x = observed.tensor();
    check_inputs(x, mask, cfg)?;
    let k = cfg.kernel.resolve(observed.len())?;
    let (out, report) = admm(&Tctnn { k, mode: cfg.inverse_mode }, x, mask, cfg)?;
    Ok((TemporalSeries::new(out)?, report))
}

/// Completion by matrix nuclear norm minimization of the stacked circulant.
pub fn solve_tcmnn(observed: &TemporalSeries, mask: &SamplingMask, cfg: &AdmmConfig) -> Result<(TemporalSeries, SolveReport)> {
    let x = observed.tensor();
    check_inputs(x, mask, cfg)?;
    let k = cfg.kernel.resolve(observed.len())?;
    let model = Tcmnn { k, mode: cfg.inverse_mode, series_shape: x.shape().clone() };
    let (out, report) = admm(&model, x, mask, cfg)?;
    Ok((TemporalSeries::new(out)?, report))
}

/// Result of [`forecast`].
#[derive(Clone, Debug)]
pub struct Forecast {
    /// The last `h` time samples of the completed series, shape `(h, n1, ..., np)`.
    pub prediction: DenseTensor,
    /// History followed by the prediction.
    pub completed: TemporalSeries,
    pub report: SolveReport,
}

/// Forecasts `h` samples by appending them as missing and solving TCTNN.
pub fn forecast(history: &TemporalSeries, h: usize, cfg: &AdmmConfig) -> Result<Forecast> {
    if h == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let t = history.len() + h;
    let k = cfg.kernel.resolve(t)?;
    let mut dims = history.tensor().dims().to_vec();
    dims[0] = t;
    let shape = Shape::new(dims)?;
    let mut data = history.tensor().data().to_vec();
    data.resize(shape.numel(), 0.0);
    let padded = TemporalSeries::new(DenseTensor::from_vec(shape, data)?)?;
    let mask = SamplingMask::prediction(t, h, history.feature_dims())?;

    let fixed = AdmmConfig { kernel: KernelChoice::Fixed(k), ..cfg.clone() };
    let (completed, mut report) = solve_tctnn(&padded, &mask, &fixed)?;
    report.h_max = Some(theory::max_exact_horizon(&completed, k)?.h_max);
    let prediction = completed.slice_time(history.len(), h)?;
    Ok(Forecast { prediction, completed, report })
}
