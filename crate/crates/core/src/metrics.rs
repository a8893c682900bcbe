//! Forecast error metrics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Which time samples enter a metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Region {
    /// The last `horizon` time samples.
    ForecastOnly { horizon: usize },
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub rmse: f64,
    pub region: Region,
    pub count: usize,
}

/// MAE and RMSE between two tensors of equal shape (mode 1 is time).
pub fn metrics(prediction: &DenseTensor, truth: &DenseTensor, region: Region) -> Result<MetricsReport> {
    if prediction.shape() != truth.shape() {
        return Err(Error::ShapeMismatch { left: prediction.dims().to_vec(), right: truth.dims().to_vec() });
    }
    let t = truth.shape().m1();
    let per_sample = truth.shape().numel() / t;
    let start = match region {
        Region::Full => 0,
        Region::ForecastOnly { horizon } if horizon <= t => (t - horizon) * per_sample,
        Region::ForecastOnly { horizon } => {
            return Err(Error::InvalidArgument(format!("horizon {horizon} exceeds time extent {t}")))
        }
    };
    let pairs = prediction.data()[start..].iter().zip(&truth.data()[start..]);
    let count = truth.data().len() - start;
    if count == 0 {
        return Err(Error::InvalidArgument("metric region is empty".into()));
    }
    let (abs, sq) = pairs.fold((0.0, 0.0), |(a, s), (p, q)| {
        let e = p - q;
        (a + e.abs(), s + e * e)
    });
    Ok(MetricsReport { mae: abs / count as f64, rmse: (sq / count as f64).sqrt(), region, count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn tensor(dims: &[usize], data: Vec<f64>) -> DenseTensor {
        DenseTensor::from_vec(Shape::new(dims.to_vec()).unwrap(), data).unwrap()
    }

    #[test]
    fn identical_inputs() {
        let a = tensor(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let m = metrics(&a, &a, Region::Full).unwrap();
        assert_eq!((m.mae, m.rmse, m.count), (0.0, 0.0, 4));
    }

    #[test]
    fn constant_error() {
        let a = tensor(&[3, 2], vec![1.0; 6]);
        let b = tensor(&[3, 2], vec![-0.5; 6]);
        let m = metrics(&a, &b, Region::Full).unwrap();
        assert!((m.mae - 1.5).abs() < 1e-15 && (m.rmse - 1.5).abs() < 1e-15);
        assert!(m.rmse >= m.mae);
    }

    #[test]
    fn hand_arithmetic() {
        let a = tensor(&[2, 1], vec![0.0, 3.0]);
        let b = tensor(&[2, 1], vec![0.0, 0.0]);
        let m = metrics(&a, &b, Region::Full).unwrap();
        assert_eq!(m.mae, 1.5);
        assert!((m.rmse - 4.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn forecast_region_uses_trailing_samples() {
        let a = tensor(&[3, 2], vec![9.0, 9.0, 9.0, 9.0, 1.0, 1.0]);
        let b = tensor(&[3, 2], vec![0.0; 6]);
        let m = metrics(&a, &b, Region::ForecastOnly { horizon: 1 }).unwrap();
        assert_eq!((m.mae, m.count), (1.0, 2));
        assert!(metrics(&a, &b, Region::ForecastOnly { horizon: 0 }).is_err());
        assert!(metrics(&a, &b, Region::ForecastOnly { horizon: 4 }).is_err());
        assert!(metrics(&a, &tensor(&[2, 3], vec![0.0; 6]), Region::Full).is_err());
    }
}
