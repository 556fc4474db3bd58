//! Centralized regularized kernel least squares.
//!
//! The minimizer of `Σ (f(xᵢ) − yᵢ)² + λ‖f‖²` is a kernel expansion over the
//! sample positions with coefficients `(K + λI)⁻¹ y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelSpec, Point};
use crate::linalg::ridge_solve;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub position: Point,
    pub measurement: f64,
}

impl LabeledSample {
    pub fn new(position: Point, measurement: f64) -> Result<Self> {
        if !measurement.is_finite() {
            return Err(Error::NonFinite("measurement"));
        }
        Ok(LabeledSample {
            position,
            measurement,
        })
    }
}

/// `f(·) = Σᵢ cᵢ K(·, xᵢ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEstimate {
    pub kernel: KernelSpec,
    pub centers: Vec<Point>,
    pub coeffs: Vec<f64>,
}

impl FieldEstimate {
    pub fn new(kernel: KernelSpec, centers: Vec<Point>, coeffs: Vec<f64>) -> Result<Self> {
        kernel.validate()?;
        if centers.is_empty() {
            return Err(Error::invalid("an estimate needs at least one center"));
        }
        if centers.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                found: coeffs.len(),
            });
        }
        let d = centers[0].dim();
        if let Some(c) = centers.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: c.dim(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coefficient"));
        }
        Ok(FieldEstimate {
            kernel,
            centers,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.centers[0].dim()
    }

    pub fn predict(&self, x: &Point) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(self.predict_unchecked(x.coords()))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coeffs)
            .map(|(c, a)| a * self.kernel.eval_unchecked(x, c.coords()))
            .sum()
    }

    /// `‖f‖²` in the RKHS, i.e. `cᵀKc` over the centers.
    pub fn rkhs_norm_sq(&self) -> f64 {
        let k =
            gram_matrix(&self.kernel, &self.centers).expect("centers validated at construction");
        k.quad_form(&self.coeffs)
            .expect("lengths validated at construction")
    }
}

pub fn fit_centralized(
    samples: &[LabeledSample],
    spec: &KernelSpec,
    lambda: f64,
) -> Result<FieldEstimate> {
    if samples.is_empty() {
        return Err(Error::invalid("need at least one sample"));
    }
    spec.validate()?;
    let centers: Vec<Point> = samples.iter().map(|s| s.position.clone()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.measurement).collect();
    let k = gram_matrix(spec, &centers)?;
    let coeffs = ridge_solve(&k, lambda, &y)?;
    FieldEstimate::new(*spec, centers, coeffs)
}

pub fn predict(est: &FieldEstimate, x: &Point) -> Result<f64> {
    est.predict(x)
}

pub fn rkhs_norm_sq(est: &FieldEstimate) -> f64 {
    est.rkhs_norm_sq()
}

/// `Σ (f(xᵢ) − yᵢ)² + λ‖f‖²`.
pub fn objective(est: &FieldEstimate, samples: &[LabeledSample], lambda: f64) -> Result<f64> {
    let mut fit = 0.0;
    for s in samples {
        let r = est.predict(&s.position)? - s.measurement;
        fit += r * r;
    }
    Ok(fit + lambda * est.rkhs_norm_sq())
}
