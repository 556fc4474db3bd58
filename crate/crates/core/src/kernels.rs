//! Positive semi-definite kernels on `ℝᵈ` and Gram-matrix construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// A location in the input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("a point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinate"));
        }
        Ok(Point(coords))
    }

    /// A point on the real line.
    pub fn scalar(x: f64) -> Self {
        Point(vec![x])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    fn check_dim(&self, other: &Point) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::scalar(x)
    }
}

/// Which kernel to use.
///
/// Text form (CLI and config files): `linear`, `affine:<bias>`,
/// `gaussian:<bandwidth>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelSpec {
    /// `aᵀb`
    Linear,
    /// `aᵀb + bias`
    Affine { bias: f64 },
    /// `exp(−‖a − b‖² / bandwidth²)`
    Gaussian { bandwidth: f64 },
}

impl KernelSpec {
    pub fn affine(bias: f64) -> Result<Self> {
        let k = KernelSpec::Affine { bias };
        k.validate()?;
        Ok(k)
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let k = KernelSpec::Gaussian { bandwidth };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Affine { bias } if bias.is_finite() && bias >= 0.0 => Ok(()),
            KernelSpec::Affine { bias } => Err(Error::invalid(format!(
                "affine bias must be finite and nonnegative, got {bias}"
            ))),
            KernelSpec::Gaussian { bandwidth } if bandwidth.is_finite() && bandwidth > 0.0 => {
                Ok(())
            }
            KernelSpec::Gaussian { bandwidth } => Err(Error::invalid(format!(
                "gaussian bandwidth must be positive, got {bandwidth}"
            ))),
        }
    }

    /// Kernel value without the dimension check; callers guarantee it.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => crate::linalg::dot(a, b),
            KernelSpec::Affine { bias } => crate::linalg::dot(a, b) + bias,
            KernelSpec::Gaussian { bandwidth } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-d2 / (bandwidth * bandwidth)).exp()
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => write!(f, "linear"),
            KernelSpec::Affine { bias } => write!(f, "affine:{bias}"),
            KernelSpec::Gaussian { bandwidth } => write!(f, "gaussian:{bandwidth}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>, default: f64| -> Result<f64> {
            match a {
                None => Ok(default),
                Some(a) => a
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad kernel parameter '{a}'"))),
            }
        };
        let spec = match name.trim().to_ascii_lowercase().as_str() {
            "linear" if arg.is_none() => KernelSpec::Linear,
            "affine" => KernelSpec::Affine {
                bias: num(arg, 1.0)?,
            },
            "gaussian" => KernelSpec::Gaussian {
                bandwidth: num(arg, 1.0)?,
            },
            _ => {
                return Err(Error::invalid(format!(
                    "unknown kernel '{s}' (expected linear, affine:<bias> or gaussian:<bandwidth>)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for KernelSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelSpec> for String {
    fn from(k: KernelSpec) -> String {
        k.to_string()
    }
}

pub fn kernel_eval(spec: &KernelSpec, a: &Point, b: &Point) -> Result<f64> {
    a.check_dim(b)?;
    Ok(spec.eval_unchecked(a.coords(), b.coords()))
}

pub fn gram_matrix(spec: &KernelSpec, points: &[Point]) -> Result<SymMatrix> {
    let first = points
        .first()
        .ok_or_else(|| Error::invalid("gram matrix needs at least one point"))?;
    for p in points {
        first.check_dim(p)?;
    }
    SymMatrix::from_fn(points.len(), |i, j| {
        spec.eval_unchecked(points[i].coords(), points[j].coords())
    })
}
