//! Fusion-center aggregation of per-sensor field estimates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::centralized::FieldEstimate;
use crate::error::{Error, Result};
use crate::kernels::Point;
use crate::network::{degree_sum, SensorNetwork};

/// Text form: `single:<id>`, `knn:<k>`, `ca`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FusionRule {
    /// Always ask the same sensor.
    SingleSensor(usize),
    /// Average the `k` sensors nearest the query point (ties by lower id).
    KNearest(usize),
    /// Average of all sensors weighted by `|N_s|`.
    ConnectivityAveraged,
}

impl FusionRule {
    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            FusionRule::SingleSensor(s) if s >= n => Err(Error::InvalidSensor { id: s, n }),
            FusionRule::KNearest(k) if k == 0 || k > n => Err(Error::invalid(format!(
                "k-nearest fusion needs 1 <= k <= {n}, got {k}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FusionRule::SingleSensor(s) => write!(f, "single:{s}"),
            FusionRule::KNearest(k) => write!(f, "knn:{k}"),
            FusionRule::ConnectivityAveraged => write!(f, "ca"),
        }
    }
}

impl FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::invalid(format!(
                "unknown fusion rule '{s}' (expected single:<id>, knn:<k> or ca)"
            ))
        };
        let t = s.trim().to_ascii_lowercase();
        if t == "ca" {
            return Ok(FusionRule::ConnectivityAveraged);
        }
        let (name, arg) = t.split_once(':').ok_or_else(bad)?;
        let arg: usize = arg.trim().parse().map_err(|_| bad())?;
        match name.trim() {
            "single" => Ok(FusionRule::SingleSensor(arg)),
            "knn" if arg >= 1 => Ok(FusionRule::KNearest(arg)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for FusionRule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FusionRule> for String {
    fn from(r: FusionRule) -> String {
        r.to_string()
    }
}

/// `|N_s| / Σ|N_t|` for every sensor.
pub fn connectivity_weights(net: &SensorNetwork) -> Vec<f64> {
    let total = degree_sum(net) as f64;
    net.neighborhoods()
        .iter()
        .map(|nb| nb.len() as f64 / total)
        .collect()
}

/// Ids of the `k` sensors nearest `x`, closest first, ties by lower id.
pub fn nearest_sensors(net: &SensorNetwork, x: &Point, k: usize) -> Vec<usize> {
    let mut by_dist: Vec<(f64, usize)> = net
        .positions()
        .iter()
        .enumerate()
        .map(|(s, p)| (p.dist_sq(x), s))
        .collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    by_dist.into_iter().take(k).map(|(_, s)| s).collect()
}

pub fn fuse_predict(
    rule: &FusionRule,
    estimates: &[FieldEstimate],
    net: &SensorNetwork,
    x: &Point,
) -> Result<f64> {
    let n = net.len();
    if estimates.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: estimates.len(),
        });
    }
    rule.validate(n)?;
    let d = net.positions()[0].dim();
    if x.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.dim(),
        });
    }
    if x.coords().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("query point"));
    }
    Ok(match *rule {
        FusionRule::SingleSensor(s) => estimates[s].predict(x)?,
        FusionRule::KNearest(k) => {
            let mut sum = 0.0;
            for s in nearest_sensors(net, x, k) {
                sum += estimates[s].predict(x)?;
            }
            sum / k as f64
        }
        FusionRule::ConnectivityAveraged => {
            let mut sum = 0.0;
            for (est, w) in estimates.iter().zip(connectivity_weights(net)) {
                sum += w * est.predict(x)?;
            }
            sum
        }
    })
}
