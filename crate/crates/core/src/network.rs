//! Sensor positions and the disk-graph communication topology.
//!
//! Every sensor is its own neighbor, and two distinct sensors are neighbors
//! iff their distance is strictly below the radius. Neighborhoods are kept
//! sorted so that local coefficient vectors have a canonical order.

use std::collections::VecDeque;
use std::io::Read;

use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelSpec, Point};
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SensorNetwork {
    positions: Vec<Point>,
    radius: f64,
    neighborhoods: Vec<Vec<usize>>,
}

impl SensorNetwork {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, s: usize) -> Result<&Point> {
        self.positions.get(s).ok_or(Error::InvalidSensor {
            id: s,
            n: self.len(),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `N_s`, sorted ascending and containing `s`.
    pub fn neighbors(&self, s: usize) -> Result<&[usize]> {
        self.neighborhoods
            .get(s)
            .map(Vec::as_slice)
            .ok_or(Error::InvalidSensor {
                id: s,
                n: self.len(),
            })
    }

    pub fn neighborhoods(&self) -> &[Vec<usize>] {
        &self.neighborhoods
    }
}

pub fn build_disk_topology(positions: Vec<Point>, radius: f64) -> Result<SensorNetwork> {
    let first = positions
        .first()
        .ok_or_else(|| Error::invalid("a network needs at least one sensor"))?;
    if !(radius >= 0.0) {
        return Err(Error::invalid(format!(
            "radius must be nonnegative, got {radius}"
        )));
    }
    let d = first.dim();
    if let Some(p) = positions.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: p.dim(),
        });
    }
    let n = positions.len();
    let mut neighborhoods = vec![Vec::new(); n];
    for i in 0..n {
        neighborhoods[i].push(i);
        for j in (i + 1)..n {
            if positions[i].dist(&positions[j]) < radius {
                neighborhoods[i].push(j);
                neighborhoods[j].push(i);
            }
        }
    }
    for nb in &mut neighborhoods {
        nb.sort_unstable();
    }
    Ok(SensorNetwork {
        positions,
        radius,
        neighborhoods,
    })
}

/// `K_s`: the Gram matrix over the positions of `N_s`, in neighborhood order.
pub fn local_gram(net: &SensorNetwork, spec: &KernelSpec, s: usize) -> Result<SymMatrix> {
    let pts: Vec<Point> = net
        .neighbors(s)?
        .iter()
        .map(|&j| net.positions[j].clone())
        .collect();
    gram_matrix(spec, &pts)
}

pub fn is_connected(net: &SensorNetwork) -> bool {
    let n = net.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for &j in &net.neighborhoods[i] {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == n
}

/// `Σ_s |N_s|`, self-loops included.
pub fn degree_sum(net: &SensorNetwork) -> usize {
    net.neighborhoods.iter().map(Vec::len).sum()
}

/// Reads sensor positions from CSV rows `id,coord1,...,coordd`.
///
/// A header line is allowed. Ids must be exactly `0..n` in any order.
pub fn read_positions_csv<R: Read>(reader: R) -> Result<Vec<Point>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<(usize, Point)> = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if idx == 0 && rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: "expected id followed by at least one coordinate".into(),
            });
        }
        let id: usize = rec[0].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad sensor id '{}'", &rec[0]),
        })?;
        let coords = rec
            .iter()
            .skip(1)
            .map(|f| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad coordinate '{f}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = Point::new(coords).map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        rows.push((id, p));
    }
    if rows.is_empty() {
        return Err(Error::invalid("position file has no sensors"));
    }
    rows.sort_by_key(|(id, _)| *id);
    for (expect, (id, _)) in rows.iter().enumerate() {
        if *id != expect {
            return Err(Error::invalid(format!(
                "sensor ids must be 0..{} without gaps or repeats",
                rows.len()
            )));
        }
    }
    Ok(rows.into_iter().map(|(_, p)| p).collect())
}
