//! Distributed training by successive orthogonal projection.
//!
//! Each sensor `s` keeps a kernel expansion over its neighborhood `N_s` and
//! reads and writes only the messages `z_j, j ∈ N_s` on the shared board. One
//! local update is the projection onto the set where sensor `s` agrees with
//! the board on its neighborhood:
//!
//! ```text
//! c_s ← (K_s + λ_s I)⁻¹ (z|N_s + λ_s c_s)
//! z_j ← f_s(x_j)            for j ∈ N_s
//! ```
//!
//! A sweep applies this once per sensor. Starting from `z = y` and `f_s = 0`
//! the iteration converges to the solution of the neighborhood-relaxed
//! regularized least-squares program; on a fully connected network with
//! `Σ λ_s = λ` that is the centralized estimate.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centralized::FieldEstimate;
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, Point};
use crate::linalg::{Cholesky, SymMatrix};
use crate::network::{local_gram, SensorNetwork};

/// One sensor's local state.
#[derive(Debug, Clone)]
pub struct SensorState {
    id: usize,
    neighbor_ids: Vec<usize>,
    lambda: f64,
    local_k: SymMatrix,
    factor: Cholesky,
    coeffs: Vec<f64>,
}

impl SensorState {
    fn new(net: &SensorNetwork, spec: &KernelSpec, s: usize, lambda: f64) -> Result<Self> {
        let neighbor_ids = net.neighbors(s)?.to_vec();
        let local_k = local_gram(net, spec, s)?;
        let factor = Cholesky::factor(&local_k, lambda)?;
        Ok(SensorState {
            id: s,
            coeffs: vec![0.0; neighbor_ids.len()],
            neighbor_ids,
            lambda,
            local_k,
            factor,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn neighbor_ids(&self) -> &[usize] {
        &self.neighbor_ids
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn local_k(&self) -> &SymMatrix {
        &self.local_k
    }

    /// Coefficients in ascending neighbor-id order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `f_s(x_j)` for every `j ∈ N_s`, in neighborhood order.
    pub fn neighborhood_values(&self) -> Vec<f64> {
        self.local_k
            .mul_vec(&self.coeffs)
            .expect("coefficients sized to the neighborhood")
    }

    /// `λ_s ‖f_s − g‖²` where `g` has coefficients `other` on the same centers.
    fn weighted_norm_sq_diff(&self, other: &[f64]) -> f64 {
        let d: Vec<f64> = self.coeffs.iter().zip(other).map(|(a, b)| a - b).collect();
        self.lambda * self.local_k.quad_form(&d).expect("same neighborhood")
    }
}

/// Current field-value messages, one per sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageBoard {
    z: Vec<f64>,
}

impl MessageBoard {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("message"));
        }
        Ok(MessageBoard { z })
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Order in which sensors are visited within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `0, 1, …, n−1` every sweep.
    #[default]
    SerialSweep,
    /// A fresh permutation per sweep, drawn from `(seed, sweep index)`.
    SeededPermutation { seed: u64 },
}

impl Schedule {
    /// Visiting order for the given (0-based) sweep.
    pub fn order(&self, n: usize, sweep_index: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        if let Schedule::SeededPermutation { seed } = *self {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(sweep_index as u64);
            order.shuffle(&mut rng);
        }
        order
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub sweeps: usize,
    pub schedule: Schedule,
    /// Stop once a sweep moves no message by more than this.
    pub early_stop: Option<f64>,
}

impl TrainOptions {
    pub fn sweeps(sweeps: usize) -> Self {
        TrainOptions {
            sweeps,
            schedule: Schedule::SerialSweep,
            early_stop: None,
        }
    }
}

/// Per-sweep `max_delta` history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub max_delta: Vec<f64>,
}

impl Diagnostics {
    /// CSV with header `sweep_index,max_delta`; sweeps are numbered from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sweep_index", "max_delta"])?;
        for (i, d) in self.max_delta.iter().enumerate() {
            w.write_record([(i + 1).to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_inputs(net: &SensorNetwork, y: &[f64], lambdas: &[f64]) -> Result<()> {
    let n = net.len();
    for len in [y.len(), lambdas.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: len,
            });
        }
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
        return Err(Error::invalid(format!(
            "every sensor regularizer must be positive, got {l}"
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("measurement"));
    }
    Ok(())
}

/// Initial states (`f_s = 0`, cached `K_s`) and the board `z = y`.
pub fn init_states(
    net: &SensorNetwork,
    spec: &KernelSpec,
    y: &[f64],
    lambdas: &[f64],
) -> Result<(Vec<SensorState>, MessageBoard)> {
    spec.validate()?;
    check_inputs(net, y, lambdas)?;
    let states = (0..net.len())
        .map(|s| SensorState::new(net, spec, s, lambdas[s]))
        .collect::<Result<Vec<_>>>()?;
    Ok((states, MessageBoard::new(y.to_vec())?))
}

/// Projects sensor `state` onto agreement with the board on its neighborhood
/// and writes its new field values back to those board entries.
pub fn local_update(state: &mut SensorState, board: &mut MessageBoard) -> Result<()> {
    if let Some(&j) = state.neighbor_ids.iter().find(|&&j| j >= board.z.len()) {
        return Err(Error::InvalidSensor {
            id: j,
            n: board.z.len(),
        });
    }
    // (K+λI)⁻¹(z + λc) written as c + (K+λI)⁻¹(z − Kc): only the correction
    // goes through the solve, so rounding scales with the change, not with c
    let residual: Vec<f64> = state
        .neighbor_ids
        .iter()
        .zip(state.neighborhood_values())
        .map(|(&j, v)| board.z[j] - v)
        .collect();
    let step = state.factor.solve(&residual)?;
    let coeffs: Vec<f64> = state.coeffs.iter().zip(&step).map(|(c, d)| c + d).collect();
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("local coefficients"));
    }
    state.coeffs = coeffs;
    for (&j, v) in state.neighbor_ids.iter().zip(state.neighborhood_values()) {
        board.z[j] = v;
    }
    Ok(())
}

/// One pass over all sensors in schedule order; returns the largest change
/// of any board entry between the start and the end of the sweep.
pub fn sweep(
    states: &mut [SensorState],
    board: &mut MessageBoard,
    schedule: &Schedule,
    sweep_index: usize,
) -> Result<f64> {
    if states.len() != board.len() {
        return Err(Error::DimensionMismatch {
            expected: board.len(),
            found: states.len(),
        });
    }
    let before = board.z.clone();
    for s in schedule.order(states.len(), sweep_index) {
        local_update(&mut states[s], board)?;
    }
    Ok(before
        .iter()
        .zip(&board.z)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// A training run that can be advanced sweep by sweep.
#[derive(Debug, Clone)]
pub struct SnTrain {
    states: Vec<SensorState>,
    board: MessageBoard,
    schedule: Schedule,
    diagnostics: Diagnostics,
}

impl SnTrain {
    pub fn new(
        net: &SensorNetwork,
        spec: &KernelSpec,
        y: &[f64],
        lambdas: &[f64],
        schedule: Schedule,
    ) -> Result<Self> {
        let (states, board) = init_states(net, spec, y, lambdas)?;
        Ok(SnTrain {
            states,
            board,
            schedule,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn step(&mut self) -> Result<f64> {
        let idx = self.diagnostics.max_delta.len();
        let delta = sweep(&mut self.states, &mut self.board, &self.schedule, idx)?;
        self.diagnostics.max_delta.push(delta);
        Ok(delta)
    }

    pub fn sweeps_done(&self) -> usize {
        self.diagnostics.max_delta.len()
    }

    pub fn states(&self) -> &[SensorState] {
        &self.states
    }

    pub fn board(&self) -> &MessageBoard {
        &self.board
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn estimates(&self, positions: &[Point], spec: &KernelSpec) -> Vec<FieldEstimate> {
        self.states
            .iter()
            .map(|s| sensor_estimate(s, positions, spec))
            .collect()
    }

    pub fn into_parts(self) -> (Vec<SensorState>, MessageBoard, Diagnostics) {
        (self.states, self.board, self.diagnostics)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub states: Vec<SensorState>,
    pub board: MessageBoard,
    pub diagnostics: Diagnostics,
}

pub fn train(
    net: &SensorNetwork,
    spec: &KernelSpec,
    y: &[f64],
    lambdas: &[f64],
    options: &TrainOptions,
) -> Result<TrainOutput> {
    if options.sweeps == 0 {
        return Err(Error::invalid("number of sweeps must be at least 1"));
    }
    let mut run = SnTrain::new(net, spec, y, lambdas, options.schedule)?;
    for _ in 0..options.sweeps {
        let delta = run.step()?;
        if options.early_stop.is_some_and(|tol| delta <= tol) {
            break;
        }
    }
    let (states, board, diagnostics) = run.into_parts();
    Ok(TrainOutput {
        states,
        board,
        diagnostics,
    })
}

/// `f_s` as a kernel expansion over the positions of `N_s`.
pub fn sensor_estimate(
    state: &SensorState,
    positions: &[Point],
    spec: &KernelSpec,
) -> FieldEstimate {
    FieldEstimate {
        kernel: *spec,
        centers: state
            .neighbor_ids
            .iter()
            .map(|&j| positions[j].clone())
            .collect(),
        coeffs: state.coeffs.clone(),
    }
}

/// Each sensor fits its neighborhood's raw measurements once and nothing is
/// exchanged: `c_s = (K_s + λ_s I)⁻¹ y|N_s`.
pub fn local_only_train(
    net: &SensorNetwork,
    spec: &KernelSpec,
    y: &[f64],
    lambdas: &[f64],
) -> Result<Vec<SensorState>> {
    let (mut states, _) = init_states(net, spec, y, lambdas)?;
    for st in &mut states {
        let local_y: Vec<f64> = st.neighbor_ids.iter().map(|&j| y[j]).collect();
        st.coeffs = st.factor.solve(&local_y)?;
    }
    Ok(states)
}

/// Squared distance between two iterates in the weighted product space:
/// `‖z_a − z_b‖² + Σ_s λ_s ‖f_{s,a} − f_{s,b}‖²`.
///
/// Both iterates must come from the same network, kernel and regularizers.
pub fn product_distance_sq(
    a: (&[SensorState], &MessageBoard),
    b: (&[SensorState], &MessageBoard),
) -> Result<f64> {
    let (sa, za) = a;
    let (sb, zb) = b;
    if sa.len() != sb.len() || za.len() != zb.len() {
        return Err(Error::DimensionMismatch {
            expected: sa.len(),
            found: sb.len(),
        });
    }
    let mut d: f64 = za.z.iter().zip(&zb.z).map(|(x, y)| (x - y) * (x - y)).sum();
    for (x, y) in sa.iter().zip(sb) {
        if x.neighbor_ids != y.neighbor_ids || x.lambda != y.lambda {
            return Err(Error::invalid("iterates come from different problems"));
        }
        d += x.weighted_norm_sq_diff(&y.coeffs);
    }
    Ok(d)
}
