//! Nonparametric field estimation in sensor networks.
//!
//! Centralized regularized kernel least squares, the distributed SN-Train
//! message-passing estimator, fusion-center aggregation rules, and a seeded
//! Monte Carlo harness for the sweep-count and connectivity studies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod centralized;
pub mod cli;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fusion;
pub mod kernels;
pub mod linalg;
pub mod network;
pub mod plot;
pub mod sn_train;

pub use centralized::{fit_centralized, FieldEstimate, LabeledSample};
pub use error::{Error, Result};
pub use exec::Execution;
pub use fusion::{fuse_predict, FusionRule};
pub use kernels::{gram_matrix, kernel_eval, KernelSpec, Point};
pub use linalg::{min_eigenvalue_lower_bound, ridge_solve, SymMatrix};
pub use network::{build_disk_topology, SensorNetwork};
pub use sn_train::{
    init_states, local_only_train, local_update, sensor_estimate, sweep, train, MessageBoard,
    Schedule, SensorState, SnTrain, TrainOptions,
};
