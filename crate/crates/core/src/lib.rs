//! Deterministic simulation of communication-avoiding parallel Strassen and
//! baseline matrix-multiplication algorithms on a distributed-memory machine.

pub mod baselines;
pub mod bilinear;
pub mod caps;
pub mod costmodel;
pub mod error;
pub mod layout;
pub mod matrix;
pub mod simnet;

pub use bilinear::{
    make_classical, make_strassen, make_strassen_winograd, recursive_multiply, validate_bilinear,
    BilinearAlgorithm,
};
pub use baselines::{cannon_multiply, strassen_two_d, two_d_strassen};
pub use caps::{caps_multiply, Schedule, Step};
pub use costmodel::{caps_cost, lower_bound, model_cost, CostTriple, ModelRow};
pub use error::*;
pub use layout::{shard, unshard, Layout, Shard};
pub use matrix::Matrix;
pub use simnet::{CostReport, MachineParams, PhaseKind, RunRecord, SimMachine};
