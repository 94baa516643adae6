//! Crate-wide error type.

use crate::graph::{LayerId, LayerKind};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dependency cycle detected at layer {0}")]
    Cycle(LayerId),

    #[error("invalid hardware profile: {0}")]
    InvalidProfile(String),

    #[error("unknown built-in name `{0}`")]
    UnknownBuiltin(String),

    #[error("nonlinear latency queried for compute kind {0:?}")]
    NotNonlinear(LayerKind),

    #[error("{resource} demand exceeds device budget: need {needed}, have {budget}")]
    BudgetExceeded {
        resource: &'static str,
        needed: u64,
        budget: u64,
    },

    #[error("no feasible configuration for accelerator {acc}")]
    NoAccConfig { acc: usize },

    #[error("no design satisfies the latency constraint of {lat_cons} s")]
    NoSolution { lat_cons: f64 },

    #[error("simulation deadlock; blocked entries (batch, layer): {0:?}")]
    Deadlock(Vec<(u32, LayerId)>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
