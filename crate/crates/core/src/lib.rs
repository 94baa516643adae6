//! Design-space exploration for spatial-sequential hybrid accelerator
//! mappings of transformer inference graphs.
//!
//! The crate models a heterogeneous tiled device (a vector-core array plus
//! programmable fabric), searches layer-to-accelerator assignments together
//! with per-accelerator configurations, and produces latency/throughput
//! Pareto fronts. A discrete-event simulator replays candidate designs and
//! serves as the oracle for the analytical model.
//!
//! Module layout follows the pipeline:
//!
//! - [`graph`]: transformer application graphs (layers, shapes, deps)
//! - [`hw`]: device resource budgets and rate constants
//! - [`perf`]: analytical cost model (utilization, cycles, footprints,
//!   force bank partitioning, communication overhead)
//! - [`sched`]: greedy layer-to-accelerator pipeline scheduling, memory
//!   allocation, and proportional hardware partitioning
//! - [`dse`]: evolutionary assignment search wrapping per-accelerator
//!   exhaustive customization
//! - [`sim`]: discrete-event replay of a scheduled design
//! - [`emit`]: Pareto CSV, design JSON, and per-accelerator manifests
//!
//! With the `parallel` feature (default) candidate evaluations run on a
//! rayon pool; without it the same code paths run sequentially. Results
//! are identical either way: candidate evaluation is pure and results are
//! merged in index order.

pub mod dse;
pub mod emit;
pub mod error;
pub mod graph;
pub mod hw;
pub mod perf;
pub mod sched;
pub mod sim;

mod par;

pub use error::{Error, Result};
pub use par::{init_threads_from_env, map_ordered};
