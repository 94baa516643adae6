//! Analytical cost model for one accelerator and for the links between
//! accelerators.
//!
//! Covers resource utilization of a configuration, tiled matrix-multiply
//! cycle counts, per-core memory footprints, the divisibility rule and
//! forced RAM bank partitioning that make on-chip forwarding conflict
//! free, nonlinear-kernel pipeline latency, and per-edge communication
//! overhead. Everything here is a pure function of its arguments.

use crate::error::{Error, Result};
use crate::graph::{LayerId, LayerKind};
use crate::hw::HardwareProfile;
use serde::{Deserialize, Serialize};

/// Word width of one RAM bank port, bytes moved per fabric cycle.
pub const BANK_WORD_BYTES: u64 = 8;

/// Lanes of one fabric engine: elements consumed per fabric cycle. Sized
/// so a wide engine keeps pace with the stream bandwidth the array
/// delivers to it; the simulator accepts an override.
pub const HCE_LANES: u64 = 512;

/// Matrix-multiply unit flavor.
///
/// `Pinned` keeps the weights resident in core-local memory so only the
/// activation operand streams in; `DualStream` streams both operands and
/// is required whenever both are produced at runtime (attention).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HmmType {
    Pinned,
    DualStream,
}

/// Configuration vector of one accelerator.
///
/// `(h1, w1, w2)` is the per-core tile on the M/K/N dimensions, `(a, b, c)`
/// the array parallelism on the same dimensions, and `(part_a, part_b,
/// part_c)` the RAM bank partition factors (defaults equal the
/// parallelism; forced partitioning raises them).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccConfig {
    pub h1: u64,
    pub w1: u64,
    pub w2: u64,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub part_a: u64,
    pub part_b: u64,
    pub part_c: u64,
    pub hmm_type: HmmType,
}

impl AccConfig {
    pub fn new(h1: u64, w1: u64, w2: u64, a: u64, b: u64, c: u64, hmm_type: HmmType) -> Self {
        Self {
            h1,
            w1,
            w2,
            a,
            b,
            c,
            part_a: a,
            part_b: b,
            part_c: c,
            hmm_type,
        }
    }

    /// Unit configuration for accelerators that host no multiplies.
    pub fn unit(hmm_type: HmmType) -> Self {
        Self::new(1, 1, 1, 1, 1, 1, hmm_type)
    }

    /// Output write pattern across banks: `(a, c)`.
    pub fn write_pattern(&self) -> (u64, u64) {
        (self.a, self.c)
    }

    /// Activation read pattern across banks: `(a, b)`.
    pub fn read_pattern(&self) -> (u64, u64) {
        (self.a, self.b)
    }
}

/// Resource usage of one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utilization {
    pub aie: u64,
    pub plio: u64,
    pub ram_banks: u64,
    pub dsp: u64,
}

/// Which side of a transfer an endpoint is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    OffChip,
    Acc(usize),
}

impl Endpoint {
    pub fn acc(&self) -> Option<usize> {
        match self {
            Endpoint::Acc(i) => Some(*i),
            Endpoint::OffChip => None,
        }
    }
}

/// One data transaction between accelerators, or between an accelerator
/// and off-chip memory at the graph boundary. Bytes are per batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommEdge {
    pub producer: Endpoint,
    pub consumer: Endpoint,
    /// Producing layer; `None` for the boundary load.
    pub src_layer: Option<LayerId>,
    /// Consuming layer; `None` for the boundary store.
    pub dst_layer: Option<LayerId>,
    pub bytes: u64,
}

impl CommEdge {
    pub fn is_boundary(&self) -> bool {
        matches!(self.producer, Endpoint::OffChip) || matches!(self.consumer, Endpoint::OffChip)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn div_ceil(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Resource usage of `cfg` with the fabric kinds fused into the same
/// accelerator.
///
/// Cores: `a*b*c`. Stream ports: `(a+c)*b` for a pinned-weight unit; a
/// dual-stream unit pays `a*c` more ports for the second operand path.
/// RAM banks: the partition product times the banks each partition needs
/// for a double-buffered output tile. DSP: `a*c` nonlinear processors at
/// the fused engines' per-processor share, rounded up.
pub fn utilization(cfg: &AccConfig, kinds: &[LayerKind], p: &HardwareProfile) -> Utilization {
    let aie = cfg.a * cfg.b * cfg.c;
    let plio = match cfg.hmm_type {
        HmmType::Pinned => (cfg.a + cfg.c) * cfg.b,
        HmmType::DualStream => (cfg.a + cfg.c) * cfg.b + cfg.a * cfg.c,
    };
    let ram_util = div_ceil(2 * cfg.h1 * cfg.w2, p.bank_bytes);
    let ram_banks = cfg.part_a * cfg.part_b * cfg.part_c * ram_util.max(1);

    let mut dsp_total = 0u64;
    let mut seen: Vec<LayerKind> = Vec::new();
    for k in kinds {
        if !k.is_compute() && !seen.contains(k) {
            seen.push(*k);
            dsp_total += p.dsp_cost(*k);
        }
    }
    let streams = cfg.a * cfg.c;
    let dsp = if dsp_total == 0 {
        0
    } else {
        streams * div_ceil(dsp_total, streams)
    };

    Utilization {
        aie,
        plio,
        ram_banks,
        dsp,
    }
}

/// Cycles for an `m x k x n` multiply under `cfg`.
///
/// Tiled form: `ceil(m/(h1*a)) * ceil(k/(w1*b)) * ceil(n/(w2*c)) *
/// h1*w1*w2 / (mac * eff)`. When every division is exact this reduces to
/// `m*k*n / (a*b*c * mac * eff)`; the ceilings charge for padding on
/// non-divisible shapes.
pub fn mm_cycles(m: u64, k: u64, n: u64, cfg: &AccConfig, p: &HardwareProfile) -> f64 {
    let tm = div_ceil(m, cfg.h1 * cfg.a) as f64;
    let tk = div_ceil(k, cfg.w1 * cfg.b) as f64;
    let tn = div_ceil(n, cfg.w2 * cfg.c) as f64;
    let tile = (cfg.h1 * cfg.w1 * cfg.w2) as f64;
    tm * tk * tn * tile / (p.mac_per_aie_per_cycle as f64 * p.eff)
}

/// Ops per second given an op count and a cycle count.
pub fn throughput(ops: f64, cycles: f64, p: &HardwareProfile) -> f64 {
    if ops == 0.0 {
        return 0.0;
    }
    ops / (cycles / p.freq_aie_hz)
}

/// Core-local memory footprint of one layer under `cfg`, in bytes.
///
/// Dual-stream units ping-pong all three tiles. Pinned units ping-pong the
/// activation and output tiles and additionally hold this core's resident
/// weight slice, `ceil(k/b) * ceil(n/c)` bytes.
pub fn aie_footprint(cfg: &AccConfig, layer_k: u64, layer_n: u64) -> u64 {
    match cfg.hmm_type {
        HmmType::DualStream => 2 * (cfg.h1 * cfg.w1 + cfg.w1 * cfg.w2 + cfg.h1 * cfg.w2),
        HmmType::Pinned => {
            let pinned = div_ceil(layer_k, cfg.b) * div_ceil(layer_n, cfg.c);
            2 * (cfg.h1 * cfg.w1 + cfg.h1 * cfg.w2) + pinned
        }
    }
}

/// Footprint when the accelerator serves several weight-carrying layers:
/// every resident weight slice occupies local memory at once.
pub fn aie_footprint_multi(cfg: &AccConfig, weight_dims: &[(u64, u64)]) -> u64 {
    match cfg.hmm_type {
        HmmType::DualStream => aie_footprint(cfg, 0, 0),
        HmmType::Pinned => {
            let tiles = 2 * (cfg.h1 * cfg.w1 + cfg.h1 * cfg.w2);
            let pinned: u64 = weight_dims
                .iter()
                .map(|&(k, n)| div_ceil(k, cfg.b) * div_ceil(n, cfg.c))
                .sum();
            tiles + pinned
        }
    }
}

/// True when the producer's write pattern `(a, c)` and the consumer's read
/// pattern `(a, b)` divide each other componentwise, so a forced partition
/// exists.
pub fn divisible_parallelism(prod: (u64, u64), cons: (u64, u64)) -> bool {
    let div = |x: u64, y: u64| x.is_multiple_of(y) || y.is_multiple_of(x);
    div(prod.0, cons.0) && div(prod.1, cons.1)
}

/// Bank layout `(rows, cols)` that serves both the producer's writes and
/// the consumer's reads without conflicts, or `None` when the patterns are
/// not mutually divisible and the search must skip the configuration.
pub fn force_partition(prod: (u64, u64), cons: (u64, u64)) -> Option<(u64, u64)> {
    if !divisible_parallelism(prod, cons) {
        return None;
    }
    Some((lcm(prod.0, cons.0), lcm(prod.1, cons.1)))
}

/// Fabric cycles for a nonlinear or elementwise kernel over `rows` rows of
/// `row_len` elements with `lanes` lanes.
///
/// Pointwise kinds (reuse distance one) stream in a single pass. Reduction
/// kinds need a second pass over each row; a bypass line buffer overlaps
/// the passes so only the first row's fill is exposed:
/// `(rows + 1) * row_len / lanes` instead of `2 * rows * row_len / lanes`.
pub fn nonlinear_latency(
    kind: LayerKind,
    rows: u64,
    row_len: u64,
    lanes: u64,
    bypass: bool,
) -> Result<f64> {
    if kind.is_compute() {
        return Err(Error::NotNonlinear(kind));
    }
    let lanes = lanes.max(1) as f64;
    let r = rows as f64;
    let l = row_len as f64;
    let cycles = if kind.is_reduction() {
        if bypass {
            (r + 1.0) * l / lanes
        } else {
            2.0 * r * l / lanes
        }
    } else {
        r * l / lanes
    };
    Ok(cycles)
}

/// Cost in seconds of one edge given the chosen configurations.
///
/// Boundary edges pay the off-chip transfer. An on-chip edge is free when
/// the consumer-facing RAM partition covers the bank layout both patterns
/// need (forwarding overlaps with compute); otherwise the data is moved
/// bank by bank, serialized at the narrower side's port width.
pub fn edge_cost(edge: &CommEdge, cfgs: &[AccConfig], p: &HardwareProfile) -> f64 {
    if edge.is_boundary() {
        return edge.bytes as f64 / p.offchip_bw_bytes_per_s;
    }
    let prod = &cfgs[edge.producer.acc().expect("on-chip edge")];
    let cons = &cfgs[edge.consumer.acc().expect("on-chip edge")];
    if let Some((rows, cols)) = force_partition(prod.write_pattern(), cons.read_pattern()) {
        if cons.part_a.is_multiple_of(rows) && cons.part_b.is_multiple_of(cols) {
            return 0.0;
        }
    }
    let prod_banks = prod.part_a * prod.part_b * prod.part_c;
    let cons_banks = cons.part_a * cons.part_b * cons.part_c;
    let banks = prod_banks.min(cons_banks).max(1);
    edge.bytes as f64 / (banks as f64 * BANK_WORD_BYTES as f64 * p.freq_pl_hz)
}

/// Seconds of overhead per edge, aligned with `edges`.
pub fn comm_overhead(edges: &[CommEdge], cfgs: &[AccConfig], p: &HardwareProfile) -> Vec<f64> {
    edges.iter().map(|e| edge_cost(e, cfgs, p)).collect()
}
