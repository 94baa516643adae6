//! Greedy layer-to-accelerator pipeline scheduling, inter-accelerator
//! transaction extraction, memory allocation, and proportional hardware
//! partitioning.
//!
//! Scheduling one candidate is single-threaded and deterministic; many
//! candidates may be scheduled concurrently since nothing here mutates
//! shared state.

use crate::error::{Error, Result};
use crate::graph::{topo_order, total_macs, Graph, LayerId, LayerKind};
use crate::hw::HardwareProfile;
use crate::perf::{edge_cost, mm_cycles, AccConfig, CommEdge, Endpoint};
use serde::{Deserialize, Serialize};

/// Total map from layer id to accelerator index.
///
/// Attention layers (two runtime operands) force their accelerator's
/// matrix unit to the dual-stream flavor; the customization stage derives
/// that flag from the layers it receives, so any total map is admissible.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub acc_of: Vec<usize>,
}

impl Assignment {
    pub fn new(acc_of: Vec<usize>) -> Self {
        Self { acc_of }
    }

    /// Every layer on accelerator 0.
    pub fn sequential(n_layers: usize) -> Self {
        Self {
            acc_of: vec![0; n_layers],
        }
    }

    /// Layer `i` on accelerator `i mod n_acc`.
    pub fn round_robin(n_layers: usize, n_acc: usize) -> Self {
        let n_acc = n_acc.max(1);
        Self {
            acc_of: (0..n_layers).map(|i| i % n_acc).collect(),
        }
    }

    pub fn acc(&self, layer: LayerId) -> usize {
        self.acc_of[layer as usize]
    }

    /// Number of accelerators, `max index + 1`.
    pub fn n_accs(&self) -> usize {
        self.acc_of.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Relabels accelerators by order of first appearance so equivalent
    /// maps compare equal and no index is skipped.
    pub fn canonicalize(&mut self) {
        let mut relabel: Vec<Option<usize>> = vec![None; self.n_accs()];
        let mut next = 0usize;
        for a in &mut self.acc_of {
            let slot = &mut relabel[*a];
            if slot.is_none() {
                *slot = Some(next);
                next += 1;
            }
            *a = slot.unwrap();
        }
    }

    pub fn canonicalized(mut self) -> Self {
        self.canonicalize();
        self
    }
}

/// One timed placement of a `(batch, layer)` execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub batch: u32,
    pub layer: LayerId,
    pub acc: usize,
    pub start: f64,
    pub end: f64,
}

/// Timed placement of every `(batch, layer)` execution. Entries are sorted
/// by `(start, batch, topo position)`; per-accelerator intervals never
/// overlap. Batches are independent copies of the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub entries: Vec<ScheduleEntry>,
    pub makespan: f64,
    pub acc_busy: Vec<f64>,
    pub n_batches: u32,
}

impl Schedule {
    /// Accelerators in order of first appearance; the customization stage
    /// searches them in this order.
    pub fn trace_accs(&self) -> Vec<usize> {
        let mut seen: Vec<usize> = Vec::new();
        for e in &self.entries {
            if !seen.contains(&e.acc) {
                seen.push(e.acc);
            }
        }
        seen
    }
}

/// Per-accelerator on-chip memory demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccMem {
    pub weight_bytes: u64,
    pub activation_bytes: u64,
    pub ram_banks_min: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemPlan {
    pub per_acc: Vec<AccMem>,
}

/// Per-accelerator resource budgets carved out of the device.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccBudget {
    pub aie: u64,
    pub plio: u64,
    pub ram_banks: u64,
    pub dsp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HwPartition {
    pub per_acc: Vec<AccBudget>,
}

/// Greedy list scheduling of `n_bat` independent graph copies.
///
/// Every entry joins the pipeline as soon as its accelerator is available
/// and its in-batch dependencies are resolved: the dispatcher repeatedly
/// commits the ready entry with the earliest feasible start, breaking ties
/// by `(batch, topo position)`. Also returns the data transactions the
/// assignment induces: one edge per dependency that crosses accelerators
/// plus the boundary load and store edges.
pub fn list_schedule(
    assign: &Assignment,
    g: &Graph,
    n_bat: u32,
    durations: &[f64],
) -> Result<(Schedule, Vec<CommEdge>)> {
    assert_eq!(assign.acc_of.len(), g.len(), "assignment must be total");
    assert_eq!(durations.len(), g.len());
    let order = topo_order(g)?;
    let n_layers = g.len();
    let n_acc = assign.n_accs().max(1);

    let mut topo_pos = vec![0usize; n_layers];
    for (pos, id) in order.iter().enumerate() {
        topo_pos[*id as usize] = pos;
    }
    let mut dependents: Vec<Vec<LayerId>> = vec![Vec::new(); n_layers];
    for l in &g.layers {
        for d in &l.deps {
            dependents[*d as usize].push(l.id);
        }
    }

    let total = n_layers * n_bat as usize;
    let idx = |batch: u32, layer: LayerId| batch as usize * n_layers + layer as usize;

    let mut pending_deps: Vec<usize> = Vec::with_capacity(total);
    for _ in 0..n_bat {
        for l in &g.layers {
            pending_deps.push(l.deps.len());
        }
    }
    let mut dep_end: Vec<f64> = vec![0.0; total];
    let mut ready: Vec<(u32, LayerId)> = Vec::new();
    for b in 0..n_bat {
        for l in &g.layers {
            if l.deps.is_empty() {
                ready.push((b, l.id));
            }
        }
    }

    let mut acc_free = vec![0.0f64; n_acc];
    let mut acc_busy = vec![0.0f64; n_acc];
    let mut entries: Vec<ScheduleEntry> = Vec::with_capacity(total);

    while !ready.is_empty() {
        // Pick the ready entry that can start earliest.
        let start_of = |acc_free: &[f64], dep_end: &[f64], b: u32, l: LayerId| {
            acc_free[assign.acc(l)].max(dep_end[idx(b, l)])
        };
        let mut best = 0usize;
        for (i, &(b, l)) in ready.iter().enumerate() {
            let key = (start_of(&acc_free, &dep_end, b, l), b, topo_pos[l as usize]);
            let cur = ready[best];
            let cur_key = (
                start_of(&acc_free, &dep_end, cur.0, cur.1),
                cur.0,
                topo_pos[cur.1 as usize],
            );
            if key < cur_key {
                best = i;
            }
        }
        let (batch, layer) = ready.swap_remove(best);
        let acc = assign.acc(layer);
        let e = idx(batch, layer);
        let start = acc_free[acc].max(dep_end[e]);
        let dur = durations[layer as usize];
        let end = start + dur;
        acc_free[acc] = end;
        acc_busy[acc] += dur;
        entries.push(ScheduleEntry {
            batch,
            layer,
            acc,
            start,
            end,
        });
        for &dep in &dependents[layer as usize] {
            let de = idx(batch, dep);
            if dep_end[de] < end {
                dep_end[de] = end;
            }
            pending_deps[de] -= 1;
            if pending_deps[de] == 0 {
                ready.push((batch, dep));
            }
        }
    }

    if entries.len() != total {
        // Unreachable for a validated DAG; topo_order has already errored.
        return Err(Error::InvalidGraph("unschedulable graph".into()));
    }

    entries.sort_by(|x, y| {
        x.start
            .total_cmp(&y.start)
            .then(x.batch.cmp(&y.batch))
            .then(topo_pos[x.layer as usize].cmp(&topo_pos[y.layer as usize]))
    });
    let makespan = entries.iter().map(|e| e.end).fold(0.0f64, f64::max);

    Ok((
        Schedule {
            entries,
            makespan,
            acc_busy,
            n_batches: n_bat,
        },
        extract_edges(g, assign),
    ))
}

/// Structural data transactions of an assignment: boundary loads for graph
/// sources, one edge per accelerator-crossing dependency, boundary stores
/// for graph sinks. Bytes are per batch.
pub fn extract_edges(g: &Graph, assign: &Assignment) -> Vec<CommEdge> {
    let mut edges = Vec::new();
    for s in g.sources() {
        edges.push(CommEdge {
            producer: Endpoint::OffChip,
            consumer: Endpoint::Acc(assign.acc(s)),
            src_layer: None,
            dst_layer: Some(s),
            bytes: g.layer(s).in_bytes(),
        });
    }
    for l in &g.layers {
        for &d in &l.deps {
            let pa = assign.acc(d);
            let ca = assign.acc(l.id);
            if pa != ca {
                edges.push(CommEdge {
                    producer: Endpoint::Acc(pa),
                    consumer: Endpoint::Acc(ca),
                    src_layer: Some(d),
                    dst_layer: Some(l.id),
                    bytes: g.layer(d).out_bytes(),
                });
            }
        }
    }
    for t in g.sinks() {
        edges.push(CommEdge {
            producer: Endpoint::Acc(assign.acc(t)),
            consumer: Endpoint::OffChip,
            src_layer: Some(t),
            dst_layer: None,
            bytes: g.layer(t).out_bytes(),
        });
    }
    edges
}

/// Minimum on-chip memory per accelerator: all resident weights plus a
/// double buffer for the largest in-flight transfer in each direction.
pub fn mem_allocation(
    edges: &[CommEdge],
    g: &Graph,
    assign: &Assignment,
    p: &HardwareProfile,
) -> MemPlan {
    let n_acc = assign.n_accs().max(1);
    let mut per_acc = vec![
        AccMem {
            weight_bytes: 0,
            activation_bytes: 0,
            ram_banks_min: 0,
        };
        n_acc
    ];
    for l in &g.layers {
        per_acc[assign.acc(l.id)].weight_bytes += l.weight_bytes();
    }
    let mut in_max = vec![0u64; n_acc];
    let mut out_max = vec![0u64; n_acc];
    for e in edges {
        if let Some(acc) = e.consumer.acc() {
            in_max[acc] = in_max[acc].max(e.bytes);
        }
        if let Some(acc) = e.producer.acc() {
            out_max[acc] = out_max[acc].max(e.bytes);
        }
    }
    for (i, mem) in per_acc.iter_mut().enumerate() {
        mem.activation_bytes = 2 * (in_max[i] + out_max[i]);
        let total = mem.weight_bytes + mem.activation_bytes;
        mem.ram_banks_min = total.div_ceil(p.bank_bytes);
    }
    MemPlan { per_acc }
}

/// Splits `budget` proportionally to `weights` by the largest-remainder
/// rule, then raises every share to `min_each` by taking from the largest
/// shares. Returns `None` when `budget < n * min_each`.
fn proportional_split(budget: u64, weights: &[u64], min_each: u64) -> Option<Vec<u64>> {
    let n = weights.len();
    if n == 0 {
        return Some(Vec::new());
    }
    if budget < min_each * n as u64 {
        return None;
    }
    let w_sum: u128 = weights.iter().map(|&w| w as u128).sum();
    let ones = vec![1u64; n];
    let weights: &[u64] = if w_sum == 0 { &ones } else { weights };
    let w_sum: u128 = weights.iter().map(|&w| w as u128).sum();

    let mut shares = vec![0u64; n];
    let mut rems: Vec<(u128, usize)> = Vec::with_capacity(n);
    let mut assigned = 0u64;
    for (i, &w) in weights.iter().enumerate() {
        let num = budget as u128 * w as u128;
        shares[i] = (num / w_sum) as u64;
        rems.push((num % w_sum, i));
        assigned += shares[i];
    }
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = budget - assigned;
    for &(_, i) in &rems {
        if left == 0 {
            break;
        }
        shares[i] += 1;
        left -= 1;
    }
    // Raise starving shares to the minimum.
    while let Some(low) = (0..n).find(|&i| shares[i] < min_each) {
        let donor = (0..n)
            .filter(|&i| shares[i] > min_each)
            .max_by_key(|&i| (shares[i], usize::MAX - i))
            .expect("budget admits the minimum");
        shares[donor] -= 1;
        shares[low] += 1;
    }
    Some(shares)
}

/// Carves per-accelerator budgets out of the device.
///
/// Cores and stream ports go proportionally to assigned MACs (largest
/// remainder, at least one core and an input/output port pair each). RAM
/// starts from the memory plan's minimum and the remaining banks are
/// spread by MACs. DSP follows each accelerator's fused nonlinear engine
/// cost, scaled up into the device budget so the per-stream rounding in
/// the utilization model has headroom.
pub fn hw_partition(
    mem: &MemPlan,
    _sched: &Schedule,
    g: &Graph,
    assign: &Assignment,
    p: &HardwareProfile,
) -> Result<HwPartition> {
    let n_acc = assign.n_accs().max(1);
    let mut macs = vec![0u64; n_acc];
    for l in &g.layers {
        macs[assign.acc(l.id)] += l.macs();
    }

    let aie = proportional_split(p.aie_total, &macs, 1).ok_or(Error::BudgetExceeded {
        resource: "aie",
        needed: n_acc as u64,
        budget: p.aie_total,
    })?;
    let plio = proportional_split(p.plio_budget, &macs, 2).ok_or(Error::BudgetExceeded {
        resource: "plio",
        needed: 2 * n_acc as u64,
        budget: p.plio_budget,
    })?;

    let ram_min: u64 = mem.per_acc.iter().map(|m| m.ram_banks_min).sum();
    let ram_budget = p.ram_bank_budget();
    if ram_min > ram_budget {
        return Err(Error::BudgetExceeded {
            resource: "ram_banks",
            needed: ram_min,
            budget: ram_budget,
        });
    }
    let slack = proportional_split(ram_budget - ram_min, &macs, 0).expect("min 0 always fits");

    let mut dsp_need = vec![0u64; n_acc];
    for (acc, need) in dsp_need.iter_mut().enumerate() {
        let mut seen: Vec<LayerKind> = Vec::new();
        for l in g.layers.iter().filter(|l| assign.acc(l.id) == acc) {
            if !l.kind.is_compute() && !seen.contains(&l.kind) {
                seen.push(l.kind);
                *need += p.dsp_cost(l.kind);
            }
        }
    }
    let dsp_sum: u64 = dsp_need.iter().sum();
    if dsp_sum > p.dsp_total {
        return Err(Error::BudgetExceeded {
            resource: "dsp",
            needed: dsp_sum,
            budget: p.dsp_total,
        });
    }
    let dsp: Vec<u64> = if dsp_sum == 0 {
        vec![0; n_acc]
    } else {
        dsp_need
            .iter()
            .map(|&need| ((p.dsp_total as u128 * need as u128) / dsp_sum as u128) as u64)
            .collect()
    };

    let per_acc = (0..n_acc)
        .map(|i| AccBudget {
            aie: aie[i],
            plio: plio[i],
            ram_banks: mem.per_acc[i].ram_banks_min + slack[i],
            dsp: dsp[i],
        })
        .collect();
    Ok(HwPartition { per_acc })
}

/// Cost components of one layer execution. The analytical duration of an
/// entry is `dma_in + copy_in + compute + dma_out`, in that order, so the
/// simulator can reproduce identical floating-point sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryCost {
    pub compute_s: f64,
    pub dma_in_s: f64,
    pub copy_in_s: f64,
    pub dma_out_s: f64,
}

impl EntryCost {
    pub fn total(&self) -> f64 {
        ((self.dma_in_s + self.copy_in_s) + self.compute_s) + self.dma_out_s
    }
}

/// Per-layer cost components under the chosen configurations.
///
/// Compute time covers the matrix-multiply kinds only; nonlinear kernels
/// ride the fine-grained pipeline and are scored by the simulator instead.
/// Incoming serialized copies and boundary transfers attach to the
/// consuming layer, boundary stores to the producing sink.
pub fn entry_costs(
    g: &Graph,
    assign: &Assignment,
    cfgs: &[AccConfig],
    edges: &[CommEdge],
    p: &HardwareProfile,
) -> Vec<EntryCost> {
    let mut costs: Vec<EntryCost> = g
        .layers
        .iter()
        .map(|l| {
            let compute_s = if l.kind.is_compute() {
                let cfg = &cfgs[assign.acc(l.id)];
                l.heads as f64 * mm_cycles(l.m, l.k, l.n, cfg, p) / p.freq_aie_hz
            } else {
                0.0
            };
            EntryCost {
                compute_s,
                dma_in_s: 0.0,
                copy_in_s: 0.0,
                dma_out_s: 0.0,
            }
        })
        .collect();
    for e in edges {
        let cost = edge_cost(e, cfgs, p);
        match (e.src_layer, e.dst_layer) {
            (_, Some(dst)) if e.is_boundary() => costs[dst as usize].dma_in_s += cost,
            (Some(src), None) => costs[src as usize].dma_out_s += cost,
            (_, Some(dst)) => costs[dst as usize].copy_in_s += cost,
            (None, None) => {}
        }
    }
    costs
}

/// Latency and throughput of a timed schedule: the makespan in seconds and
/// `n_bat * total ops / latency`.
pub fn evaluate(sched: &Schedule, g: &Graph, p: &HardwareProfile) -> (f64, f64) {
    let _ = p;
    let latency = sched.makespan;
    let ops = 2.0 * total_macs(g) as f64 * sched.n_batches as f64;
    let tput = if latency > 0.0 { ops / latency } else { 0.0 };
    (latency, tput)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Layer;

    fn chain(n: usize) -> Graph {
        let layers = (0..n)
            .map(|i| Layer {
                id: i as LayerId,
                kind: LayerKind::MatMul,
                m: 192,
                k: 192,
                n: 576,
                heads: 1,
                deps: if i == 0 {
                    vec![]
                } else {
                    vec![i as LayerId - 1]
                },
                activation_inputs: 1,
            })
            .collect();
        Graph { layers }
    }

    #[test]
    fn reference_two_acc_pipeline_makespans() {
        let g = chain(4);
        let durs = vec![1.0; 4];

        // Strategy 0: layers {0,3} on acc0, {1,2} on acc1; two batches.
        let a0 = Assignment::new(vec![0, 1, 1, 0]);
        let (s0, _) = list_schedule(&a0, &g, 2, &durs).unwrap();
        assert_eq!(s0.makespan, 6.0);

        // The enumerated best alternation finishes in 5.
        let a1 = Assignment::new(vec![0, 1, 0, 1]);
        let (s1, _) = list_schedule(&a1, &g, 2, &durs).unwrap();
        assert_eq!(s1.makespan, 5.0);
    }

    #[test]
    fn single_acc_serializes_exactly() {
        let g = chain(3);
        let durs = vec![2.0, 3.0, 5.0];
        let a = Assignment::sequential(3);
        let (s, _) = list_schedule(&a, &g, 1, &durs).unwrap();
        assert_eq!(s.makespan, 10.0);
        let (s4, _) = list_schedule(&a, &g, 4, &durs).unwrap();
        assert_eq!(s4.makespan, 40.0);
    }

    #[test]
    fn per_acc_intervals_are_disjoint() {
        let g = chain(6);
        let durs = vec![1.0, 2.0, 1.5, 0.5, 3.0, 1.0];
        let a = Assignment::new(vec![0, 1, 2, 0, 1, 2]);
        let (s, _) = list_schedule(&a, &g, 3, &durs).unwrap();
        for acc in 0..3 {
            let mut ivs: Vec<(f64, f64)> = s
                .entries
                .iter()
                .filter(|e| e.acc == acc)
                .map(|e| (e.start, e.end))
                .collect();
            ivs.sort_by(|x, y| x.0.total_cmp(&y.0));
            for w in ivs.windows(2) {
                assert!(w[0].1 <= w[1].0 + 1e-12, "overlap on acc {acc}: {w:?}");
            }
        }
        // Dependencies hold within each batch.
        for e in &s.entries {
            for &d in &g.layer(e.layer).deps {
                let de = s
                    .entries
                    .iter()
                    .find(|x| x.batch == e.batch && x.layer == d)
                    .unwrap();
                assert!(de.end <= e.start + 1e-12);
            }
        }
    }

    #[test]
    fn edges_cross_accs_and_boundaries() {
        let g = chain(3);
        let a = Assignment::new(vec![0, 1, 0]);
        let edges = extract_edges(&g, &a);
        let onchip: Vec<_> = edges.iter().filter(|e| !e.is_boundary()).collect();
        assert_eq!(onchip.len(), 2);
        assert_eq!(onchip[0].src_layer, Some(0));
        assert_eq!(onchip[0].dst_layer, Some(1));
        let boundary_in = edges
            .iter()
            .filter(|e| e.dst_layer.is_some() && e.is_boundary());
        assert_eq!(boundary_in.count(), 1);
        // Output bytes of a 192x576 layer travel on each on-chip edge.
        assert_eq!(onchip[0].bytes, 192 * 576);
    }

    #[test]
    fn mem_allocation_weights_and_double_buffer() {
        let p = HardwareProfile::vck190();
        let g = Graph {
            layers: vec![Layer {
                id: 0,
                kind: LayerKind::MatMul,
                m: 64,
                k: 192,
                n: 576,
                heads: 1,
                deps: vec![],
                activation_inputs: 1,
            }],
        };
        let a = Assignment::sequential(1);
        let edges = extract_edges(&g, &a);
        let mem = mem_allocation(&edges, &g, &a, &p);
        assert_eq!(mem.per_acc[0].weight_bytes, 110_592);
        // Double buffer of the boundary load plus the boundary store.
        assert_eq!(mem.per_acc[0].activation_bytes, 2 * (64 * 192 + 64 * 576));

        let empty = Graph { layers: vec![] };
        let ea = Assignment::new(vec![]);
        let m2 = mem_allocation(&[], &empty, &ea, &p);
        assert_eq!(m2.per_acc.len(), 1);
        assert_eq!(m2.per_acc[0].weight_bytes, 0);
        assert_eq!(m2.per_acc[0].ram_banks_min, 0);
    }

    #[test]
    fn mem_allocation_is_assignment_local() {
        let p = HardwareProfile::vck190();
        let g = chain(4);
        let a = Assignment::new(vec![0, 1, 0, 1]);
        let b = Assignment::new(vec![0, 1, 1, 1]);
        let ma = mem_allocation(&extract_edges(&g, &a), &g, &a, &p);
        let mb = mem_allocation(&extract_edges(&g, &b), &g, &b, &p);
        // Acc 1 changed; acc 0 weights stay put.
        assert_eq!(
            ma.per_acc[0].weight_bytes - g.layer(2).weight_bytes(),
            mb.per_acc[0].weight_bytes
        );
    }

    #[test]
    fn partition_proportional_to_macs() {
        let p = HardwareProfile::vck190();
        let g = chain(2);
        let a = Assignment::new(vec![0, 1]);
        let (s, e) = list_schedule(&a, &g, 1, &[1.0, 1.0]).unwrap();
        let mem = mem_allocation(&e, &g, &a, &p);
        let part = hw_partition(&mem, &s, &g, &a, &p).unwrap();
        assert_eq!(part.per_acc[0].aie, 200);
        assert_eq!(part.per_acc[1].aie, 200);

        // A single accelerator receives the whole device.
        let a1 = Assignment::sequential(2);
        let (s1, e1) = list_schedule(&a1, &g, 1, &[1.0, 1.0]).unwrap();
        let mem1 = mem_allocation(&e1, &g, &a1, &p);
        let part1 = hw_partition(&mem1, &s1, &g, &a1, &p).unwrap();
        assert_eq!(part1.per_acc[0].aie, 400);
        assert_eq!(part1.per_acc[0].plio, 220);
    }

    #[test]
    fn partition_three_to_one_ratio() {
        let p = HardwareProfile::vck190();
        let mut g = chain(2);
        g.layers[0].m = 576; // 3x the MACs of layer 1
        g.layers[0].deps = vec![];
        g.layers[1].m = 192;
        let a = Assignment::new(vec![0, 1]);
        let (s, e) = list_schedule(&a, &g, 1, &[1.0, 1.0]).unwrap();
        let mem = mem_allocation(&e, &g, &a, &p);
        let part = hw_partition(&mem, &s, &g, &a, &p).unwrap();
        assert_eq!(part.per_acc[0].aie, 300);
        assert_eq!(part.per_acc[1].aie, 100);
    }

    #[test]
    fn partition_rejects_ram_overflow() {
        let mut p = HardwareProfile::vck190();
        p.bram_total = 1;
        p.uram_total = 0;
        let g = chain(2);
        let a = Assignment::sequential(2);
        let (s, e) = list_schedule(&a, &g, 1, &[1.0, 1.0]).unwrap();
        let mem = mem_allocation(&e, &g, &a, &p);
        let err = hw_partition(&mem, &s, &g, &a, &p).unwrap_err();
        assert!(matches!(
            err,
            Error::BudgetExceeded {
                resource: "ram_banks",
                ..
            }
        ));
    }

    #[test]
    fn deit_weights_total_near_model_size() {
        let p = HardwareProfile::vck190();
        let spec = crate::graph::ModelSpec::builtin("deit_t").unwrap();
        let g = crate::graph::build_transformer(&spec).unwrap();
        let a = Assignment::sequential(g.len());
        let mem = mem_allocation(&extract_edges(&g, &a), &g, &a, &p);
        let total: u64 = mem.per_acc.iter().map(|m| m.weight_bytes).sum();
        // One byte per parameter; the published model size is 5.6 M.
        let rel = (total as f64 - 5.6e6).abs() / 5.6e6;
        assert!(rel < 0.08, "weights {total} B, rel {rel:.3}");
    }

    #[test]
    fn zero_op_graph_latency_is_boundary_dma_only() {
        let p = HardwareProfile::vck190();
        let g = Graph {
            layers: vec![Layer {
                id: 0,
                kind: LayerKind::LayerNorm,
                m: 197,
                k: 1,
                n: 192,
                heads: 1,
                deps: vec![],
                activation_inputs: 1,
            }],
        };
        let a = Assignment::sequential(1);
        let edges = extract_edges(&g, &a);
        let cfgs = vec![crate::perf::AccConfig::unit(crate::perf::HmmType::Pinned)];
        let costs = entry_costs(&g, &a, &cfgs, &edges, &p);
        let durs: Vec<f64> = costs.iter().map(|c| c.total()).collect();
        let (s, _) = list_schedule(&a, &g, 1, &durs).unwrap();
        let dma = 2.0 * (197 * 192) as f64 / p.offchip_bw_bytes_per_s;
        assert_eq!(s.makespan, dma);
    }

    #[test]
    fn trace_order_is_first_appearance() {
        let g = chain(4);
        let a = Assignment::new(vec![1, 0, 1, 0]);
        // Canonical labels follow first use.
        let canon = a.clone().canonicalized();
        assert_eq!(canon.acc_of, vec![0, 1, 0, 1]);
        let (s, _) = list_schedule(&canon, &g, 1, &[1.0; 4]).unwrap();
        assert_eq!(s.trace_accs(), vec![0, 1]);
    }

    #[test]
    fn proportional_split_enforces_minimum() {
        let shares = proportional_split(10, &[100, 0, 0], 1).unwrap();
        assert_eq!(shares.iter().sum::<u64>(), 10);
        assert!(shares.iter().all(|&s| s >= 1));
        assert_eq!(proportional_split(1, &[1, 1], 1), None);
        assert_eq!(
            proportional_split(7, &[0, 0], 0)
                .unwrap()
                .iter()
                .sum::<u64>(),
            7
        );
    }
}
