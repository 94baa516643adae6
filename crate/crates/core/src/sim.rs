//! Discrete-event replay of a scheduled design.
//!
//! Each accelerator contributes two stations: the matrix unit, ticking at
//! the array clock, and the fused fabric engine chain, ticking at the
//! fabric clock. Entries occupy their station in the order the schedule
//! fixed; an entry may start once its station is free, its in-batch
//! dependencies have finished, and its incoming serialized copies have
//! drained through the destination RAM bank port. Boundary transfers ride
//! each accelerator's own DMA engine at the off-chip rate and are part of
//! the entry's occupancy.
//!
//! One simulation is strictly single threaded; identical inputs replay to
//! identical event logs.

use crate::dse::DesignPoint;
use crate::error::{Error, Result};
use crate::graph::{Graph, LayerId};
use crate::hw::HardwareProfile;
use crate::perf::{edge_cost, nonlinear_latency, AccConfig, HCE_LANES};
use crate::sched::{entry_costs, extract_edges};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    AccStart,
    AccEnd,
    XferStart,
    XferEnd,
    BankBusy,
    BankFree,
}

/// One timestamped simulator event. Ties are ordered by `seq`, the
/// deterministic emission number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
    pub acc: usize,
    pub batch: u32,
    pub layer: Option<LayerId>,
}

/// Idle-time decomposition of one accelerator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StallBreakdown {
    /// Seconds an entry waited on serialized bank copies.
    pub bank_conflict_s: f64,
    /// Seconds a station idled waiting for dependencies.
    pub dep_wait_s: f64,
    /// Seconds spent on boundary transfers.
    pub dma_wait_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub makespan_s: f64,
    /// Makespan expressed in array-clock cycles.
    pub makespan_cycles: f64,
    /// Busy fraction of each accelerator's primary station.
    pub utilization: Vec<f64>,
    pub stalls: Vec<StallBreakdown>,
    pub events: Vec<Event>,
}

impl SimReport {
    pub fn total_bank_conflict_s(&self) -> f64 {
        self.stalls.iter().map(|s| s.bank_conflict_s).sum()
    }

    /// Event log as JSON lines.
    pub fn events_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// Model the bypass line buffer in reduction kernels.
    pub bypass_nonlinear: bool,
    /// Honor forced RAM bank partitions; when false every on-chip edge
    /// whose patterns conflict under the default partition serializes.
    pub force_partition: bool,
    /// Lanes of each fabric engine.
    pub hce_lanes: u64,
    /// Collect the event log.
    pub trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            bypass_nonlinear: true,
            force_partition: true,
            hce_lanes: HCE_LANES,
            trace: false,
        }
    }
}

/// Station index within one accelerator: the matrix unit plus one fabric
/// engine per fused kind (the engines are separate hardware blocks and
/// run concurrently).
fn station_of(kind: crate::graph::LayerKind) -> usize {
    use crate::graph::LayerKind::*;
    match kind {
        MatMul | BatchMatMul | PatchEmbed => 0,
        Softmax => 1,
        LayerNorm => 2,
        GeLU => 3,
        Transpose => 4,
        Reformat => 5,
        VectorAdd => 6,
    }
}

const STATIONS_PER_ACC: usize = 7;

/// Replays `design` at event granularity and reports the makespan,
/// per-accelerator utilization, and stall decomposition.
///
/// Matrix entries occupy the matrix station for their modeled cycles;
/// fabric entries occupy the engine chain for their nonlinear latency.
/// Cross-accelerator edges are free when the forced partition holds,
/// otherwise they serialize through the destination bank port.
pub fn simulate(
    design: &DesignPoint,
    g: &Graph,
    p: &HardwareProfile,
    opts: &SimOptions,
) -> Result<SimReport> {
    let assign = &design.assignment;
    let n_acc = assign.n_accs().max(1);
    let n_layers = g.len();
    let n_bat = design.schedule.n_batches.max(1);
    let edges = extract_edges(g, assign);

    // Edge costs as the simulator sees them: stripping the forced
    // partitions recreates the conflicting default layout.
    let sim_cfgs: Vec<AccConfig> = if opts.force_partition {
        design.cfgs.clone()
    } else {
        design
            .cfgs
            .iter()
            .map(|c| {
                let mut d = *c;
                d.part_a = d.a;
                d.part_b = d.b;
                d.part_c = d.c;
                d
            })
            .collect()
    };
    let costs = entry_costs(g, assign, &design.cfgs, &edges, p);

    // Incoming serialized copies per layer: (edge index, seconds).
    let mut copies_in: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_layers];
    for (ei, e) in edges.iter().enumerate() {
        if e.is_boundary() {
            continue;
        }
        let cost = edge_cost(e, &sim_cfgs, p);
        if cost > 0.0 {
            copies_in[e.dst_layer.expect("on-chip edge") as usize].push((ei, cost));
        }
    }

    // Station order: schedule order restricted to each station.
    let mut queues: Vec<Vec<(u32, LayerId)>> = vec![Vec::new(); n_acc * STATIONS_PER_ACC];
    let qid = |acc: usize, st: usize| acc * STATIONS_PER_ACC + st;
    for e in &design.schedule.entries {
        queues[qid(e.acc, station_of(g.layer(e.layer).kind))].push((e.batch, e.layer));
    }

    let eidx = |batch: u32, layer: LayerId| batch as usize * n_layers + layer as usize;
    let mut end_time: Vec<Option<f64>> = vec![None; n_layers * n_bat as usize];
    let mut ptr = vec![0usize; n_acc * STATIONS_PER_ACC];
    let mut station_free = vec![0.0f64; n_acc * STATIONS_PER_ACC];
    let mut port_free = vec![0.0f64; n_acc];
    let mut busy = vec![0.0f64; n_acc * STATIONS_PER_ACC];
    let mut stalls = vec![StallBreakdown::default(); n_acc];
    let mut events: Vec<Event> = Vec::new();
    let mut seq = 0u64;
    let emit = |events: &mut Vec<Event>,
                seq: &mut u64,
                time: f64,
                kind: EventKind,
                acc: usize,
                batch: u32,
                layer: Option<LayerId>| {
        events.push(Event {
            time,
            seq: *seq,
            kind,
            acc,
            batch,
            layer,
        });
        *seq += 1;
    };

    let total: usize = queues.iter().map(Vec::len).sum();
    let mut done = 0usize;

    while done < total {
        // Pick the dispatchable station head with the earliest start;
        // ties resolve by accelerator then station index.
        let mut chosen: Option<(f64, usize)> = None;
        for q in 0..queues.len() {
            if ptr[q] >= queues[q].len() {
                continue;
            }
            let (batch, layer) = queues[q][ptr[q]];
            let l = g.layer(layer);
            let mut deps_end = 0.0f64;
            let mut ready = true;
            for &d in &l.deps {
                match end_time[eidx(batch, d)] {
                    Some(t) => deps_end = deps_end.max(t),
                    None => {
                        ready = false;
                        break;
                    }
                }
            }
            if !ready {
                continue;
            }
            // Speculative copy completion: reads the port clock without
            // advancing it.
            let acc = assign.acc(layer);
            let mut port = port_free[acc];
            let mut comm_done = deps_end;
            for &(_, dur) in &copies_in[layer as usize] {
                let start = port.max(deps_end);
                port = start + dur;
                comm_done = comm_done.max(port);
            }
            let start = station_free[q].max(comm_done);
            match chosen {
                Some((t, _)) if t <= start => {}
                _ => chosen = Some((start, q)),
            }
        }

        let Some((_, q)) = chosen else {
            let blocked: Vec<(u32, LayerId)> = queues
                .iter()
                .enumerate()
                .filter(|(q, list)| ptr[*q] < list.len())
                .map(|(q, list)| list[ptr[q]])
                .collect();
            return Err(Error::Deadlock(blocked));
        };

        let (batch, layer) = queues[q][ptr[q]];
        ptr[q] += 1;
        done += 1;
        let l = g.layer(layer);
        let acc = assign.acc(layer);

        let mut deps_end = 0.0f64;
        for &d in &l.deps {
            deps_end = deps_end.max(end_time[eidx(batch, d)].unwrap());
        }

        // Commit incoming copies on the destination bank port.
        let mut comm_done = deps_end;
        for &(_, dur) in &copies_in[layer as usize] {
            let start = port_free[acc].max(deps_end);
            let end = start + dur;
            if opts.trace {
                emit(
                    &mut events,
                    &mut seq,
                    start,
                    EventKind::BankBusy,
                    acc,
                    batch,
                    Some(layer),
                );
                emit(
                    &mut events,
                    &mut seq,
                    start,
                    EventKind::XferStart,
                    acc,
                    batch,
                    Some(layer),
                );
                emit(
                    &mut events,
                    &mut seq,
                    end,
                    EventKind::XferEnd,
                    acc,
                    batch,
                    Some(layer),
                );
                emit(
                    &mut events,
                    &mut seq,
                    end,
                    EventKind::BankFree,
                    acc,
                    batch,
                    Some(layer),
                );
            }
            port_free[acc] = end;
            comm_done = comm_done.max(end);
        }

        let cost = &costs[layer as usize];
        let compute = if l.kind.is_compute() {
            cost.compute_s
        } else {
            nonlinear_latency(l.kind, l.m, l.n, opts.hce_lanes, opts.bypass_nonlinear)?
                / p.freq_pl_hz
        };
        // Same composition order as the analytical duration so that
        // conflict-free replays agree bit for bit.
        let occupancy = ((cost.dma_in_s + 0.0) + compute) + cost.dma_out_s;

        let free = station_free[q];
        let start = free.max(comm_done);
        let end = start + occupancy;

        let gap = start - free;
        if gap > 0.0 {
            let dep_part = (deps_end - free).clamp(0.0, gap);
            let bank_part = (comm_done - deps_end.max(free)).clamp(0.0, gap - dep_part);
            stalls[acc].dep_wait_s += dep_part;
            stalls[acc].bank_conflict_s += bank_part;
        }
        stalls[acc].dma_wait_s += cost.dma_in_s + cost.dma_out_s;

        if opts.trace {
            if cost.dma_in_s > 0.0 {
                emit(
                    &mut events,
                    &mut seq,
                    start,
                    EventKind::XferStart,
                    acc,
                    batch,
                    Some(layer),
                );
                emit(
                    &mut events,
                    &mut seq,
                    start + cost.dma_in_s,
                    EventKind::XferEnd,
                    acc,
                    batch,
                    Some(layer),
                );
            }
            emit(
                &mut events,
                &mut seq,
                start,
                EventKind::AccStart,
                acc,
                batch,
                Some(layer),
            );
            emit(
                &mut events,
                &mut seq,
                end,
                EventKind::AccEnd,
                acc,
                batch,
                Some(layer),
            );
        }

        station_free[q] = end;
        busy[q] += compute;
        end_time[eidx(batch, layer)] = Some(end);
    }

    let makespan_s = station_free.iter().cloned().fold(0.0f64, f64::max);
    let mut utilization = Vec::with_capacity(n_acc);
    for acc in 0..n_acc {
        let has_compute = g
            .layers
            .iter()
            .any(|l| assign.acc(l.id) == acc && l.kind.is_compute());
        // Busy fraction of the matrix unit, or of the busiest fabric
        // engine when the accelerator hosts no multiplies.
        let primary = if has_compute {
            busy[qid(acc, 0)]
        } else {
            (1..STATIONS_PER_ACC)
                .map(|st| busy[qid(acc, st)])
                .fold(0.0f64, f64::max)
        };
        utilization.push(if makespan_s > 0.0 {
            primary / makespan_s
        } else {
            0.0
        });
    }

    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.seq.cmp(&b.seq)));
    Ok(SimReport {
        makespan_s,
        makespan_cycles: makespan_s * p.freq_aie_hz,
        utilization,
        stalls,
        events,
    })
}

/// Relative disagreement between the design's analytical latency and a
/// replay under default options.
pub fn cross_check(design: &DesignPoint, g: &Graph, p: &HardwareProfile) -> Result<f64> {
    let report = simulate(design, g, p, &SimOptions::default())?;
    if report.makespan_s == 0.0 {
        return Ok(if design.latency_s == 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    Ok((design.latency_s - report.makespan_s).abs() / report.makespan_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dse::{evaluate_assignment, EaParams, SearchMode};
    use crate::graph::{Layer, LayerKind};
    use crate::hw::HardwareProfile;
    use crate::sched::Assignment;

    fn mm_chain(n: usize, m: u64, k: u64, nn: u64) -> Graph {
        let layers = (0..n)
            .map(|i| Layer {
                id: i as LayerId,
                kind: LayerKind::MatMul,
                m,
                k,
                n: nn,
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

    fn tiny_profile() -> HardwareProfile {
        let mut p = HardwareProfile::vck190();
        p.aie_total = 16;
        p.plio_budget = 48;
        p
    }

    fn params(n_acc: usize, n_bat: u32) -> EaParams {
        EaParams {
            n_acc,
            n_bat,
            tile_cap: 64,
            ..EaParams::default()
        }
    }

    #[test]
    fn single_station_matches_analytical_exactly() {
        let g = mm_chain(1, 64, 64, 64);
        let p = tiny_profile();
        let pt = evaluate_assignment(
            &g,
            &p,
            &params(1, 1),
            Assignment::sequential(1),
            SearchMode::Hybrid,
        )
        .unwrap();
        let rep = simulate(&pt, &g, &p, &SimOptions::default()).unwrap();
        assert_eq!(rep.makespan_s, pt.latency_s);
        assert_eq!(cross_check(&pt, &g, &p).unwrap(), 0.0);
    }

    #[test]
    fn pipeline_replay_matches_scheduler_order() {
        // Unit-duration four-layer chain on two accelerators, two batches:
        // the replay must land on the scheduler's makespan.
        let g = mm_chain(4, 64, 64, 64);
        let p = tiny_profile();
        let pt = evaluate_assignment(
            &g,
            &p,
            &params(2, 2),
            Assignment::new(vec![0, 1, 1, 0]),
            SearchMode::Hybrid,
        )
        .unwrap();
        let rep = simulate(&pt, &g, &p, &SimOptions::default()).unwrap();
        assert_eq!(rep.makespan_s, pt.latency_s);
    }

    #[test]
    fn forced_partition_strictly_beats_serialized_copy() {
        let g = mm_chain(2, 64, 64, 64);
        let p = tiny_profile();
        let mut prm = params(2, 4);
        prm.inter_acc_flag = true;
        let pt = evaluate_assignment(
            &g,
            &p,
            &prm,
            Assignment::new(vec![0, 1]),
            SearchMode::Hybrid,
        )
        .unwrap();
        let with = simulate(&pt, &g, &p, &SimOptions::default()).unwrap();
        let without = simulate(
            &pt,
            &g,
            &p,
            &SimOptions {
                force_partition: false,
                ..SimOptions::default()
            },
        )
        .unwrap();
        // The producer/consumer patterns conflict under default partitions
        // only if the chosen configs differ; either way the serialized
        // path can never be faster.
        assert!(without.makespan_s >= with.makespan_s);
        assert_eq!(with.total_bank_conflict_s(), 0.0);
    }

    #[test]
    fn bypass_never_hurts() {
        let spec = crate::graph::ModelSpec::builtin("deit_t").unwrap();
        let mut small = spec.clone();
        small.depth = 1;
        let g = crate::graph::build_transformer(&small).unwrap();
        let p = HardwareProfile::vck190();
        let pt = evaluate_assignment(
            &g,
            &p,
            &EaParams {
                n_acc: 2,
                n_bat: 2,
                ..EaParams::default()
            },
            Assignment::round_robin(g.len(), 2),
            SearchMode::Hybrid,
        )
        .unwrap();
        assert!(pt.resource_feasible);
        let on = simulate(&pt, &g, &p, &SimOptions::default()).unwrap();
        let off = simulate(
            &pt,
            &g,
            &p,
            &SimOptions {
                bypass_nonlinear: false,
                ..SimOptions::default()
            },
        )
        .unwrap();
        assert!(on.makespan_s <= off.makespan_s);
    }

    #[test]
    fn conservation_and_utilization_bounds() {
        let g = mm_chain(3, 64, 64, 64);
        let p = tiny_profile();
        let pt = evaluate_assignment(
            &g,
            &p,
            &params(2, 3),
            Assignment::new(vec![0, 1, 0]),
            SearchMode::Hybrid,
        )
        .unwrap();
        let rep = simulate(&pt, &g, &p, &SimOptions::default()).unwrap();
        for (i, u) in rep.utilization.iter().enumerate() {
            assert!((0.0..=1.0).contains(u), "utilization[{i}] = {u}");
        }
        for s in &rep.stalls {
            assert!(s.bank_conflict_s <= rep.makespan_s);
            assert!(s.dep_wait_s <= rep.makespan_s);
            assert!(s.dma_wait_s <= rep.makespan_s);
        }
        assert!(rep.makespan_cycles >= rep.makespan_s); // 1 GHz array clock
    }

    #[test]
    fn truncated_schedule_reports_deadlock() {
        let g = mm_chain(3, 64, 64, 64);
        let p = tiny_profile();
        let mut pt = evaluate_assignment(
            &g,
            &p,
            &params(2, 1),
            Assignment::new(vec![0, 1, 0]),
            SearchMode::Hybrid,
        )
        .unwrap();
        // Drop the producer of layer 1; its consumers can never start.
        pt.schedule.entries.retain(|e| e.layer != 0);
        let err = simulate(&pt, &g, &p, &SimOptions::default()).unwrap_err();
        match err {
            crate::error::Error::Deadlock(blocked) => {
                assert!(blocked.contains(&(0, 1)));
            }
            other => panic!("expected deadlock, got {other}"),
        }
    }

    #[test]
    fn deterministic_event_log() {
        let g = mm_chain(4, 64, 64, 64);
        let p = tiny_profile();
        let pt = evaluate_assignment(
            &g,
            &p,
            &params(2, 2),
            Assignment::new(vec![0, 1, 0, 1]),
            SearchMode::Hybrid,
        )
        .unwrap();
        let opts = SimOptions {
            trace: true,
            ..SimOptions::default()
        };
        let a = simulate(&pt, &g, &p, &opts).unwrap();
        let b = simulate(&pt, &g, &p, &opts).unwrap();
        assert_eq!(a.events_jsonl(), b.events_jsonl());
        assert!(!a.events.is_empty());
    }

    #[test]
    fn multi_acc_transformer_replay_agrees_within_five_percent() {
        // Block-role clustering of the full model under the derating that
        // calibrates the one-accelerator batch-6 latency; the nonlinear
        // followers ride the fine-grained pipeline, so the replay stays
        // close to the analytical makespan.
        let spec = crate::graph::ModelSpec::builtin("deit_t").unwrap();
        let g = crate::graph::build_transformer(&spec).unwrap();
        let mut p = HardwareProfile::vck190();
        p.eff = 0.12;
        let role = [0usize, 1, 1, 0, 0, 0, 0, 0, 0, 2, 2, 2, 2, 3, 3, 3, 4, 4];
        let assign = Assignment::new(
            (0..g.len())
                .map(|i| if i == 0 { 0 } else { role[(i - 1) % 18] })
                .collect(),
        );
        let params = EaParams {
            n_acc: 5,
            n_bat: 6,
            ..EaParams::default()
        };
        let pt = evaluate_assignment(&g, &p, &params, assign, SearchMode::Hybrid).unwrap();
        assert!(pt.resource_feasible);
        let err = cross_check(&pt, &g, &p).unwrap();
        assert!(err < 0.05, "cross-check error {err:.4}");
    }

    #[test]
    fn makespan_at_least_critical_path_and_busy() {
        let g = mm_chain(5, 64, 64, 64);
        let p = tiny_profile();
        let pt = evaluate_assignment(
            &g,
            &p,
            &params(2, 2),
            Assignment::new(vec![0, 1, 0, 1, 0]),
            SearchMode::Hybrid,
        )
        .unwrap();
        let rep = simulate(&pt, &g, &p, &SimOptions::default()).unwrap();
        let busy_max = pt.schedule.acc_busy.iter().cloned().fold(0.0f64, f64::max);
        assert!(rep.makespan_s >= busy_max - 1e-12);
    }
}
