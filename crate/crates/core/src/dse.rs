//! Two-level design-space exploration: an evolutionary search over
//! layer-to-accelerator assignments, each evaluated by scheduling,
//! memory allocation, hardware partitioning, and an exhaustive
//! per-accelerator configuration search that is aware of inter-accelerator
//! communication.
//!
//! Candidate evaluation is a pure function of `(graph, profile, params,
//! assignment)`; children of one generation are evaluated independently
//! (in parallel with the `parallel` feature) and merged in child order, so
//! a fixed seed reproduces the archive byte for byte.

use crate::error::{Error, Result};
use crate::graph::{Graph, LayerKind};
use crate::hw::HardwareProfile;
use crate::par::map_ordered;
use crate::perf::{force_partition, lcm, utilization, AccConfig, CommEdge, HmmType};
use crate::sched::{
    entry_costs, evaluate, hw_partition, list_schedule, mem_allocation, Assignment, HwPartition,
    Schedule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which family of assignments a run explores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// One monolithic accelerator.
    Sequential,
    /// Fixed round-robin spread over `n_acc` accelerators.
    Spatial,
    /// Evolutionary search over arbitrary maps.
    Hybrid,
}

impl std::fmt::Display for SearchMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SearchMode::Sequential => "sequential",
            SearchMode::Spatial => "spatial",
            SearchMode::Hybrid => "hybrid",
        };
        f.write_str(s)
    }
}

/// Search hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EaParams {
    pub n_acc: usize,
    pub n_bat: u32,
    pub n_pop: usize,
    pub n_child: usize,
    pub n_iter: usize,
    pub seed: u64,
    /// Latency constraint in seconds.
    pub lat_cons: f64,
    /// Prune configurations that cannot forward on chip without conflicts.
    pub inter_acc_flag: bool,
    /// Upper bound on enumerated tile dimensions.
    pub tile_cap: u64,
    /// Extra assignments injected into the initial population (warm starts).
    #[serde(default)]
    pub seed_assignments: Vec<Assignment>,
}

impl Default for EaParams {
    fn default() -> Self {
        Self {
            n_acc: 1,
            n_bat: 1,
            n_pop: 16,
            n_child: 16,
            n_iter: 50,
            seed: 0,
            lat_cons: f64::INFINITY,
            inter_acc_flag: true,
            tile_cap: 256,
            seed_assignments: Vec::new(),
        }
    }
}

impl EaParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_acc == 0 || self.n_bat == 0 {
            return Err(Error::InvalidSpec(
                "n_acc and n_bat must be positive".into(),
            ));
        }
        if self.n_pop < 2 {
            return Err(Error::InvalidSpec("n_pop must be at least 2".into()));
        }
        if self.n_child == 0 || !self.n_child.is_multiple_of(2) {
            return Err(Error::InvalidSpec(
                "n_child must be even and positive".into(),
            ));
        }
        if self.n_iter == 0 {
            return Err(Error::InvalidSpec("n_iter must be at least 1".into()));
        }
        if self.tile_cap == 0 {
            return Err(Error::InvalidSpec("tile_cap must be positive".into()));
        }
        Ok(())
    }
}

/// One evaluated design: an element of the latency/throughput tradeoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub assignment: Assignment,
    pub cfgs: Vec<AccConfig>,
    pub schedule: Schedule,
    pub latency_s: f64,
    pub throughput_ops_s: f64,
    /// Within resource budgets and the latency constraint.
    pub feasible: bool,
    /// Within resource budgets (ignores the latency constraint).
    pub resource_feasible: bool,
    pub n_bat: u32,
    pub mode: SearchMode,
}

impl DesignPoint {
    fn infeasible(assignment: Assignment, n_bat: u32, mode: SearchMode) -> Self {
        Self {
            assignment,
            cfgs: Vec::new(),
            schedule: Schedule {
                entries: Vec::new(),
                makespan: 0.0,
                acc_busy: Vec::new(),
                n_batches: n_bat,
            },
            latency_s: f64::INFINITY,
            throughput_ops_s: 0.0,
            feasible: false,
            resource_feasible: false,
            n_bat,
            mode,
        }
    }

    /// Accelerators the assignment actually uses.
    pub fn n_accs(&self) -> usize {
        self.assignment.n_accs()
    }
}

/// Candidate counting for the configuration search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DseStats {
    /// Tile/parallelism combinations visited.
    pub considered: u64,
    /// Combinations that survived every check and were scored.
    pub scored: u64,
}

impl std::ops::AddAssign for DseStats {
    fn add_assign(&mut self, rhs: Self) {
        self.considered += rhs.considered;
        self.scored += rhs.scored;
    }
}

/// Sorted divisors of `n` no larger than `cap`.
fn divisors_capped(n: u64, cap: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            if d <= cap {
                out.push(d);
            }
            let q = n / d;
            if q != d && q <= cap {
                out.push(q);
            }
        }
        d += 1;
    }
    out.sort_unstable();
    out
}

struct AccWorkload {
    /// Deduplicated multiply shapes `(m, k, n, heads, count)`.
    groups: Vec<(u64, u64, u64, u64, u64)>,
    /// Weight dims `(k, n)` of every resident-weight layer instance.
    weight_dims: Vec<(u64, u64)>,
    /// Distinct fabric kinds fused into this accelerator.
    kinds: Vec<LayerKind>,
    /// Unit flavors the search may choose from. Attention confines the
    /// accelerator to the dual-stream unit; otherwise pinning the weights
    /// is an optimization the search weighs against streaming them.
    hmm_candidates: Vec<HmmType>,
}

fn acc_workload(g: &Graph, assign: &Assignment, acc: usize) -> AccWorkload {
    let mut groups: Vec<(u64, u64, u64, u64, u64)> = Vec::new();
    let mut weight_dims = Vec::new();
    let mut kinds = Vec::new();
    let mut dual = false;
    for l in g.layers.iter().filter(|l| assign.acc(l.id) == acc) {
        if l.activation_inputs == 2 {
            dual = true;
        }
        if l.kind.is_compute() {
            if let Some(e) = groups
                .iter_mut()
                .find(|e| e.0 == l.m && e.1 == l.k && e.2 == l.n && e.3 == l.heads)
            {
                e.4 += 1;
            } else {
                groups.push((l.m, l.k, l.n, l.heads, 1));
            }
            if l.weight_bytes() > 0 {
                weight_dims.push((l.k, l.n));
            }
        } else if !kinds.contains(&l.kind) {
            kinds.push(l.kind);
        }
    }
    AccWorkload {
        groups,
        weight_dims,
        kinds,
        hmm_candidates: if dual {
            vec![HmmType::DualStream]
        } else {
            vec![HmmType::Pinned, HmmType::DualStream]
        },
    }
}

/// Exhaustive configuration search for every accelerator, in first
/// appearance order of the schedule.
///
/// For each accelerator all integer `(h1, w1, w2, a, b, c)` with the tile
/// dims restricted to divisors of the largest hosted multiply dims (up to
/// `tile_cap`) are enumerated; a candidate must fit local memory and the
/// per-accelerator budgets. With `inter_acc_flag`, candidates whose array
/// pattern cannot divide an already-fixed partner's pattern are skipped
/// before scoring and the consumer-facing RAM partitions are forced to the
/// conflict-free layout. The per-accelerator winner minimizes total
/// multiply cycles (equivalently, maximizes throughput).
#[allow(clippy::too_many_arguments)]
pub fn customize_accs(
    g: &Graph,
    assign: &Assignment,
    part: &HwPartition,
    trace: &[usize],
    edges: &[CommEdge],
    inter_acc_flag: bool,
    tile_cap: u64,
    p: &HardwareProfile,
) -> Result<(Vec<AccConfig>, DseStats)> {
    let n_acc = part.per_acc.len();
    let mut cfgs: Vec<Option<AccConfig>> = vec![None; n_acc];
    let mut stats = DseStats::default();

    let kinds_of: Vec<Vec<LayerKind>> = (0..n_acc)
        .map(|acc| {
            let mut kinds = Vec::new();
            for l in g.layers.iter().filter(|l| assign.acc(l.id) == acc) {
                if !l.kind.is_compute() && !kinds.contains(&l.kind) {
                    kinds.push(l.kind);
                }
            }
            kinds
        })
        .collect();

    for &acc in trace {
        let wl = acc_workload(g, assign, acc);
        let budget = &part.per_acc[acc];

        if wl.groups.is_empty() {
            let cfg = AccConfig::unit(HmmType::Pinned);
            let u = utilization(&cfg, &wl.kinds, p);
            if u.aie > budget.aie
                || u.plio > budget.plio
                || u.ram_banks > budget.ram_banks
                || u.dsp > budget.dsp
            {
                return Err(Error::NoAccConfig { acc });
            }
            cfgs[acc] = Some(cfg);
            continue;
        }

        let max_m = wl.groups.iter().map(|g| g.0).max().unwrap();
        let max_k = wl.groups.iter().map(|g| g.1).max().unwrap();
        let max_n = wl.groups.iter().map(|g| g.2).max().unwrap();
        let h1s = divisors_capped(max_m, tile_cap);
        let w1s = divisors_capped(max_k, tile_cap);
        let w2s = divisors_capped(max_n, tile_cap);

        // Edges to accelerators whose configuration is already fixed.
        let fixed_consumers: Vec<usize> = edges
            .iter()
            .filter_map(|e| match (e.producer.acc(), e.consumer.acc()) {
                (Some(pa), Some(ca)) if pa == acc && ca != acc && cfgs[ca].is_some() => Some(ca),
                _ => None,
            })
            .collect();
        let fixed_producers: Vec<usize> = edges
            .iter()
            .filter_map(|e| match (e.producer.acc(), e.consumer.acc()) {
                (Some(pa), Some(ca)) if ca == acc && pa != acc && cfgs[pa].is_some() => Some(pa),
                _ => None,
            })
            .collect();

        let dsp_base: u64 = {
            let mut seen = Vec::new();
            let mut t = 0;
            for k in &wl.kinds {
                if !seen.contains(k) {
                    seen.push(*k);
                    t += p.dsp_cost(*k);
                }
            }
            t
        };

        // Retroactive widenings of already-fixed partners: (acc, part_a, part_b).
        type PartnerUpdate = (usize, u64, u64);
        let mut best: Option<(f64, AccConfig, Vec<PartnerUpdate>)> = None;

        for &hmm_type in &wl.hmm_candidates {
            let mut a = 1u64;
            while a <= budget.aie {
                let mut b = 1u64;
                while a * b <= budget.aie {
                    let c_max = budget.aie / (a * b);
                    let mut c = 1u64;
                    while c <= c_max {
                        let plio = match hmm_type {
                            HmmType::Pinned => (a + c) * b,
                            HmmType::DualStream => (a + c) * b + a * c,
                        };
                        if plio > budget.plio {
                            c += 1;
                            continue;
                        }
                        let streams = a * c;
                        let dsp = if dsp_base == 0 {
                            0
                        } else {
                            streams * dsp_base.div_ceil(streams)
                        };
                        if dsp > budget.dsp {
                            c += 1;
                            continue;
                        }

                        // Alignment with already-fixed partners.
                        let mut parts = (a, b, c);
                        let mut partner_updates: Vec<(usize, u64, u64)> = Vec::new();
                        let mut aligned = true;
                        if inter_acc_flag {
                            for &pa in &fixed_producers {
                                let fixed = cfgs[pa].unwrap();
                                match force_partition(fixed.write_pattern(), (a, b)) {
                                    Some((rows, cols)) => {
                                        parts.0 = lcm(parts.0, rows);
                                        parts.1 = lcm(parts.1, cols);
                                    }
                                    None => {
                                        aligned = false;
                                        break;
                                    }
                                }
                            }
                            if aligned {
                                for &ca in &fixed_consumers {
                                    let fixed = cfgs[ca].unwrap();
                                    match force_partition((a, c), fixed.read_pattern()) {
                                        Some((rows, cols)) => {
                                            let npa = lcm(fixed.part_a, rows);
                                            let npb = lcm(fixed.part_b, cols);
                                            if npa != fixed.part_a || npb != fixed.part_b {
                                                // The wider partition must still fit
                                                // the partner's budget.
                                                let mut probe = fixed;
                                                probe.part_a = npa;
                                                probe.part_b = npb;
                                                let u = utilization(&probe, &kinds_of[ca], p);
                                                if u.ram_banks > part.per_acc[ca].ram_banks {
                                                    aligned = false;
                                                    break;
                                                }
                                                partner_updates.push((ca, npa, npb));
                                            }
                                        }
                                        None => {
                                            aligned = false;
                                            break;
                                        }
                                    }
                                }
                            }
                        }
                        if !aligned {
                            c += 1;
                            continue;
                        }

                        let part_prod = parts.0 * parts.1 * parts.2;
                        let inv_rate = 1.0 / (p.mac_per_aie_per_cycle as f64 * p.eff);

                        let pinned_bytes: u64 = match hmm_type {
                            HmmType::DualStream => 0,
                            HmmType::Pinned => wl
                                .weight_dims
                                .iter()
                                .map(|&(k, n)| k.div_ceil(b) * n.div_ceil(c))
                                .sum(),
                        };

                        for &h1 in &h1s {
                            for &w1 in &w1s {
                                for &w2 in &w2s {
                                    stats.considered += 1;
                                    let footprint = match hmm_type {
                                        HmmType::DualStream => 2 * (h1 * w1 + w1 * w2 + h1 * w2),
                                        HmmType::Pinned => 2 * (h1 * w1 + h1 * w2) + pinned_bytes,
                                    };
                                    if footprint > p.aie_local_mem_bytes {
                                        continue;
                                    }
                                    let ram_util = (2 * h1 * w2).div_ceil(p.bank_bytes);
                                    let ram = part_prod * ram_util.max(1);
                                    if ram > budget.ram_banks {
                                        continue;
                                    }

                                    stats.scored += 1;
                                    let mut cycles = 0.0f64;
                                    for &(m, k, n, heads, count) in &wl.groups {
                                        let tm = m.div_ceil(h1 * a) as f64;
                                        let tk = k.div_ceil(w1 * b) as f64;
                                        let tn = n.div_ceil(w2 * c) as f64;
                                        cycles += (heads * count) as f64
                                            * tm
                                            * tk
                                            * tn
                                            * (h1 * w1 * w2) as f64
                                            * inv_rate;
                                    }
                                    // Ties are common: any tiling with the same
                                    // ceilings costs the same. Keep the largest
                                    // per-core tile among equals; small tiles
                                    // starve the core pipelines in practice.
                                    let better = match &best {
                                        None => true,
                                        Some((bc, bcfg, _)) => {
                                            cycles < *bc
                                                || (cycles == *bc
                                                    && h1 * w1 * w2
                                                        > bcfg.h1 * bcfg.w1 * bcfg.w2)
                                        }
                                    };
                                    if better {
                                        let mut cfg = AccConfig::new(h1, w1, w2, a, b, c, hmm_type);
                                        cfg.part_a = parts.0;
                                        cfg.part_b = parts.1;
                                        cfg.part_c = parts.2;
                                        best = Some((cycles, cfg, partner_updates.clone()));
                                    }
                                }
                            }
                        }
                        c += 1;
                    }
                    b += 1;
                }
                a += 1;
            }
        }

        match best {
            Some((_, cfg, updates)) => {
                cfgs[acc] = Some(cfg);
                for (ca, npa, npb) in updates {
                    let fixed = cfgs[ca].as_mut().unwrap();
                    fixed.part_a = npa;
                    fixed.part_b = npb;
                }
            }
            None => return Err(Error::NoAccConfig { acc }),
        }
    }

    // Accelerators absent from the trace host no entries (possible only
    // for degenerate graphs); give them the unit configuration.
    let cfgs = cfgs
        .into_iter()
        .map(|c| c.unwrap_or_else(|| AccConfig::unit(HmmType::Pinned)))
        .collect();
    Ok((cfgs, stats))
}

/// Evaluates one assignment end to end: schedule the pipeline, allocate
/// memory, partition the device, customize each accelerator, then re-time
/// the schedule with the modeled durations (compute plus communication
/// fine-tuning). Budget violations yield an infeasible point rather than
/// an error.
pub fn evaluate_assignment(
    g: &Graph,
    p: &HardwareProfile,
    params: &EaParams,
    assign: Assignment,
    mode: SearchMode,
) -> Result<DesignPoint> {
    let assign = assign.canonicalized();
    let proxy: Vec<f64> = g.layers.iter().map(|l| l.macs() as f64).collect();
    let (sched0, edges) = list_schedule(&assign, g, params.n_bat, &proxy)?;
    let mem = mem_allocation(&edges, g, &assign, p);
    let part = match hw_partition(&mem, &sched0, g, &assign, p) {
        Ok(part) => part,
        Err(Error::BudgetExceeded { .. }) => {
            return Ok(DesignPoint::infeasible(assign, params.n_bat, mode))
        }
        Err(e) => return Err(e),
    };
    let trace = sched0.trace_accs();
    let (cfgs, _stats) = match customize_accs(
        g,
        &assign,
        &part,
        &trace,
        &edges,
        params.inter_acc_flag,
        params.tile_cap,
        p,
    ) {
        Ok(r) => r,
        Err(Error::NoAccConfig { .. }) => {
            return Ok(DesignPoint::infeasible(assign, params.n_bat, mode))
        }
        Err(e) => return Err(e),
    };

    let costs = entry_costs(g, &assign, &cfgs, &edges, p);
    let durations: Vec<f64> = costs.iter().map(|c| c.total()).collect();
    let (schedule, _) = list_schedule(&assign, g, params.n_bat, &durations)?;
    let (latency_s, throughput_ops_s) = evaluate(&schedule, g, p);
    let feasible = latency_s <= params.lat_cons;
    Ok(DesignPoint {
        assignment: assign,
        cfgs,
        schedule,
        latency_s,
        throughput_ops_s,
        feasible,
        resource_feasible: true,
        n_bat: params.n_bat,
        mode,
    })
}

/// Result of one search run.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Highest-throughput point satisfying the latency constraint, if any.
    pub best: Option<DesignPoint>,
    /// Every evaluated point, in evaluation order.
    pub archive: Vec<DesignPoint>,
}

fn selection_fitness(pt: &DesignPoint) -> f64 {
    if pt.resource_feasible {
        pt.throughput_ops_s
    } else {
        0.0
    }
}

fn better_for_population(a: &DesignPoint, b: &DesignPoint) -> std::cmp::Ordering {
    selection_fitness(b)
        .total_cmp(&selection_fitness(a))
        .then(a.latency_s.total_cmp(&b.latency_s))
        .then(a.assignment.acc_of.cmp(&b.assignment.acc_of))
}

/// Highest-throughput archive point within the latency constraint.
pub fn best_under(archive: &[DesignPoint], lat_cons: f64) -> Option<&DesignPoint> {
    archive
        .iter()
        .filter(|pt| pt.resource_feasible && pt.latency_s <= lat_cons)
        .max_by(|a, b| {
            a.throughput_ops_s
                .total_cmp(&b.throughput_ops_s)
                .then(b.latency_s.total_cmp(&a.latency_s))
        })
}

/// Seeded evolutionary search over layer-to-accelerator assignments.
///
/// The initial population always contains the sequential map and the
/// round-robin spatial map, so the hybrid front can never fall below
/// either strategy. Parents are picked by binary tournament on throughput
/// (resource-infeasible points score zero), recombined by single-point
/// crossover on the layer-indexed vector, and every child mutates by
/// exchanging the accelerators of two random layers. The population is
/// truncated elitist. Sequential and spatial modes evaluate their single
/// fixed assignment.
///
/// Returns the best archive point under the latency constraint (`None`
/// when nothing qualifies, mirroring an unsatisfiable constraint) plus the
/// full archive for Pareto extraction.
pub fn ea_search(
    g: &Graph,
    p: &HardwareProfile,
    params: &EaParams,
    mode: SearchMode,
) -> Result<SearchOutcome> {
    params.validate()?;
    let n_layers = g.len();

    let eval_batch = |assigns: Vec<Assignment>| -> Result<Vec<DesignPoint>> {
        map_ordered(assigns, |a| evaluate_assignment(g, p, params, a, mode))
            .into_iter()
            .collect()
    };

    let single = |assign: Assignment| -> Result<SearchOutcome> {
        let archive = eval_batch(vec![assign])?;
        let best = best_under(&archive, params.lat_cons).cloned();
        Ok(SearchOutcome { best, archive })
    };

    match mode {
        SearchMode::Sequential => return single(Assignment::sequential(n_layers)),
        SearchMode::Spatial => return single(Assignment::round_robin(n_layers, params.n_acc)),
        SearchMode::Hybrid => {}
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut init: Vec<Assignment> = vec![
        Assignment::sequential(n_layers),
        Assignment::round_robin(n_layers, params.n_acc),
    ];
    for seed_assign in &params.seed_assignments {
        if seed_assign.acc_of.len() == n_layers {
            init.push(seed_assign.clone().canonicalized());
        }
    }
    while init.len() < params.n_pop {
        let acc_of = (0..n_layers)
            .map(|_| rng.gen_range(0..params.n_acc))
            .collect();
        init.push(Assignment::new(acc_of).canonicalized());
    }

    let mut archive = eval_batch(init)?;
    let mut population: Vec<DesignPoint> = archive.clone();
    population.sort_by(better_for_population);
    population.truncate(params.n_pop);

    for _gen in 0..params.n_iter {
        let mut children: Vec<Assignment> = Vec::with_capacity(params.n_child);
        for _ in 0..params.n_child / 2 {
            let p1 = tournament(&population, &mut rng);
            let p2 = tournament(&population, &mut rng);
            let cut = if n_layers > 1 {
                rng.gen_range(1..n_layers)
            } else {
                0
            };
            let (c1, c2) =
                single_point_crossover(&population[p1].assignment, &population[p2].assignment, cut);
            children.push(c1);
            children.push(c2);
        }
        for child in &mut children {
            mutate_swap(child, &mut rng);
            child.canonicalize();
        }
        let evaluated = eval_batch(children)?;
        archive.extend(evaluated.iter().cloned());
        population.extend(evaluated);
        population.sort_by(better_for_population);
        population.truncate(params.n_pop);
    }

    let best = best_under(&archive, params.lat_cons).cloned();
    Ok(SearchOutcome { best, archive })
}

fn tournament(population: &[DesignPoint], rng: &mut ChaCha8Rng) -> usize {
    let i = rng.gen_range(0..population.len());
    let j = rng.gen_range(0..population.len());
    match better_for_population(&population[i], &population[j]) {
        std::cmp::Ordering::Greater => j,
        _ => i,
    }
}

fn single_point_crossover(
    p1: &Assignment,
    p2: &Assignment,
    cut: usize,
) -> (Assignment, Assignment) {
    let n = p1.acc_of.len();
    let mut c1 = Vec::with_capacity(n);
    let mut c2 = Vec::with_capacity(n);
    c1.extend_from_slice(&p1.acc_of[..cut]);
    c1.extend_from_slice(&p2.acc_of[cut..]);
    c2.extend_from_slice(&p2.acc_of[..cut]);
    c2.extend_from_slice(&p1.acc_of[cut..]);
    (Assignment::new(c1), Assignment::new(c2))
}

/// Randomly exchanges the accelerators of two layers.
fn mutate_swap(assign: &mut Assignment, rng: &mut ChaCha8Rng) {
    let n = assign.acc_of.len();
    if n < 2 {
        return;
    }
    let i = rng.gen_range(0..n);
    let j = rng.gen_range(0..n);
    assign.acc_of.swap(i, j);
}

/// Brute-force oracle: evaluates every distinct canonical assignment of
/// `n_layers` layers onto at most `params.n_acc` accelerators. Only
/// sensible for small instances; guarded at one million raw assignments.
pub fn exhaustive_search(
    g: &Graph,
    p: &HardwareProfile,
    params: &EaParams,
) -> Result<SearchOutcome> {
    let n_layers = g.len();
    let n_acc = params.n_acc;
    let raw = (n_acc as u128).pow(n_layers as u32);
    assert!(
        raw <= 1_000_000,
        "exhaustive enumeration of {raw} assignments is not tractable"
    );

    let mut seen = std::collections::HashSet::new();
    let mut assigns = Vec::new();
    let mut counter = vec![0usize; n_layers];
    loop {
        let a = Assignment::new(counter.clone()).canonicalized();
        if seen.insert(a.acc_of.clone()) {
            assigns.push(a);
        }
        let mut pos = 0;
        loop {
            if pos == n_layers {
                let archive: Result<Vec<DesignPoint>> = map_ordered(assigns, |a| {
                    evaluate_assignment(g, p, params, a, SearchMode::Hybrid)
                })
                .into_iter()
                .collect();
                let archive = archive?;
                let best = best_under(&archive, params.lat_cons).cloned();
                return Ok(SearchOutcome { best, archive });
            }
            counter[pos] += 1;
            if counter[pos] < n_acc {
                break;
            }
            counter[pos] = 0;
            pos += 1;
        }
    }
}

/// Non-dominated set under (minimize latency, maximize throughput),
/// sorted by latency. Exact duplicates collapse to one representative.
pub fn pareto_front(archive: &[DesignPoint]) -> Vec<DesignPoint> {
    let mut pts: Vec<&DesignPoint> = archive
        .iter()
        .filter(|pt| pt.resource_feasible && pt.latency_s.is_finite())
        .collect();
    pts.sort_by(|a, b| {
        a.latency_s
            .total_cmp(&b.latency_s)
            .then(b.throughput_ops_s.total_cmp(&a.throughput_ops_s))
    });
    let mut front: Vec<DesignPoint> = Vec::new();
    let mut best_tput = f64::NEG_INFINITY;
    for pt in pts {
        if pt.throughput_ops_s > best_tput {
            front.push(pt.clone());
            best_tput = pt.throughput_ops_s;
        }
    }
    front
}

/// True when `a` strictly dominates `b` (no worse on both axes, better on
/// at least one).
pub fn dominates(a: &DesignPoint, b: &DesignPoint) -> bool {
    a.latency_s <= b.latency_s
        && a.throughput_ops_s >= b.throughput_ops_s
        && (a.latency_s < b.latency_s || a.throughput_ops_s > b.throughput_ops_s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Layer, LayerId};

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

    fn quick_params(n_acc: usize) -> EaParams {
        EaParams {
            n_acc,
            n_bat: 2,
            n_pop: 8,
            n_child: 8,
            n_iter: 10,
            seed: 7,
            lat_cons: f64::INFINITY,
            inter_acc_flag: false,
            tile_cap: 64,
            seed_assignments: Vec::new(),
        }
    }

    #[test]
    fn params_validation() {
        let bad = [
            EaParams {
                n_pop: 1,
                ..EaParams::default()
            },
            EaParams {
                n_child: 3,
                ..EaParams::default()
            },
            EaParams {
                n_iter: 0,
                ..EaParams::default()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err());
        }
        assert!(EaParams::default().validate().is_ok());
    }

    #[test]
    fn ea_finds_reference_pipeline_on_unit_chain() {
        // Four-layer chain, two accelerators, two batches: the enumerated
        // optimum alternates accelerators and finishes in 5 units. With a
        // shape-neutral cost model the EA must reach the same makespan.
        let g = mm_chain(4, 64, 64, 64);
        let p = tiny_profile();
        let params = quick_params(2);
        let out = ea_search(&g, &p, &params, SearchMode::Hybrid).unwrap();
        let best = out.best.unwrap();
        let oracle = exhaustive_search(&g, &p, &params).unwrap();
        let best_ex = oracle.best.unwrap();
        assert!(best.throughput_ops_s >= 0.999 * best_ex.throughput_ops_s);
    }

    #[test]
    fn unsatisfiable_constraint_yields_no_solution() {
        let g = mm_chain(3, 64, 64, 64);
        let p = tiny_profile();
        let mut params = quick_params(2);
        params.lat_cons = 1e-12;
        let out = ea_search(&g, &p, &params, SearchMode::Hybrid).unwrap();
        assert!(out.best.is_none());
        assert!(!out.archive.is_empty());
    }

    #[test]
    fn single_acc_degenerates_to_one_assignment() {
        let g = mm_chain(3, 64, 64, 64);
        let p = tiny_profile();
        let mut params = quick_params(1);
        params.n_iter = 1;
        let out = ea_search(&g, &p, &params, SearchMode::Sequential).unwrap();
        assert_eq!(out.archive.len(), 1);
        assert_eq!(out.archive[0].assignment.n_accs(), 1);
        assert!(out.best.is_some());
    }

    #[test]
    fn determinism_same_seed_same_archive() {
        let g = mm_chain(5, 64, 32, 64);
        let p = tiny_profile();
        let params = quick_params(2);
        let a = ea_search(&g, &p, &params, SearchMode::Hybrid).unwrap();
        let b = ea_search(&g, &p, &params, SearchMode::Hybrid).unwrap();
        assert_eq!(a.archive.len(), b.archive.len());
        for (x, y) in a.archive.iter().zip(&b.archive) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn monotone_constraint_relaxation() {
        let g = mm_chain(4, 64, 64, 64);
        let p = tiny_profile();
        let mut t1 = quick_params(2);
        let mut t2 = quick_params(2);
        // The archive trajectory does not depend on the constraint, so a
        // looser constraint can only admit more points.
        let seq = ea_search(&g, &p, &t1, SearchMode::Hybrid).unwrap();
        let lats: Vec<f64> = seq
            .archive
            .iter()
            .filter(|pt| pt.resource_feasible)
            .map(|pt| pt.latency_s)
            .collect();
        let mid = lats[lats.len() / 2];
        let max = lats.iter().cloned().fold(0.0, f64::max);
        t1.lat_cons = mid;
        t2.lat_cons = max * 2.0;
        let o1 = ea_search(&g, &p, &t1, SearchMode::Hybrid).unwrap();
        let o2 = ea_search(&g, &p, &t2, SearchMode::Hybrid).unwrap();
        let b1 = o1.best.map(|b| b.throughput_ops_s).unwrap_or(0.0);
        let b2 = o2.best.map(|b| b.throughput_ops_s).unwrap_or(0.0);
        assert!(b1 <= b2 + 1e-9, "{b1} > {b2}");
    }

    #[test]
    fn pareto_front_dominance_definition() {
        let mk = |lat: f64, thr: f64| {
            let mut pt = DesignPoint::infeasible(Assignment::sequential(1), 1, SearchMode::Hybrid);
            pt.resource_feasible = true;
            pt.latency_s = lat;
            pt.throughput_ops_s = thr;
            pt
        };
        let front = pareto_front(&[mk(1.0, 10.0), mk(2.0, 20.0), mk(2.0, 5.0)]);
        let pairs: Vec<(f64, f64)> = front
            .iter()
            .map(|p| (p.latency_s, p.throughput_ops_s))
            .collect();
        assert_eq!(pairs, vec![(1.0, 10.0), (2.0, 20.0)]);

        let single = pareto_front(&[mk(3.0, 4.0)]);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn inter_acc_flag_prunes_and_never_loses_throughput() {
        // Two multiplies on two accelerators with a forwarding edge.
        let g = mm_chain(2, 64, 64, 64);
        let p = tiny_profile();
        let assign = Assignment::new(vec![0, 1]);
        let proxy: Vec<f64> = g.layers.iter().map(|l| l.macs() as f64).collect();
        let (s0, edges) = list_schedule(&assign, &g, 2, &proxy).unwrap();
        let mem = mem_allocation(&edges, &g, &assign, &p);
        let part = hw_partition(&mem, &s0, &g, &assign, &p).unwrap();
        let trace = s0.trace_accs();

        let (cfgs_on, stats_on) =
            customize_accs(&g, &assign, &part, &trace, &edges, true, 64, &p).unwrap();
        let (cfgs_off, stats_off) =
            customize_accs(&g, &assign, &part, &trace, &edges, false, 64, &p).unwrap();
        assert!(stats_on.scored <= stats_off.scored);

        // With the flag on, every on-chip edge is conflict free.
        for e in edges.iter().filter(|e| !e.is_boundary()) {
            assert_eq!(crate::perf::edge_cost(e, &cfgs_on, &p), 0.0);
        }
        let _ = cfgs_off;

        // The same holds for every feasible point a whole search emits,
        // including ones whose partners were widened retroactively.
        let g5 = mm_chain(5, 96, 64, 96);
        let mut params = quick_params(3);
        params.inter_acc_flag = true;
        let out = ea_search(&g5, &p, &params, SearchMode::Hybrid).unwrap();
        for pt in out.archive.iter().filter(|pt| pt.resource_feasible) {
            let edges = crate::sched::extract_edges(&g5, &pt.assignment);
            for e in edges.iter().filter(|e| !e.is_boundary()) {
                assert_eq!(crate::perf::edge_cost(e, &pt.cfgs, &p), 0.0);
            }
        }
    }

    #[test]
    fn calibrated_sequential_batch_one_latency() {
        // Under the derating that lands the batch-6 single-accelerator
        // latency on 1.29 ms, batch 1 comes out near the published
        // 0.22 ms single-batch figure.
        let spec = crate::graph::ModelSpec::builtin("deit_t").unwrap();
        let g = crate::graph::build_transformer(&spec).unwrap();
        let mut p = HardwareProfile::vck190();
        p.eff = 0.12;
        let params = EaParams {
            n_acc: 1,
            n_bat: 1,
            ..EaParams::default()
        };
        let pt = evaluate_assignment(
            &g,
            &p,
            &params,
            Assignment::sequential(g.len()),
            SearchMode::Sequential,
        )
        .unwrap();
        let rel = (pt.latency_s - 0.22e-3).abs() / 0.22e-3;
        assert!(
            rel < 0.10,
            "latency {:.4} ms, rel {rel:.3}",
            pt.latency_s * 1e3
        );
    }

    #[test]
    fn empty_graph_evaluates_to_zero_latency() {
        let g = Graph { layers: vec![] };
        let p = tiny_profile();
        let params = quick_params(1);
        let pt = evaluate_assignment(&g, &p, &params, Assignment::new(vec![]), SearchMode::Hybrid)
            .unwrap();
        assert_eq!(pt.latency_s, 0.0);
        assert!(pt.resource_feasible);
    }
}
