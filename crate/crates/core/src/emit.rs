//! Artifact emission: Pareto CSV, self-contained design JSON, schedule
//! exports, and per-accelerator configuration manifests for a downstream
//! code generator.
//!
//! All emitters are deterministic: fixed field order, fixed sort keys,
//! fixed float formatting.

use crate::dse::{DesignPoint, SearchMode};
use crate::error::Result;
use crate::graph::{Graph, LayerKind, ModelSpec};
use crate::hw::HardwareProfile;
use crate::perf::utilization;
use crate::sched::Schedule;
use serde::{Deserialize, Serialize};

/// A design point bundled with the inputs needed to rebuild and replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignExport {
    pub model: ModelSpec,
    pub hw: HardwareProfile,
    pub point: DesignPoint,
}

impl DesignExport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// A full search archive bundled with its inputs, for later Pareto
/// extraction or replay. Only resource-feasible points are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveExport {
    pub model: ModelSpec,
    pub hw: HardwareProfile,
    pub points: Vec<DesignPoint>,
}

impl ArchiveExport {
    pub fn new(model: ModelSpec, hw: HardwareProfile, archive: &[DesignPoint]) -> Self {
        Self {
            model,
            hw,
            points: archive
                .iter()
                .filter(|pt| pt.resource_feasible && pt.latency_s.is_finite())
                .cloned()
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archive serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One manifest per accelerator: everything a template instantiation
/// needs to realize the design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccManifest {
    pub acc_id: usize,
    pub hmm_type: crate::perf::HmmType,
    pub h1: u64,
    pub w1: u64,
    pub w2: u64,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub part_a: u64,
    pub part_b: u64,
    pub part_c: u64,
    pub fused_kinds: Vec<LayerKind>,
    pub ram_banks: u64,
    pub plio_list: Vec<String>,
}

/// Builds the per-accelerator manifests of a design.
pub fn acc_manifests(point: &DesignPoint, g: &Graph, p: &HardwareProfile) -> Vec<AccManifest> {
    let n_acc = point.assignment.n_accs();
    (0..n_acc)
        .map(|acc| {
            let cfg = &point.cfgs[acc];
            let mut fused: Vec<LayerKind> = Vec::new();
            for l in &g.layers {
                if point.assignment.acc(l.id) == acc
                    && !l.kind.is_compute()
                    && !fused.contains(&l.kind)
                {
                    fused.push(l.kind);
                }
            }
            fused.sort();
            let util = utilization(cfg, &fused, p);
            let plio_list = (0..util.plio).map(|i| format!("plio_{acc}_{i}")).collect();
            AccManifest {
                acc_id: acc,
                hmm_type: cfg.hmm_type,
                h1: cfg.h1,
                w1: cfg.w1,
                w2: cfg.w2,
                a: cfg.a,
                b: cfg.b,
                c: cfg.c,
                part_a: cfg.part_a,
                part_b: cfg.part_b,
                part_c: cfg.part_c,
                fused_kinds: fused,
                ram_banks: util.ram_banks,
                plio_list,
            }
        })
        .collect()
}

/// Writes one `acc_<id>.json` manifest per accelerator into `dir`.
pub fn write_manifests(
    point: &DesignPoint,
    g: &Graph,
    p: &HardwareProfile,
    dir: &std::path::Path,
) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for m in acc_manifests(point, g, p) {
        let path = dir.join(format!("acc_{}.json", m.acc_id));
        std::fs::write(&path, serde_json::to_string_pretty(&m)?)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Pareto CSV over the resource-feasible archive points.
///
/// Columns: `latency_ms,throughput_tops,n_acc,batch,mode,dominated`;
/// rows sorted by latency (throughput descending within ties). A row is
/// dominated when some other point is no worse on both axes and better on
/// one.
pub fn emit_pareto(archive: &[DesignPoint]) -> String {
    let mut rows: Vec<&DesignPoint> = archive
        .iter()
        .filter(|pt| pt.resource_feasible && pt.latency_s.is_finite())
        .collect();
    rows.sort_by(|a, b| {
        a.latency_s
            .total_cmp(&b.latency_s)
            .then(b.throughput_ops_s.total_cmp(&a.throughput_ops_s))
            .then(a.n_accs().cmp(&b.n_accs()))
    });
    let mut out = String::from("latency_ms,throughput_tops,n_acc,batch,mode,dominated\n");
    for (i, pt) in rows.iter().enumerate() {
        let dominated = rows.iter().enumerate().any(|(j, q)| {
            j != i
                && q.latency_s <= pt.latency_s
                && q.throughput_ops_s >= pt.throughput_ops_s
                && (q.latency_s < pt.latency_s || q.throughput_ops_s > pt.throughput_ops_s)
        });
        out.push_str(&format!(
            "{:.6},{:.6},{},{},{},{}\n",
            pt.latency_s * 1e3,
            pt.throughput_ops_s / 1e12,
            pt.n_accs(),
            pt.n_bat,
            pt.mode,
            dominated
        ));
    }
    out
}

/// Schedule as JSON lines of `(batch, layer, acc, start, end)`.
pub fn schedule_jsonl(sched: &Schedule) -> String {
    let mut out = String::new();
    for e in &sched.entries {
        out.push_str(&serde_json::to_string(e).expect("entry serializes"));
        out.push('\n');
    }
    out
}

/// Gantt-ready CSV: one row per entry, sorted like the schedule.
pub fn schedule_gantt_csv(sched: &Schedule) -> String {
    let mut out = String::from("acc,batch,layer,start,end\n");
    for e in &sched.entries {
        out.push_str(&format!(
            "{},{},{},{:.9},{:.9}\n",
            e.acc, e.batch, e.layer, e.start, e.end
        ));
    }
    out
}

/// `SearchMode` labels that appear in the CSV.
pub fn mode_label(mode: SearchMode) -> &'static str {
    match mode {
        SearchMode::Sequential => "sequential",
        SearchMode::Spatial => "spatial",
        SearchMode::Hybrid => "hybrid",
    }
}
