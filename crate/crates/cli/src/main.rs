//! Command-line entry point: ingest model and hardware descriptions, run
//! the exploration or the simulator, and export Pareto fronts, schedules,
//! and per-accelerator configuration manifests.
//!
//! Exit codes: 0 success, 2 usage error, 3 unreadable or malformed input,
//! 4 no design satisfies the latency constraint.

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssr_core::dse::{ea_search, pareto_front, EaParams, SearchMode};
use ssr_core::emit::{
    emit_pareto, schedule_gantt_csv, schedule_jsonl, write_manifests, ArchiveExport, DesignExport,
};
use ssr_core::error::Error;
use ssr_core::graph::{build_transformer, Graph, ModelSpec};
use ssr_core::hw::{load_profile, HardwareProfile};
use ssr_core::sim::{simulate, SimOptions};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "ssr",
    about = "Latency/throughput design-space exploration for hybrid spatial-sequential accelerators",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search layer-to-accelerator assignments and accelerator configs.
    Explore(ExploreArgs),
    /// Replay a design at event granularity and report makespan and stalls.
    Simulate(SimulateArgs),
    /// Recompute the Pareto CSV from a saved archive.
    Pareto(ParetoArgs),
    /// Write per-accelerator configuration manifests for a design.
    Emit(EmitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sequential,
    Spatial,
    Hybrid,
}

impl From<ModeArg> for SearchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sequential => SearchMode::Sequential,
            ModeArg::Spatial => SearchMode::Spatial,
            ModeArg::Hybrid => SearchMode::Hybrid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct ExploreArgs {
    /// Model spec: JSON file or built-in name (deit_t, deit_160, deit_256, lvvit_t).
    #[arg(long)]
    model: String,
    /// Hardware profile: JSON file or built-in name (vck190, stratix10nx).
    #[arg(long, default_value = "vck190")]
    hw: String,
    /// Batches pipelined through the design.
    #[arg(long, default_value_t = 1)]
    batches: u32,
    /// Accelerator count the search may use.
    #[arg(long, default_value_t = 4)]
    naccs: usize,
    /// Latency constraint in milliseconds (unconstrained when omitted).
    #[arg(long)]
    latency_ms: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Hybrid)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Population size.
    #[arg(long, default_value_t = 16)]
    pop: usize,
    /// Children per generation.
    #[arg(long, default_value_t = 16)]
    children: usize,
    /// Generations.
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// Prune configurations that cannot forward on chip conflict-free.
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    inter_acc_aware: OnOff,
    /// Cap on enumerated tile dimensions.
    #[arg(long, default_value_t = 256)]
    tile_cap: u64,
    /// Best design output path.
    #[arg(long, default_value = "design.json")]
    out: PathBuf,
    /// Pareto CSV output path.
    #[arg(long, default_value = "pareto.csv")]
    pareto_out: PathBuf,
    /// Optional full-archive output path.
    #[arg(long)]
    archive_out: Option<PathBuf>,
    /// Optional schedule export path (JSON lines; a .csv sibling is
    /// written alongside).
    #[arg(long)]
    schedule_out: Option<PathBuf>,
    /// Optional directory for per-accelerator manifests of the best design.
    #[arg(long)]
    emit_config_dir: Option<PathBuf>,
    /// Optional path for the built graph (JSON list of layers with deps).
    #[arg(long)]
    dump_graph: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Design file produced by `explore`.
    #[arg(long)]
    design: PathBuf,
    /// Write the event log (JSON lines) to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Disable the bypass line buffer in reduction kernels.
    #[arg(long)]
    no_bypass: bool,
    /// Ignore forced RAM partitions (conflicting edges serialize).
    #[arg(long)]
    no_force_partition: bool,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct ParetoArgs {
    /// Archive file produced by `explore --archive-out`.
    #[arg(long)]
    archive: PathBuf,
    #[arg(long, default_value = "pareto.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct EmitArgs {
    /// Design file produced by `explore`.
    #[arg(long)]
    design: PathBuf,
    /// Output directory, one `acc_<id>.json` per accelerator.
    #[arg(long)]
    out_dir: PathBuf,
}

fn load_model(name_or_path: &str) -> Result<ModelSpec, Error> {
    let path = Path::new(name_or_path);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        let spec: ModelSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    } else {
        ModelSpec::builtin(name_or_path)
    }
}

fn load_design(path: &Path) -> Result<(DesignExport, Graph, HardwareProfile), Error> {
    let text = std::fs::read_to_string(path)?;
    let export = DesignExport::from_json(&text)?;
    let g = build_transformer(&export.model)?;
    let hw = export.hw.clone();
    hw.validate()?;
    Ok((export, g, hw))
}

fn explore(args: &ExploreArgs) -> Result<(), Error> {
    let spec = load_model(&args.model)?;
    let hw = load_profile(&args.hw)?;
    let g = build_transformer(&spec)?;
    if let Some(path) = &args.dump_graph {
        std::fs::write(path, g.to_json())?;
    }
    let params = EaParams {
        n_acc: args.naccs,
        n_bat: args.batches,
        n_pop: args.pop,
        n_child: args.children,
        n_iter: args.iters,
        seed: args.seed,
        lat_cons: args.latency_ms.map_or(f64::INFINITY, |ms| ms * 1e-3),
        inter_acc_flag: matches!(args.inter_acc_aware, OnOff::On),
        tile_cap: args.tile_cap,
        seed_assignments: Vec::new(),
    };
    let mode: SearchMode = args.mode.into();
    let outcome = ea_search(&g, &hw, &params, mode)?;

    std::fs::write(&args.pareto_out, emit_pareto(&outcome.archive))?;
    if let Some(path) = &args.archive_out {
        let archive = ArchiveExport::new(spec.clone(), hw.clone(), &outcome.archive);
        std::fs::write(path, archive.to_json())?;
    }

    let Some(best) = outcome.best else {
        eprintln!(
            "no design meets the latency constraint; {} candidate(s) evaluated",
            outcome.archive.len()
        );
        return Err(Error::NoSolution {
            lat_cons: params.lat_cons,
        });
    };

    if let Some(path) = &args.schedule_out {
        std::fs::write(path, schedule_jsonl(&best.schedule))?;
        std::fs::write(
            path.with_extension("csv"),
            schedule_gantt_csv(&best.schedule),
        )?;
    }
    if let Some(dir) = &args.emit_config_dir {
        write_manifests(&best, &g, &hw, dir)?;
    }

    let front = pareto_front(&outcome.archive);
    println!(
        "best: latency {:.4} ms, throughput {:.2} TOPS, {} acc(s), batch {}; front of {} point(s); {} evaluated",
        best.latency_s * 1e3,
        best.throughput_ops_s / 1e12,
        best.n_accs(),
        best.n_bat,
        front.len(),
        outcome.archive.len()
    );

    let export = DesignExport {
        model: spec,
        hw,
        point: best,
    };
    std::fs::write(&args.out, export.to_json())?;
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let (export, g, hw) = load_design(&args.design)?;
    let opts = SimOptions {
        bypass_nonlinear: !args.no_bypass,
        force_partition: !args.no_force_partition,
        trace: args.trace.is_some(),
        ..SimOptions::default()
    };
    let report = simulate(&export.point, &g, &hw, &opts)?;
    if let Some(path) = &args.trace {
        std::fs::write(path, report.events_jsonl())?;
    }
    let mut printable = report.clone();
    printable.events.clear();
    let text = serde_json::to_string_pretty(&printable)?;
    match &args.report_out {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn run_pareto(args: &ParetoArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.archive)?;
    let archive = ArchiveExport::from_json(&text)?;
    std::fs::write(&args.out, emit_pareto(&archive.points))?;
    Ok(())
}

fn run_emit(args: &EmitArgs) -> Result<(), Error> {
    let (export, g, hw) = load_design(&args.design)?;
    let paths = write_manifests(&export.point, &g, &hw, &args.out_dir)?;
    println!(
        "wrote {} manifest(s) to {}",
        paths.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoSolution { .. } => 4,
        Error::Io(_)
        | Error::Json(_)
        | Error::UnknownBuiltin(_)
        | Error::InvalidProfile(_)
        | Error::InvalidSpec(_)
        | Error::InvalidGraph(_) => 3,
        _ => 1,
    }
}

fn main() {
    ssr_core::init_threads_from_env();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Explore(args) => explore(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Pareto(args) => run_pareto(args),
        Command::Emit(args) => run_emit(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
