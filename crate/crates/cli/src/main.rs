//! `hte`: train repertoires, run damage batteries, and write reports.
//!
//! Exit status: 0 on success, 1 on other failures, 2 on configuration
//! errors, 3 when a battery was interrupted and can be resumed.
//! `HTE_THREADS` sets the worker thread count.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hte_core::experiments::bench::{bench_csv, bench_plan, BenchConfig};
use hte_core::experiments::modulation::{counts_svg, endpoints_csv, mask_grid_svg, modulate, skills_csv, ModulationSummary};
use hte_core::experiments::plot::plot_archive;
use hte_core::experiments::suite::{collect, run_suite, write_report, RepertoireSet, Repertoires, RunControl, StatsReport, SuiteConfig, SuiteError};
use hte_core::experiments::train::{flat_config_from_kv, hbr_config_from_kv, train_flat, train_hierarchy, train_layer, TrainError};
use hte_core::experiments::{ConfigError, KvConfig};
use hte_core::hbr::{load_layer_file, FlatVariant, Hbr, Layer};
use hte_core::planner::canonical_maze;

const THREADS_VAR: &str = "HTE_THREADS";

#[derive(Parser)]
#[command(name = "hte", version, about = "Hierarchical repertoires and trial-and-error damage recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one hierarchy layer, a whole hierarchy, or a flat repertoire.
    Train(TrainArgs),
    /// Run a damage battery, resuming from existing episode logs.
    Run(RunArgs),
    /// Re-execute every top skill under all 64 contact masks.
    Modulation(ModulationArgs),
    /// Scatter two descriptor dimensions of an archive file.
    Plot(PlotArgs),
    /// Measure per-action planning time of each variant.
    BenchPlan(BenchArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// bottom, middle, top or hbr.
    #[arg(long, conflicts_with = "flat", required_unless_present = "flat")]
    layer: Option<String>,
    /// 2d or 8d.
    #[arg(long)]
    flat: Option<String>,
    /// key=value budget file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Overrides the generations of the trained layer or flat repertoire.
    #[arg(long)]
    generations: Option<usize>,
    /// Hierarchy directory, or the archive file for a flat repertoire.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// key=value battery file.
    #[arg(long)]
    suite: PathBuf,
    /// Directory holding `hbr-<seed>/`, `flat2d-<seed>.txt` and `flat8d-<seed>.txt`.
    #[arg(long)]
    archives: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Stop after this many new episodes (exit 3 if the battery is then incomplete).
    #[arg(long)]
    max_episodes: Option<usize>,
}

#[derive(Args)]
struct ModulationArgs {
    #[arg(long)]
    hbr: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    archive: PathBuf,
    /// Two descriptor dimensions, e.g. `0,1`.
    #[arg(long, default_value = "0,1")]
    dims: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    archives: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Other(String),
    Interrupted(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(c) => c.into(),
            e => Failure::Other(e.to_string()),
        }
    }
}

impl From<SuiteError> for Failure {
    fn from(e: SuiteError) -> Self {
        match e {
            SuiteError::Config(c) => c.into(),
            e => Failure::Other(e.to_string()),
        }
    }
}

fn read_config(path: Option<&Path>) -> Result<KvConfig, Failure> {
    match path {
        None => Ok(KvConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            KvConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::Other(format!("{}: {e}", path.display())))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::Config(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Other(e.to_string()))
}

fn train(a: TrainArgs) -> Result<(), Failure> {
    let mut kv = read_config(a.config.as_deref())?;
    if let Some(name) = a.flat {
        let variant = FlatVariant::parse(&name).ok_or_else(|| Failure::Config(format!("unknown flat variant `{name}` (expected 2d or 8d)")))?;
        if let Some(g) = a.generations {
            kv.set("generations", g.to_string());
        }
        let cfg = flat_config_from_kv(&mut kv, a.seed)?;
        kv.finish()?;
        let (_, summary) = train_flat(variant, &cfg, &a.out)?;
        println!("{summary}");
        return Ok(());
    }
    let name = a.layer.expect("clap requires --layer or --flat");
    let layer = match name.as_str() {
        "hbr" => None,
        s => Some(Layer::parse(s).ok_or_else(|| Failure::Config(format!("unknown layer `{s}` (expected bottom, middle, top or hbr)")))?),
    };
    if let Some(g) = a.generations {
        let l = layer.ok_or_else(|| Failure::Config("--generations needs a single layer; set per-layer budgets in --config for hbr".into()))?;
        kv.set(&format!("{}.generations", l.name()), g.to_string());
    }
    let cfg = hbr_config_from_kv(&mut kv)?;
    kv.finish()?;
    match layer {
        Some(l) => println!("{}", train_layer(l, &cfg, a.seed, &a.out)?),
        None => {
            let (_, summaries) = train_hierarchy(&cfg, a.seed, &a.out)?;
            for s in summaries {
                println!("{s}");
            }
        }
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let suite = SuiteConfig::from_kv(read_config(Some(&a.suite))?)?;
    let maze = suite.load_maze()?;
    let reps = RepertoireSet::load(&a.archives, &suite.repertoires, &suite.variants)?;
    let control = Arc::new(RunControl::with_budget(a.max_episodes));
    let handler = Arc::clone(&control);
    ctrlc::set_handler(move || {
        eprintln!("interrupt: finishing running episodes");
        handler.stop.store(true, Ordering::SeqCst);
    })
    .map_err(|e| Failure::Other(e.to_string()))?;
    let outcome = run_suite(&suite, &|s, v| reps.library(s, v), &maze, &a.out, &control)?;
    eprintln!("episodes: {} total, {} reused, {} run", outcome.total, outcome.reused, outcome.ran);
    if !outcome.complete() {
        return Err(Failure::Interrupted(format!("{} of {} episodes done; rerun to resume", outcome.reused + outcome.ran, outcome.total)));
    }
    let results = collect(&suite, &a.out)?;
    let report = StatsReport::new(&suite.variants, &suite.damages, &results);
    write_report(&report, &a.out)?;
    for &v in &suite.variants {
        if let Some(g) = report.pooled(v) {
            println!("{}: median={} p25={} p75={} failures={:.3}", v.name(), g.median, g.p25, g.p75, g.failure_fraction);
        }
    }
    Ok(())
}

fn modulation(a: ModulationArgs) -> Result<(), Failure> {
    let hbr = Hbr::load(&a.hbr).map_err(|e| Failure::Other(e.to_string()))?;
    let mods = modulate(&hbr);
    let b = hbr.bounds.b_top;
    let summary = ModulationSummary::new(&mods, b).to_text();
    write_file(&a.out.join("skills.csv"), &skills_csv(&mods))?;
    write_file(&a.out.join("endpoints.csv"), &endpoints_csv(&mods))?;
    write_file(&a.out.join("counts.svg"), &counts_svg(&mods, b))?;
    write_file(&a.out.join("masks.svg"), &mask_grid_svg(&mods, b))?;
    write_file(&a.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn plot(a: PlotArgs) -> Result<(), Failure> {
    let dims: Vec<usize> = a
        .dims
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| Failure::Config(format!("bad dimension `{s}` in --dims"))))
        .collect::<Result<_, _>>()?;
    let dims: [usize; 2] = dims.try_into().map_err(|_| Failure::Config("--dims takes exactly two dimensions".into()))?;
    let file = load_layer_file(&a.archive).map_err(|e| Failure::Other(e.to_string()))?;
    let svg = plot_archive(&file, dims).map_err(Failure::Config)?;
    write_file(&a.out, &svg)
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let cfg = BenchConfig::from_kv(read_config(a.config.as_deref())?)?;
    let reps = Repertoires::load(&a.archives, cfg.repertoire, &cfg.variants)?;
    let rows = bench_plan(&cfg, &|v| reps.library(v), &canonical_maze()).map_err(Failure::Other)?;
    let csv = bench_csv(&rows);
    match a.out {
        Some(p) => write_file(&p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Train(a) => train(a),
        Command::Run(a) => run(a),
        Command::Modulation(a) => modulation(a),
        Command::Plot(a) => plot(a),
        Command::BenchPlan(a) => bench(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Interrupted(m)) => {
            eprintln!("interrupted: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
