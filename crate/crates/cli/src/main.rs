//! `metatrace` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use metatrace_core::data::{load_any, read_manifest, read_manifest_csv, Family, LabelSpace, LoadedFile, SampleRecord};
use metatrace_core::exif::{build_acquisition_split, AcquisitionLabeler, BinningConfig, SplitRule};
use metatrace_core::pipeline::{process_manifest, write_ledger, MaskSpec, ProcessRequest};
use metatrace_core::plan::{enumerate_setup_grid, uniform_seeds, AssignmentScheme, PlanRule, SchemeKind};
use metatrace_core::report::{
    export_plot_data, run_experiment, AcquisitionProbeExperiment, EvalReport, Experiment, KnnExperiment, PlotKind,
    ProcessingProbeExperiment, RetrievalExperiment, RunConfig,
};
use metatrace_core::retrieval::NegativeMode;
use metatrace_core::{Error, Result};

#[derive(Parser)]
#[command(name = "metatrace", version, about = "Audit metadata traces in visual-encoder embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand images into every class of a processing family.
    Process(ProcessArgs),
    /// Build a photographer-disjoint acquisition split.
    Split(SplitArgs),
    /// List the assignment schemes of a setup grid.
    Plan(PlanArgs),
    /// Counterfactual kNN over the setup grid.
    Knn(KnnArgs),
    /// Linear probe on processing or acquisition labels.
    Probe(ProbeArgs),
    /// Paired-capture retrieval.
    Retrieve(RetrieveArgs),
    /// Run, export or check reports.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Processing family; omit to only apply `--mask`.
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Center-mask ratio applied before the transform.
    #[arg(long)]
    mask: Option<f64>,
    /// Directory relative source paths are resolved against.
    #[arg(long)]
    base_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    family: Family,
    /// Binning config overriding the shipped one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Split JSON destination; the audit goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    scheme: SchemeKind,
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embedding or tensor file whose ids get materialized uniform
    /// assignments (TSV on stdout).
    #[arg(long)]
    ids_from: Option<PathBuf>,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Run config (TOML or JSON); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; runs go under `<out>/<config hash>/run-NNN/`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KnnArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    train_tensor: Option<PathBuf>,
    #[arg(long)]
    test_tensor: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    test_manifest: Option<PathBuf>,
    /// Setups to evaluate (repeatable); defaults to all five.
    #[arg(long = "scheme")]
    schemes: Vec<SchemeKind>,
    #[arg(long = "k")]
    ks: Vec<usize>,
    #[arg(long)]
    uniform_seeds: Option<usize>,
    #[arg(long)]
    dump_neighbors: Option<usize>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Processing probe: tensors of training and test variants.
    #[arg(long)]
    train_tensor: Option<PathBuf>,
    #[arg(long)]
    test_tensor: Option<PathBuf>,
    /// Acquisition probe: family, manifest and embeddings.
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    uniform_seeds: Option<usize>,
    /// Probe raw embeddings instead of L2-normalized ones.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Same,
    Different,
    Both,
}

#[derive(Args)]
struct RetrieveArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// One file per encoder (repeatable).
    #[arg(long = "embeddings")]
    embeddings: Vec<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long = "k")]
    ks: Vec<usize>,
}

#[derive(Subcommand)]
enum ReportAction {
    /// Run any experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write TSV plot data from a report.
    Export {
        report: PathBuf,
        /// accuracy-vs-k, scatter, histograms or cells.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Validate a report's schema and aggregates.
    Check { report: PathBuf },
}

fn load_manifest(path: &Path) -> Result<Vec<SampleRecord>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_manifest_csv(path),
        _ => read_manifest(path),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Validation(format!("missing --{flag} (or give --config)")))
}

fn base_config(run: &RunArgs) -> Result<Option<RunConfig>> {
    run.config.as_ref().map(RunConfig::load).transpose()
}

fn finish(mut cfg: RunConfig, run: &RunArgs) -> Result<()> {
    if let Some(seed) = run.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &run.out {
        cfg.out_dir = out.clone();
    }
    execute(&cfg)
}

fn execute(cfg: &RunConfig) -> Result<()> {
    let report = run_experiment(cfg)?;
    let dir = report.write_run(&cfg.resolve(&cfg.out_dir))?;
    for a in &report.aggregates {
        let metrics: Vec<String> = a.metrics.iter().take(6).map(|(k, v)| format!("{k}={v:.4}")).collect();
        println!("{:<20} cells={:<4} {}", a.group, a.cells, metrics.join(" "));
    }
    println!("report written to {}", dir.display());
    Ok(())
}

fn cmd_process(a: ProcessArgs) -> Result<()> {
    let records = load_manifest(&a.manifest)?;
    let mask = a.mask.map(MaskSpec::new).transpose()?;
    let ledger = process_manifest(&ProcessRequest {
        records: &records,
        family: a.family,
        out_dir: &a.out,
        seed: a.seed,
        mask,
        base_dir: a.base_dir.as_deref().or(a.manifest.parent()),
    })?;
    let path = a.out.join("ledger.jsonl");
    write_ledger(&ledger, &path)?;
    println!("{} files, ledger at {}", ledger.len(), path.display());
    Ok(())
}

fn cmd_split(a: SplitArgs) -> Result<()> {
    let records = load_manifest(&a.manifest)?;
    let labeler = match &a.config {
        Some(p) => AcquisitionLabeler::Binning(BinningConfig::load(p)?),
        None => AcquisitionLabeler::builtin(a.family)?,
    };
    if labeler.family() != a.family {
        return Err(Error::Validation(format!("config is for `{}`, not `{}`", labeler.family(), a.family)));
    }
    let split = build_acquisition_split(&records, &labeler, SplitRule::for_family(a.family), a.seed)?;
    split.check()?;
    let json = serde_json::to_string_pretty(&split)?;
    std::fs::write(&a.out, json).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    let audit_path = a.out.with_extension("audit.json");
    let audit = serde_json::to_string_pretty(&split.audit)?;
    std::fs::write(&audit_path, audit).map_err(|e| Error::Io { path: audit_path.clone(), source: e })?;
    println!("class\tavailable\tretained\ttrain\tval\ttest");
    for c in &split.audit.classes {
        println!("{}\t{}\t{}\t{}\t{}\t{}", c.class, c.available, c.retained, c.train, c.val, c.test);
    }
    for (reason, n) in &split.audit.dropped {
        println!("dropped\t{reason}\t{n}");
    }
    Ok(())
}

fn cmd_plan(a: PlanArgs) -> Result<()> {
    if !a.family.is_processing() {
        return Err(Error::Validation(format!("`{}` is not a processing family", a.family)));
    }
    let space = LabelSpace::canonical(a.family);
    let seeds = uniform_seeds(a.seed, a.seeds);
    let grid = enumerate_setup_grid(&space, a.scheme, &seeds);
    match &a.ids_from {
        None => {
            for s in &grid {
                println!("{}", serde_json::to_string(s)?);
            }
        }
        Some(path) => {
            let ids = match load_any(path)? {
                LoadedFile::Set(s) => s.ids().to_vec(),
                LoadedFile::Variants(t) => t.ids().to_vec(),
            };
            let scheme = grid.first().copied().unwrap_or(AssignmentScheme::Uniform { test: 0, seed: a.seed });
            let plan = scheme.plan(&ids, &space)?;
            match &plan.rule {
                PlanRule::PerImage(classes) => {
                    println!("sample_id\tclass");
                    for (id, &c) in ids.iter().zip(classes) {
                        println!("{id}\t{}", space.name(c).unwrap_or("?"));
                    }
                }
                _ => return Err(Error::Validation("--ids-from only applies to uniform plans".into())),
            }
        }
    }
    Ok(())
}

fn cmd_knn(a: KnnArgs) -> Result<()> {
    let mut cfg = match base_config(&a.run)? {
        Some(cfg) => cfg,
        None => RunConfig::new(Experiment::Knn(KnnExperiment {
            family: None,
            train_tensor: required(a.train_tensor.clone(), "train-tensor")?,
            test_tensor: required(a.test_tensor.clone(), "test-tensor")?,
            train_manifest: required(a.manifest.clone(), "manifest")?,
            test_manifest: None,
            schemes: SchemeKind::ALL.to_vec(),
            ks: vec![1, 10],
            uniform_seeds: 10,
            dump_neighbors: 0,
        })),
    };
    let Experiment::Knn(e) = &mut cfg.experiment else {
        return Err(Error::Validation("config does not describe a knn experiment".into()));
    };
    if let Some(p) = a.train_tensor {
        e.train_tensor = p;
    }
    if let Some(p) = a.test_tensor {
        e.test_tensor = p;
    }
    if let Some(p) = a.manifest {
        e.train_manifest = p;
    }
    if a.test_manifest.is_some() {
        e.test_manifest = a.test_manifest;
    }
    if !a.schemes.is_empty() {
        e.schemes = a.schemes;
    }
    if !a.ks.is_empty() {
        e.ks = a.ks;
    }
    if let Some(n) = a.uniform_seeds {
        e.uniform_seeds = n;
    }
    if let Some(n) = a.dump_neighbors {
        e.dump_neighbors = n;
    }
    finish(cfg, &a.run)
}

fn cmd_probe(a: ProbeArgs) -> Result<()> {
    let mut cfg = match base_config(&a.run)? {
        Some(cfg) => cfg,
        None if a.family.is_some_and(|f| !f.is_processing()) => {
            RunConfig::new(Experiment::AcquisitionProbe(AcquisitionProbeExperiment {
                family: a.family.unwrap(),
                manifest: required(a.manifest.clone(), "manifest")?,
                embeddings: required(a.embeddings.clone(), "embeddings")?,
                binning_config: None,
                split_rule: None,
                probe: Default::default(),
            }))
        }
        None => RunConfig::new(Experiment::ProcessingProbe(ProcessingProbeExperiment {
            family: a.family,
            train_tensor: required(a.train_tensor.clone(), "train-tensor")?,
            test_tensor: required(a.test_tensor.clone(), "test-tensor")?,
            uniform_seeds: 10,
            probe: Default::default(),
        })),
    };
    let probe = match &mut cfg.experiment {
        Experiment::ProcessingProbe(e) => {
            if let Some(n) = a.uniform_seeds {
                e.uniform_seeds = n;
            }
            &mut e.probe
        }
        Experiment::AcquisitionProbe(e) => &mut e.probe,
        _ => return Err(Error::Validation("config does not describe a probe experiment".into())),
    };
    if let Some(n) = a.trials {
        probe.trials = n;
    }
    if let Some(n) = a.epochs {
        probe.epochs = n;
    }
    if a.no_normalize {
        probe.normalize = false;
    }
    finish(cfg, &a.run)
}

fn cmd_retrieve(a: RetrieveArgs) -> Result<()> {
    let mut cfg = match base_config(&a.run)? {
        Some(cfg) => cfg,
        None => RunConfig::new(Experiment::Retrieval(RetrievalExperiment {
            manifest: required(a.manifest.clone(), "manifest")?,
            embeddings: a.embeddings.clone(),
            modes: NegativeMode::BOTH.to_vec(),
            ks: vec![1],
        })),
    };
    let Experiment::Retrieval(e) = &mut cfg.experiment else {
        return Err(Error::Validation("config does not describe a retrieval experiment".into()));
    };
    if let Some(p) = a.manifest {
        e.manifest = p;
    }
    if !a.embeddings.is_empty() {
        e.embeddings = a.embeddings;
    }
    match a.mode {
        Some(ModeArg::Same) => e.modes = vec![NegativeMode::Same],
        Some(ModeArg::Different) => e.modes = vec![NegativeMode::Different],
        Some(ModeArg::Both) => e.modes = NegativeMode::BOTH.to_vec(),
        None => {}
    }
    if !a.ks.is_empty() {
        e.ks = a.ks;
    }
    finish(cfg, &a.run)
}

fn cmd_report(action: ReportAction) -> Result<()> {
    match action {
        ReportAction::Run { config, seed, out } => {
            let run = RunArgs {
                config: Some(config),
                seed,
                out,
            };
            let cfg = base_config(&run)?.expect("config given");
            finish(cfg, &run)
        }
        ReportAction::Export { report, kind, out_dir } => {
            let report = EvalReport::load(&report)?;
            for path in export_plot_data(&report, PlotKind::parse(&kind)?, &out_dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        ReportAction::Check { report } => {
            let r = EvalReport::load(&report)?;
            println!("ok: {} cells, {} aggregates", r.cells.len(), r.aggregates.len());
            Ok(())
        }
    }
}

fn init_threads() {
    let Ok(value) = std::env::var("METATRACE_THREADS") else {
        return;
    };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                warn!("could not size the worker pool: {e}");
            } else {
                info!("using {n} worker threads");
            }
        }
        _ => warn!("ignoring METATRACE_THREADS={value}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads();
    let result = match cli.command {
        Command::Process(a) => cmd_process(a),
        Command::Split(a) => cmd_split(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Knn(a) => cmd_knn(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Report { action } => cmd_report(action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
