use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use slickseg::ensemble::predict_raw_scene;
use slickseg::eval::{evaluate_model, generate_synthetic_dataset, render_markdown, SynthConfig};
use slickseg::features::write_samples_csv;
use slickseg::pipeline::{
    bench, evaluation_entries, export_qubos, mask_path_for, predict_entries,
    preprocess_entries, report_path_for, save_training_report, train_from_manifest,
    PipelineConfig,
};
use slickseg::scene_io::{
    load_model, save_model, write_mask_png, Aggregation, Backend, DatasetManifest, ManifestEntry,
    Split,
};

/// Oil-slick segmentation of SAR scenes with bagged SVM ensembles.
#[derive(Debug, Parser)]
#[command(name = "slickseg", version)]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, env = "SLICKSEG_SEED")]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "SLICKSEG_THREADS")]
    threads: Option<usize>,

    /// JSON file with pipeline settings; flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic speckled-slick dataset and its manifest.
    Synth(SynthArgs),
    /// Write preprocessed VV/VH rasters and a manifest pointing at them.
    Preprocess(PreprocessCmd),
    /// Train an ensemble on the train split of a manifest.
    Train(TrainCmd),
    /// Predict oil masks for scenes.
    Predict(PredictCmd),
    /// Score a model against ground truth.
    Evaluate(EvaluateCmd),
    /// Compare backends in a Markdown table.
    Bench(BenchCmd),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    n_scenes: usize,
    /// Number of scenes (taken from the end) assigned to the test split.
    #[arg(long, default_value_t = 10)]
    n_test: usize,
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    min_slicks: usize,
    #[arg(long, default_value_t = 3)]
    max_slicks: usize,
    #[arg(long, default_value_t = 0.3)]
    darkness: f64,
    #[arg(long, default_value_t = 4)]
    looks: u32,
    #[arg(long, default_value_t = 0.3)]
    background: f64,
    #[arg(long, default_value_t = 0.3)]
    vh_ratio: f64,
}

#[derive(Debug, Args, Default)]
struct PreprocessArgs {
    /// Working raster size, `N` or `HxW`.
    #[arg(long, value_parser = parse_size)]
    working_size: Option<(usize, usize)>,
    #[arg(long)]
    median_window: Option<usize>,
    /// Lower and upper clip percentiles, e.g. `1,99`.
    #[arg(long, value_parser = parse_pair)]
    clip: Option<(f64, f64)>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Choose gamma by contrast sweep over the train split.
    #[arg(long)]
    gamma_sweep: bool,
    /// Keep land pixels in play instead of masking them out.
    #[arg(long)]
    no_land_mask: bool,
}

#[derive(Debug, Args)]
struct PreprocessCmd {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Restrict to one split.
    #[arg(long)]
    split: Option<Split>,
    #[command(flatten)]
    pre: PreprocessArgs,
}

#[derive(Debug, Args, Default)]
struct EnsembleArgs {
    #[arg(long)]
    backend: Option<Backend>,
    #[arg(long)]
    n_learners: Option<usize>,
    #[arg(long)]
    subset_size: Option<usize>,
    /// `mean_decision` or `majority_vote`.
    #[arg(long)]
    aggregation: Option<Aggregation>,
    #[arg(long)]
    rbf_gamma: Option<f64>,
    #[arg(long)]
    box_c: Option<f64>,
    /// Annealing reads per learner.
    #[arg(long)]
    reads: Option<usize>,
    /// Lowest-energy reads kept per learner.
    #[arg(long)]
    top_samples: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    max_oil: Option<usize>,
    #[arg(long)]
    max_water: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainCmd {
    #[arg(long)]
    manifest: PathBuf,
    /// Output model file; the training report is written beside it.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    pre: PreprocessArgs,
    #[command(flatten)]
    ens: EnsembleArgs,
    /// Also write the training pool as CSV.
    #[arg(long)]
    export_samples: Option<PathBuf>,
    /// Also write the QUBO of each training subset into this directory.
    #[arg(long)]
    export_qubo: Option<PathBuf>,
    /// Maximum number of QUBOs to export.
    #[arg(long, default_value_t = usize::MAX)]
    export_qubo_limit: usize,
}

#[derive(Debug, Args)]
struct PredictCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Predict every entry (or one split) of a manifest.
    #[arg(long, conflicts_with_all = ["vv", "vh"])]
    manifest: Option<PathBuf>,
    #[arg(long, requires = "manifest")]
    split: Option<Split>,
    /// Single scene VV raster.
    #[arg(long, requires = "vh")]
    vv: Option<PathBuf>,
    #[arg(long, requires = "vv")]
    vh: Option<PathBuf>,
    #[arg(long, requires = "vv")]
    land_mask: Option<PathBuf>,
    #[arg(long, default_value = "scene")]
    scene_id: String,
}

#[derive(Debug, Args)]
struct EvaluateCmd {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Split to score (default: test, else val).
    #[arg(long)]
    split: Option<Split>,
    /// JSON report path (default: stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-scene CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Timing passes per scene.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
}

#[derive(Debug, Args)]
struct BenchCmd {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated backends.
    #[arg(long, value_delimiter = ',', default_value = "classical,annealed,gate_kernel")]
    backends: Vec<Backend>,
    /// Where `<backend>.slk` models are read from or written to.
    #[arg(long)]
    models_dir: PathBuf,
    #[arg(long)]
    train_first: bool,
    /// Timing passes per scene; inference time is their mean.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    pre: PreprocessArgs,
    #[command(flatten)]
    ens: EnsembleArgs,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => parse(s).map(|n| (n, n)),
    }
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected LOW,HIGH")?;
    let parse = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

impl PreprocessArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(ws) = self.working_size {
            cfg.working_size = ws;
        }
        if let Some(w) = self.median_window {
            cfg.preprocess.median_window = w;
        }
        if let Some((lo, hi)) = self.clip {
            cfg.preprocess.clip_low_pct = lo;
            cfg.preprocess.clip_high_pct = hi;
        }
        if let Some(g) = self.gamma {
            cfg.preprocess.gamma = g;
        }
        if self.gamma_sweep {
            cfg.gamma_sweep = true;
        }
        if self.no_land_mask {
            cfg.preprocess.apply_land_mask = false;
        }
    }
}

impl EnsembleArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        let e = &mut cfg.ensemble;
        let b = &mut cfg.backend;
        if let Some(v) = self.backend {
            e.backend = v;
        }
        if let Some(v) = self.n_learners {
            e.n_learners = v;
        }
        if let Some(v) = self.subset_size {
            e.subset_size = v;
        }
        if let Some(v) = self.aggregation {
            e.aggregation = v;
        }
        if let Some(v) = self.rbf_gamma {
            b.rbf_gamma = v;
        }
        if let Some(v) = self.box_c {
            b.svm.box_c = v;
        }
        if let Some(v) = self.reads {
            b.anneal.num_reads = v;
        }
        if let Some(v) = self.top_samples {
            b.anneal.top_samples = v;
        }
        if let Some(v) = self.sweeps {
            b.anneal.sweeps_per_read = v;
        }
        if let Some(v) = self.max_oil {
            cfg.sampling.max_oil = v;
        }
        if let Some(v) = self.max_water {
            cfg.sampling.max_water = v;
        }
    }
}

fn base_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            PipelineConfig::from_json(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    Ok(cfg)
}

fn finish_config(cfg: PipelineConfig) -> Result<PipelineConfig> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    eprintln!("resolved config:\n{}", cfg.to_json()?);
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(cfg)
}

fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    DatasetManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))
}

fn select<'a>(manifest: &'a DatasetManifest, split: Option<Split>) -> Vec<&'a ManifestEntry> {
    match split {
        Some(s) => manifest.split(s),
        None => manifest.entries.iter().collect(),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    match cli.command {
        Command::Synth(a) => {
            let cfg = finish_config(cfg)?;
            let synth = SynthConfig {
                n_scenes: a.n_scenes,
                n_test: a.n_test,
                size: a.size,
                slick_count_range: (a.min_slicks, a.max_slicks),
                slick_darkness: a.darkness,
                speckle_looks: a.looks,
                background_level: a.background,
                vh_ratio: a.vh_ratio,
                seed: cfg.seed,
                ..SynthConfig::default()
            };
            eprintln!("synthetic dataset config:\n{}", serde_json::to_string_pretty(&synth)?);
            let manifest = generate_synthetic_dataset(&synth, &a.out)?;
            println!(
                "wrote {} scenes and {}",
                manifest.entries.len(),
                a.out.join("manifest.json").display()
            );
        }
        Command::Preprocess(a) => {
            a.pre.apply(&mut cfg);
            let cfg = finish_config(cfg)?;
            let manifest = load_manifest(&a.manifest)?;
            let out = preprocess_entries(&select(&manifest, a.split), &cfg, &a.out)?;
            let path = a.out.join("manifest.json");
            out.save(&path)?;
            println!("wrote {} scenes and {}", out.entries.len(), path.display());
        }
        Command::Train(a) => {
            a.pre.apply(&mut cfg);
            a.ens.apply(&mut cfg);
            let cfg = finish_config(cfg)?;
            let manifest = load_manifest(&a.manifest)?;
            let outcome = train_from_manifest(&manifest, &cfg).context("training failed")?;
            if let Some(p) = &a.export_samples {
                write_samples_csv(p, &outcome.pool)?;
            }
            if let Some(dir) = &a.export_qubo {
                let n = export_qubos(&outcome.pool, &cfg, dir, a.export_qubo_limit)?;
                eprintln!("exported {n} QUBOs to {}", dir.display());
            }
            save_model(&outcome.model, &a.model)?;
            let report_path = report_path_for(&a.model);
            save_training_report(&outcome.report, &report_path)?;
            let r = &outcome.report;
            println!(
                "trained {} {} learners from {} samples in {:.2}s; model {} ({}), report {}",
                r.learners_trained,
                outcome.model.backend(),
                r.pool_size,
                r.total_seconds(),
                a.model.display(),
                outcome.model.fingerprint()?,
                report_path.display()
            );
            if r.learners_failed > 0 || r.subsets_dropped > 0 {
                eprintln!(
                    "warning: {} learners failed, {} subsets dropped",
                    r.learners_failed, r.subsets_dropped
                );
            }
        }
        Command::Predict(a) => {
            finish_config(cfg)?;
            let model = load_model(&a.model)
                .with_context(|| format!("loading model {}", a.model.display()))?;
            if let Some(m) = &a.manifest {
                let manifest = load_manifest(m)?;
                let entries = select(&manifest, a.split);
                if entries.is_empty() {
                    bail!("no scenes selected from {}", m.display());
                }
                for p in predict_entries(&model, &entries, &a.out)? {
                    println!(
                        "{}: {} oil pixels in {:.3}s -> {}",
                        p.scene_id,
                        p.oil_pixels,
                        p.seconds,
                        p.mask_path.display()
                    );
                }
            } else {
                let (Some(vv), Some(vh)) = (a.vv, a.vh) else {
                    bail!("give either --manifest or --vv and --vh");
                };
                let entry = ManifestEntry {
                    scene_id: a.scene_id.clone(),
                    vv_path: vv,
                    vh_path: vh,
                    mask_path: None,
                    land_mask_path: a.land_mask,
                    split: Split::Test,
                };
                let [h, w] = model.header.working_size;
                let scene = slickseg::scene_io::load_scene(&entry, (h, w))?;
                let t = std::time::Instant::now();
                let mask = predict_raw_scene(&model, &scene)?;
                let secs = t.elapsed().as_secs_f64();
                std::fs::create_dir_all(&a.out)?;
                let path = mask_path_for(&a.out, &a.scene_id);
                write_mask_png(&path, &mask.pixels)?;
                println!(
                    "{}: {} oil pixels in {secs:.3}s -> {}",
                    a.scene_id,
                    mask.oil_count(),
                    path.display()
                );
            }
        }
        Command::Evaluate(a) => {
            finish_config(cfg)?;
            let model = load_model(&a.model)
                .with_context(|| format!("loading model {}", a.model.display()))?;
            let manifest = load_manifest(&a.manifest)?;
            let entries = match a.split {
                Some(s) => manifest.split(s),
                None => evaluation_entries(&manifest)?,
            };
            let train_seconds = slickseg::pipeline::load_training_report(&report_path_for(&a.model))
                .ok()
                .map(|r| r.total_seconds());
            let report = evaluate_model(&model, &entries, train_seconds, a.repeat)?;
            match &a.report {
                Some(p) => report.save_json(p)?,
                None => println!("{}", report.to_json()?),
            }
            if let Some(p) = &a.csv {
                report.save_csv(p)?;
            }
            eprintln!(
                "IoU {:.4}  F1 {:.4}  BA {:.4}  over {} scenes",
                report.aggregate.iou,
                report.aggregate.f1,
                report.aggregate.balanced_accuracy,
                report.per_scene.len()
            );
        }
        Command::Bench(a) => {
            a.pre.apply(&mut cfg);
            a.ens.apply(&mut cfg);
            let cfg = finish_config(cfg)?;
            let manifest = load_manifest(&a.manifest)?;
            let outcome = bench(&manifest, &a.backends, &cfg, &a.models_dir, a.train_first, a.repeat)?;
            let table = render_markdown(&outcome.rows);
            print!("{table}");
            if let Some(p) = &a.out {
                std::fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
