//! End-to-end orchestration over a dataset manifest: training pool
//! construction, ensemble training, mask prediction and benchmarking.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{
    partition_disjoint_subsets, predict_raw_scene, train_ensemble, BackendConfig, EnsembleConfig, ModelContext,
    TrainingReport,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate_model, BenchRow, EvalReport};
use crate::features::{
    extract_feature_image, sample_training_pixels, FeatureScaler, LabeledSample, SamplingConfig,
};
use crate::preprocess::{gamma_sweep, preprocess_scene, PreprocessConfig};
use crate::qubo::build_qubo;
use crate::scene_io::{
    load_labeled, load_model, load_scene, save_model, write_mask_png, write_unit_png16, Backend, DatasetManifest,
    ManifestEntry, ModelFile, Split, DEFAULT_WORKING_SIZE,
};

/// Every tunable of a run. Mirrors the CLI flags and doubles as the JSON
/// config file format; missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub working_size: (usize, usize),
    pub preprocess: PreprocessConfig,
    /// Pick gamma from the sweep candidates on the train split.
    pub gamma_sweep: bool,
    pub sampling: SamplingConfig,
    pub ensemble: EnsembleConfig,
    pub backend: BackendConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            threads: None,
            working_size: DEFAULT_WORKING_SIZE,
            preprocess: PreprocessConfig::default(),
            gamma_sweep: false,
            sampling: SamplingConfig::default(),
            ensemble: EnsembleConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Copies the run seed into the ensemble so there is one source of truth.
    pub fn resolved(mut self) -> Self {
        self.ensemble.seed = self.seed;
        self.backend.anneal.seed = self.seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.working_size.0 == 0 || self.working_size.1 == 0 {
            return Err(Error::Config("working_size must be positive".into()));
        }
        self.preprocess.validate()?;
        self.sampling.validate()?;
        self.ensemble.validate()?;
        self.backend.validate(self.ensemble.backend)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "pipeline config".into(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json {
            context: "pipeline config".into(),
            source,
        })
    }
}

/// Samples from every scene in `entries`, concatenated in manifest order.
pub fn build_training_pool(
    entries: &[&ManifestEntry],
    cfg: &PipelineConfig,
) -> Result<Vec<LabeledSample>> {
    let per_scene: Vec<Vec<LabeledSample>> = entries
        .par_iter()
        .map(|entry| {
            let scene_pool = || -> Result<Vec<LabeledSample>> {
                let (scene, mask) = load_labeled(entry, cfg.working_size)?;
                let mask = mask.ok_or_else(|| Error::Manifest("no ground-truth mask".into()))?;
                let scene = preprocess_scene(&scene, &cfg.preprocess)?;
                let image = extract_feature_image(&scene)?;
                sample_training_pixels(&entry.scene_id, &image, &mask, &cfg.sampling, cfg.seed)
            };
            scene_pool().map_err(|e| e.context(format!("scene {}", entry.scene_id)))
        })
        .collect::<Result<_>>()?;
    Ok(per_scene.concat())
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: ModelFile,
    pub report: TrainingReport,
    pub pool: Vec<LabeledSample>,
}

/// Trains on the manifest's train split with `cfg` (already resolved).
pub fn train_from_manifest(manifest: &DatasetManifest, cfg: &PipelineConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let entries = manifest.split(Split::Train);
    if entries.is_empty() {
        return Err(Error::Manifest("train split is empty".into()));
    }
    let t0 = Instant::now();
    let mut cfg = cfg.clone();
    if cfg.gamma_sweep {
        let scenes = entries
            .par_iter()
            .map(|e| load_scene(e, cfg.working_size).map_err(|err| err.context(format!("scene {}", e.scene_id))))
            .collect::<Result<Vec<_>>>()?;
        cfg.preprocess.gamma = gamma_sweep(&scenes, &cfg.preprocess)?;
    }
    let pool = build_training_pool(&entries, &cfg)?;
    let seconds_sampling = t0.elapsed().as_secs_f64();
    let context = ModelContext {
        preprocess: cfg.preprocess.clone(),
        working_size: cfg.working_size,
    };
    let (model, mut report) = train_ensemble(&pool, &cfg.ensemble, &cfg.backend, &context)?;
    report.seconds_sampling = seconds_sampling;
    Ok(TrainOutcome { model, report, pool })
}

pub fn report_path_for(model_path: &Path) -> PathBuf {
    model_path.with_extension("report.json")
}

pub fn save_training_report(report: &TrainingReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report).map_err(|source| Error::Json {
        context: "training report".into(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_training_report(path: &Path) -> Result<TrainingReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        context: format!("training report {}", path.display()),
        source,
    })
}

impl TrainingReport {
    pub fn total_seconds(&self) -> f64 {
        self.seconds_sampling + self.seconds_partition + self.seconds_training
    }
}

#[derive(Debug)]
pub struct PredictedScene {
    pub scene_id: String,
    pub mask_path: PathBuf,
    pub oil_pixels: usize,
    pub seconds: f64,
}

pub fn mask_path_for(out_dir: &Path, scene_id: &str) -> PathBuf {
    out_dir.join(format!("{scene_id}_mask.png"))
}

/// Predicts each entry in turn and writes `<scene_id>_mask.png` files.
pub fn predict_entries(
    model: &ModelFile,
    entries: &[&ManifestEntry],
    out_dir: &Path,
) -> Result<Vec<PredictedScene>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let [h, w] = model.header.working_size;
    let mut out = Vec::with_capacity(entries.len());
    for entry in entries {
        let ctx = |e: Error| e.context(format!("scene {}", entry.scene_id));
        let scene = load_scene(entry, (h, w)).map_err(ctx)?;
        let t = Instant::now();
        let mask = predict_raw_scene(model, &scene).map_err(ctx)?;
        let seconds = t.elapsed().as_secs_f64();
        let mask_path = mask_path_for(out_dir, &entry.scene_id);
        write_mask_png(&mask_path, &mask.pixels)?;
        out.push(PredictedScene {
            scene_id: entry.scene_id.clone(),
            mask_path,
            oil_pixels: mask.oil_count(),
            seconds,
        });
    }
    Ok(out)
}

/// Entries to evaluate: the test split, or the validation split when there
/// is no test split.
pub fn evaluation_entries(manifest: &DatasetManifest) -> Result<Vec<&ManifestEntry>> {
    let test = manifest.split(Split::Test);
    if !test.is_empty() {
        return Ok(test);
    }
    let val = manifest.split(Split::Val);
    if val.is_empty() {
        return Err(Error::Manifest("manifest has neither a test nor a val split".into()));
    }
    Ok(val)
}

pub fn model_path_in(dir: &Path, backend: Backend) -> PathBuf {
    dir.join(format!("{}.slk", backend.name()))
}

pub struct BenchOutcome {
    pub rows: Vec<BenchRow>,
    pub reports: Vec<(Backend, EvalReport)>,
}

/// One table row per backend. With `train_first` each model is trained and
/// saved into `models_dir`; otherwise `<models_dir>/<backend>.slk` must exist.
pub fn bench(
    manifest: &DatasetManifest,
    backends: &[Backend],
    cfg: &PipelineConfig,
    models_dir: &Path,
    train_first: bool,
    repeat: usize,
) -> Result<BenchOutcome> {
    let entries = evaluation_entries(manifest)?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &backend in backends {
        let path = model_path_in(models_dir, backend);
        let (model, train_seconds) = if train_first {
            let mut c = cfg.clone();
            c.ensemble.backend = backend;
            let outcome = train_from_manifest(manifest, &c)
                .map_err(|e| e.context(format!("training {backend}")))?;
            std::fs::create_dir_all(models_dir).map_err(|e| Error::io(models_dir, e))?;
            save_model(&outcome.model, &path)?;
            save_training_report(&outcome.report, &report_path_for(&path))?;
            (outcome.model, Some(outcome.report.total_seconds()))
        } else {
            let model = load_model(&path)?;
            if model.backend() != backend {
                return Err(Error::ModelMismatch(format!(
                    "{} holds a {} model",
                    path.display(),
                    model.backend()
                )));
            }
            let secs = load_training_report(&report_path_for(&path))
                .ok()
                .map(|r| r.total_seconds());
            (model, secs)
        };
        let report = evaluate_model(&model, &entries, train_seconds, repeat)?;
        rows.push(BenchRow::from_report(backend.name(), &report));
        reports.push((backend, report));
    }
    Ok(BenchOutcome { rows, reports })
}

/// Trains one model per backend on the train split and evaluates each on
/// the evaluation split.
pub fn train_and_evaluate(
    manifest: &DatasetManifest,
    backends: &[Backend],
    cfg: &PipelineConfig,
) -> Result<Vec<(Backend, EvalReport)>> {
    let entries = evaluation_entries(manifest)?;
    backends
        .iter()
        .map(|&backend| {
            let mut c = cfg.clone();
            c.ensemble.backend = backend;
            let outcome = train_from_manifest(manifest, &c)
                .map_err(|e| e.context(format!("training {backend}")))?;
            let report =
                evaluate_model(&outcome.model, &entries, Some(outcome.report.total_seconds()), 1)?;
            Ok((backend, report))
        })
        .collect()
}

/// Writes preprocessed VV/VH rasters as 16-bit PNGs and returns a manifest
/// pointing at them; masks keep their original paths.
pub fn preprocess_entries(
    entries: &[&ManifestEntry],
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let out: Vec<ManifestEntry> = entries
        .par_iter()
        .map(|entry| {
            let run = || -> Result<ManifestEntry> {
                let scene = load_scene(entry, cfg.working_size)?;
                let pre = preprocess_scene(&scene, &cfg.preprocess)?;
                let vv_path = out_dir.join(format!("{}_vv.png", entry.scene_id));
                let vh_path = out_dir.join(format!("{}_vh.png", entry.scene_id));
                write_unit_png16(&vv_path, pre.vv())?;
                write_unit_png16(&vh_path, pre.vh())?;
                Ok(ManifestEntry {
                    vv_path,
                    vh_path,
                    ..(*entry).clone()
                })
            };
            run().map_err(|e| e.context(format!("scene {}", entry.scene_id)))
        })
        .collect::<Result<_>>()?;
    Ok(DatasetManifest::new(out))
}

/// Writes the QUBO of each of the first `limit` training subsets as
/// `subset_NNNN.qubo`, using the same scaling and partition as training.
pub fn export_qubos(
    pool: &[LabeledSample],
    cfg: &PipelineConfig,
    dir: &Path,
    limit: usize,
) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scaler = FeatureScaler::fit_samples(pool)?;
    let scaled: Vec<LabeledSample> = pool
        .iter()
        .map(|s| LabeledSample {
            x: scaler.apply(&s.x),
            ..s.clone()
        })
        .collect();
    let partition = partition_disjoint_subsets(&scaled, &cfg.ensemble)?;
    let kernel = cfg.backend.kernel_for(Backend::Annealed);
    let mut written = 0;
    for (i, subset) in partition.subsets.iter().take(limit).enumerate() {
        let samples: Vec<LabeledSample> = subset.iter().map(|&k| scaled[k].clone()).collect();
        let q = build_qubo(&samples, &kernel, &cfg.backend.encoding)?;
        q.save_sparse_text(&dir.join(format!("subset_{i:04}.qubo")))?;
        written += 1;
    }
    Ok(written)
}
