//! Segmentation metrics, evaluation reports, benchmark tables and the
//! synthetic dataset generator.

mod bench;
mod synth;

pub use bench::{render_markdown, BenchRow};
pub use synth::{generate_scene, generate_synthetic_dataset, SynthConfig, SynthScene};

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ensemble::{predict_raw_scene, SegmentationMask};
use crate::error::{Error, Result};
use crate::raster::BoolRaster;
use crate::scene_io::{load_labeled, GroundTruthMask, ManifestEntry, ModelFile};

/// Pixel counts over non-land pixels, oil being the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(&self, other: &ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = ConfusionCounts>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a.merge(&b))
    }
}

pub fn confusion_pixels(
    pred: &BoolRaster,
    truth: &BoolRaster,
    land: Option<&BoolRaster>,
) -> Result<ConfusionCounts> {
    pred.check_same_dims(truth, "prediction vs ground truth")?;
    if let Some(l) = land {
        pred.check_same_dims(l, "prediction vs land mask")?;
    }
    let mut c = ConfusionCounts::default();
    for (i, (&p, &t)) in pred.data().iter().zip(truth.data()).enumerate() {
        if land.is_some_and(|l| l.data()[i]) {
            continue;
        }
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

pub fn confusion(
    pred: &SegmentationMask,
    truth: &GroundTruthMask,
    land: Option<&BoolRaster>,
) -> Result<ConfusionCounts> {
    confusion_pixels(&pred.pixels, truth.pixels(), land)
}

fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// 1 when there is neither predicted nor true oil.
pub fn iou(c: &ConfusionCounts) -> f64 {
    ratio_or_one(c.tp, c.tp + c.fp + c.fn_)
}

pub fn f1(c: &ConfusionCounts) -> f64 {
    ratio_or_one(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

/// Mean of the two class recalls; a recall is 1 when its class is absent.
pub fn balanced_accuracy(c: &ConfusionCounts) -> f64 {
    0.5 * (ratio_or_one(c.tp, c.tp + c.fn_) + ratio_or_one(c.tn, c.tn + c.fp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub iou: f64,
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub counts: ConfusionCounts,
}

impl Metrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        Metrics {
            iou: iou(&counts),
            f1: f1(&counts),
            balanced_accuracy: balanced_accuracy(&counts),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub scene_id: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: Option<f64>,
    pub mean_inference_seconds_per_image: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_scene: Vec<SceneMetrics>,
    /// Computed from the summed counts of all scenes, not from averaging the
    /// per-scene metrics.
    pub aggregate: Metrics,
    pub timing: Timing,
}

impl EvalReport {
    pub fn from_scenes(per_scene: Vec<SceneMetrics>, timing: Timing) -> Self {
        let pooled = per_scene.iter().map(|s| s.metrics.counts).sum();
        EvalReport {
            per_scene,
            aggregate: Metrics::from_counts(pooled),
            timing,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            context: "evaluation report".into(),
            source: e,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "scene_id,iou,f1,balanced_accuracy,tp,fp,tn,fn")?;
            for s in &self.per_scene {
                let m = &s.metrics;
                let c = &m.counts;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    s.scene_id, m.iou, m.f1, m.balanced_accuracy, c.tp, c.fp, c.tn, c.fn_
                )?;
            }
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }
}

/// Runs the model over `entries` one scene at a time. Inference time per
/// image covers preprocessing, feature extraction and prediction, and is
/// averaged over `repeat` passes; metrics come from the first pass.
pub fn evaluate_model(
    model: &ModelFile,
    entries: &[&ManifestEntry],
    train_seconds: Option<f64>,
    repeat: usize,
) -> Result<EvalReport> {
    if entries.is_empty() {
        return Err(Error::Manifest("evaluation split is empty".into()));
    }
    let [h, w] = model.header.working_size;
    let mut per_scene = Vec::with_capacity(entries.len());
    let mut seconds = 0.0;
    for entry in entries {
        let (scene, truth) = load_labeled(entry, (h, w))
            .map_err(|e| e.context(format!("scene {}", entry.scene_id)))?;
        let truth = truth.ok_or_else(|| {
            Error::Manifest(format!("scene {} has no ground-truth mask", entry.scene_id))
        })?;
        let mut mask = None;
        for _ in 0..repeat.max(1) {
            let t = Instant::now();
            let m = predict_raw_scene(model, &scene)
                .map_err(|e| e.context(format!("scene {}", entry.scene_id)))?;
            seconds += t.elapsed().as_secs_f64();
            mask.get_or_insert(m);
        }
        let counts = confusion(&mask.unwrap(), &truth, scene.land_mask())?;
        per_scene.push(SceneMetrics {
            scene_id: entry.scene_id.clone(),
            metrics: Metrics::from_counts(counts),
        });
    }
    let timing = Timing {
        train_seconds,
        mean_inference_seconds_per_image: seconds / (entries.len() * repeat.max(1)) as f64,
    };
    Ok(EvalReport::from_scenes(per_scene, timing))
}
