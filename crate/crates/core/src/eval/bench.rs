use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::EvalReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub iou: f64,
    pub f1: f64,
    pub balanced_accuracy: f64,
    pub inference_seconds_per_image: f64,
    pub training_seconds: Option<f64>,
}

impl BenchRow {
    pub fn from_report(model: impl Into<String>, report: &EvalReport) -> Self {
        BenchRow {
            model: model.into(),
            iou: report.aggregate.iou,
            f1: report.aggregate.f1,
            balanced_accuracy: report.aggregate.balanced_accuracy,
            inference_seconds_per_image: report.timing.mean_inference_seconds_per_image,
            training_seconds: report.timing.train_seconds,
        }
    }
}

pub fn render_markdown(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "| Model | IoU | F1 | Balanced accuracy | Inference time per image (s) | Training time (s) |\n\
         |---|---|---|---|---|---|\n",
    );
    for r in rows {
        let train = r
            .training_seconds
            .map_or_else(|| "n/a".to_string(), |t| format!("{t:.2}"));
        let _ = writeln!(
            out,
            "| {} | {:.2} | {:.2} | {:.2} | {:.3} | {} |",
            r.model, r.iou, r.f1, r.balanced_accuracy, r.inference_seconds_per_image, train
        );
    }
    out
}
