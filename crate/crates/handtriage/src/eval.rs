//! File-level evaluation: load ground truth and detections, run the core
//! evaluator, write the report.

use std::path::Path;

use handtriage_core::formats::label_key;
use handtriage_core::{evaluate, EvalConfig, EvalOutcome, SizeIndex};

use crate::error::{Error, Result};
use crate::fsutil::{write_atomic, write_json};
use crate::io::{load_detections, load_ground_truth};

/// Image ids are compared by label key, so `a.jpg` in a COCO file and `a`
/// from a label directory refer to the same image.
pub fn run_eval(gt: &Path, detections: &Path, sizes: Option<&SizeIndex>, cfg: &EvalConfig) -> Result<EvalOutcome> {
    let source = load_ground_truth(gt, sizes)?;
    let mut dets = load_detections(detections, &source.sizes, source.coco.as_ref())?;
    let mut boxes = source.boxes;
    for b in &mut boxes {
        b.image_id = label_key(&b.image_id).to_string();
    }
    for d in &mut dets {
        d.image_id = label_key(&d.image_id).to_string();
    }
    Ok(evaluate(&boxes, &dets, cfg)?)
}

/// Writes `report.json` and the fixed-point `report.txt` table.
pub fn write_eval_report(out_dir: &Path, outcome: &EvalOutcome) -> Result<()> {
    write_json(&out_dir.join("report.json"), outcome)?;
    write_atomic(&out_dir.join("report.txt"), outcome.metrics.to_table().as_bytes())
}

fn snap(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_thresholds(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Invalid(format!("bad IoU threshold {s:?}")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if step <= 0.0 || stop < start {
                return Err(Error::Invalid(format!("bad threshold range {text:?}")));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|i| snap(start + i as f64 * step)).collect())
        }
        [_] => text.split(',').map(num).collect(),
        _ => Err(Error::Invalid(format!("bad threshold list {text:?}"))),
    }
}
