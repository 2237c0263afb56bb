//! Twelve-metric AP/AR evaluation: IoU sweep, scale buckets, detection caps.
//!
//! Per image, detections are ranked by confidence (ties by ascending id),
//! capped, and greedily matched to the untaken ground truth of highest IoU.
//! Precision/recall are pooled across images and AP is the mean
//! interpolated precision over a 101-level recall grid. For scale buckets,
//! ground truth outside the bucket is ignored, and so are detections matched
//! to it or, when unmatched, detections whose own area lies outside.

pub mod config;
pub mod curve;
pub mod matching;
pub mod report;

use alloc::vec::Vec;

pub use config::{AreaRange, ConfigError, EvalConfig};
pub use curve::{interpolate_ap, pr_curve, PrCurve, PrPoint};
pub use matching::{match_detections, ImageMatches, MatchOutcome, MatchRecord, MatchResult};
pub use report::{EvalOutcome, MetricReport, ThresholdMetrics, METRIC_NAMES, SENTINEL};

use crate::formats::{Detection, GroundTruthBox};
use matching::{build_scenes, match_scenes};

/// AP and recall-at-each-cap for one (threshold, bucket) pair.
#[derive(Debug, Clone, Copy)]
struct Cell {
    ap: f64,
    recall: [f64; 3],
    tp: usize,
    fp: usize,
}

fn recall_at(result: &MatchResult, cap: usize, total: usize) -> f64 {
    let tp: usize = result
        .images
        .iter()
        .map(|img| img.records.iter().take(cap).filter(|r| r.is_tp()).count())
        .sum();
    tp as f64 / total as f64
}

fn evaluate_cell(result: &MatchResult, cfg: &EvalConfig, grid: &[f64]) -> Option<Cell> {
    let curve = pr_curve(result)?;
    let total = curve.total_gt;
    let mut recall = [0.0; 3];
    for (slot, &cap) in recall.iter_mut().zip(&cfg.max_detections) {
        *slot = recall_at(result, cap, total);
    }
    Some(Cell {
        ap: interpolate_ap(&curve, grid),
        recall,
        tp: result.true_positives(),
        fp: result.false_positives(),
    })
}

/// Arithmetic mean, kept inside [min, max] of its inputs so that rounding
/// cannot push AP above AP50 when all thresholds agree.
fn mean(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                n += 1;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            None => return SENTINEL,
        }
    }
    if n == 0 {
        SENTINEL
    } else {
        (sum / n as f64).clamp(lo, hi)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

/// Runs the full protocol. Inputs are assumed validated; the config is
/// checked here.
pub fn evaluate(gt: &[GroundTruthBox], dt: &[Detection], cfg: &EvalConfig) -> Result<EvalOutcome, ConfigError> {
    cfg.validate()?;
    let grid = cfg.recall_grid();
    let scenes = build_scenes(gt, dt, cfg.max_cap());
    let edges = cfg.area_edges;

    let mut thresholds: Vec<f64> = cfg.iou_thresholds.clone();
    for extra in [0.5, 0.75] {
        if !thresholds.iter().any(|&t| close(t, extra)) {
            thresholds.push(extra);
        }
    }

    // cells[t][bucket]
    let cells: Vec<[Option<Cell>; 4]> = thresholds
        .iter()
        .map(|&t| AreaRange::BUCKETS.map(|bucket| evaluate_cell(&match_scenes(&scenes, t, bucket, edges), cfg, &grid)))
        .collect();
    let swept = &cells[..cfg.iou_thresholds.len()];
    let at = |target: f64| {
        thresholds
            .iter()
            .position(|&t| close(t, target))
            .and_then(|i| cells[i][0])
            .map_or(SENTINEL, |c| c.ap)
    };
    let bucket_ap = |b: usize| mean(swept.iter().map(|c| c[b].map(|c| c.ap)));
    let bucket_ar = |b: usize, cap: usize| mean(swept.iter().map(|c| c[b].map(|c| c.recall[cap])));

    let metrics = MetricReport {
        ap: bucket_ap(0),
        ap50: at(0.5),
        ap75: at(0.75),
        ap_small: bucket_ap(1),
        ap_medium: bucket_ap(2),
        ap_large: bucket_ap(3),
        ar1: bucket_ar(0, 0),
        ar10: bucket_ar(0, 1),
        ar100: bucket_ar(0, 2),
        ar_small: bucket_ar(1, 2),
        ar_medium: bucket_ar(2, 2),
        ar_large: bucket_ar(3, 2),
    };
    let per_threshold = cfg
        .iou_thresholds
        .iter()
        .zip(swept)
        .map(|(&iou, c)| match c[0] {
            Some(cell) => ThresholdMetrics {
                iou,
                ap: cell.ap,
                ar: cell.recall[2],
                true_positives: cell.tp,
                false_positives: cell.fp,
            },
            None => ThresholdMetrics {
                iou,
                ap: SENTINEL,
                ar: SENTINEL,
                true_positives: 0,
                false_positives: scenes.iter().map(|s| s.dets.len()).sum(),
            },
        })
        .collect();
    Ok(EvalOutcome {
        metrics,
        config: cfg.clone(),
        per_threshold,
        images: scenes.len(),
        ground_truth: gt.len(),
        detections: dt.len(),
    })
}
