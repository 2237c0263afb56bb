//! Pooled precision/recall sweep and recall-grid interpolation.

use alloc::vec::Vec;

use super::matching::{MatchRecord, MatchResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Raw (not yet envelope-smoothed) precision/recall points, one per ranked
/// detection.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub total_gt: usize,
}

impl PrCurve {
    /// Precision with the right-to-left running maximum applied, making it
    /// non-increasing in recall.
    pub fn envelope(&self) -> Vec<f64> {
        let mut env: Vec<f64> = self.points.iter().map(|p| p.precision).collect();
        for i in (0..env.len().saturating_sub(1)).rev() {
            if env[i + 1] > env[i] {
                env[i] = env[i + 1];
            }
        }
        env
    }

    pub fn final_recall(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.recall)
    }
}

/// Pools detections over all images, sorts by confidence (ties by detection
/// id) and sweeps cumulative TP/FP. Returns `None` when there is no ground
/// truth, which makes every derived metric undefined.
pub fn pr_curve(matches: &MatchResult) -> Option<PrCurve> {
    let total_gt = matches.gt_total();
    if total_gt == 0 {
        return None;
    }
    let mut pooled: Vec<&MatchRecord> = matches.records().filter(|r| r.is_tp() || r.is_fp()).collect();
    pooled.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.detection_id.cmp(&b.detection_id))
    });
    let total = total_gt as f64;
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(pooled.len());
    for (n, rec) in pooled.iter().enumerate() {
        if rec.is_tp() {
            tp += 1;
        }
        points.push(PrPoint {
            recall: tp as f64 / total,
            precision: tp as f64 / (n + 1) as f64,
        });
    }
    Some(PrCurve { points, total_gt })
}

/// Mean over the recall grid of the best precision reached at or beyond
/// each recall level; levels the curve never reaches contribute 0.
pub fn interpolate_ap(curve: &PrCurve, grid: &[f64]) -> f64 {
    if grid.is_empty() {
        return 0.0;
    }
    let env = curve.envelope();
    let mut idx = 0;
    let mut sum = 0.0;
    for &level in grid {
        while idx < curve.points.len() && curve.points[idx].recall < level {
            idx += 1;
        }
        if idx < env.len() {
            sum += env[idx];
        }
    }
    sum / grid.len() as f64
}
