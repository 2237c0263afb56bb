//! Greedy, confidence-ordered matching of detections to ground truth.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::config::AreaRange;
use crate::formats::{Detection, GroundTruthBox};
use crate::geometry::iou;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchOutcome {
    Matched {
        gt_id: u64,
        iou: f64,
    },
    Unmatched,
    /// Outside the evaluated scale bucket; neither TP nor FP.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRecord {
    pub detection_id: u64,
    pub confidence: f64,
    pub outcome: MatchOutcome,
}

impl MatchRecord {
    pub fn is_tp(&self) -> bool {
        matches!(self.outcome, MatchOutcome::Matched { .. })
    }

    pub fn is_fp(&self) -> bool {
        matches!(self.outcome, MatchOutcome::Unmatched)
    }
}

/// Matches for one image at one threshold. Records follow the ranked
/// detection order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatches {
    pub image_id: String,
    pub records: Vec<MatchRecord>,
    /// Ground truth counted for this image (in-bucket only).
    pub gt_total: usize,
    pub gt_unmatched: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub threshold: f64,
    pub images: Vec<ImageMatches>,
}

impl MatchResult {
    pub fn gt_total(&self) -> usize {
        self.images.iter().map(|i| i.gt_total).sum()
    }

    pub fn true_positives(&self) -> usize {
        self.records().filter(|r| r.is_tp()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.records().filter(|r| r.is_fp()).count()
    }

    pub fn false_negatives(&self) -> usize {
        self.images.iter().map(|i| i.gt_unmatched).sum()
    }

    pub fn records(&self) -> impl Iterator<Item = &MatchRecord> {
        self.images.iter().flat_map(|i| i.records.iter())
    }

    /// Keeps the first `cap` detections per image. Greedy matching is prefix
    /// stable, so this equals matching with the smaller cap directly.
    pub fn truncated(&self, cap: usize) -> MatchResult {
        MatchResult {
            threshold: self.threshold,
            images: self
                .images
                .iter()
                .map(|img| {
                    let records: Vec<MatchRecord> = img.records.iter().take(cap).copied().collect();
                    let matched = records.iter().filter(|r| r.is_tp()).count();
                    ImageMatches {
                        image_id: img.image_id.clone(),
                        gt_total: img.gt_total,
                        gt_unmatched: img.gt_total - matched,
                        records,
                    }
                })
                .collect(),
        }
    }
}

/// Ranking used everywhere: confidence descending, then detection id ascending.
pub fn rank_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence.total_cmp(&a.confidence).then(a.id.cmp(&b.id))
}

/// One image's ground truth and capped, ranked detections with their IoU table.
#[derive(Debug, Clone)]
pub(crate) struct Scene<'a> {
    pub image_id: &'a str,
    pub gts: Vec<&'a GroundTruthBox>,
    pub dets: Vec<&'a Detection>,
    /// Row-major `dets.len() x gts.len()`.
    ious: Vec<f64>,
}

impl<'a> Scene<'a> {
    fn iou(&self, d: usize, g: usize) -> f64 {
        self.ious[d * self.gts.len() + g]
    }

    fn greedy(&self, threshold: f64, bucket: AreaRange, edges: [f64; 2]) -> ImageMatches {
        let in_bucket: Vec<bool> = self.gts.iter().map(|g| bucket.contains(g.bbox.area(), edges)).collect();
        let mut taken = vec![false; self.gts.len()];
        let mut records = Vec::with_capacity(self.dets.len());
        for (d, det) in self.dets.iter().enumerate() {
            // Best untaken GT with IoU >= threshold: in-bucket GT first, then
            // highest IoU, then lowest id (gts are sorted by id).
            let mut best: Option<(usize, f64)> = None;
            for g in 0..self.gts.len() {
                if taken[g] {
                    continue;
                }
                let v = self.iou(d, g);
                if v < threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((b, bv)) => (in_bucket[g] && !in_bucket[b]) || (in_bucket[g] == in_bucket[b] && v > bv),
                };
                if better {
                    best = Some((g, v));
                }
            }
            let outcome = match best {
                Some((g, v)) => {
                    taken[g] = true;
                    if in_bucket[g] {
                        MatchOutcome::Matched {
                            gt_id: self.gts[g].id,
                            iou: v,
                        }
                    } else {
                        MatchOutcome::Ignored
                    }
                }
                None if bucket.contains(det.bbox.area(), edges) => MatchOutcome::Unmatched,
                None => MatchOutcome::Ignored,
            };
            records.push(MatchRecord {
                detection_id: det.id,
                confidence: det.confidence,
                outcome,
            });
        }
        let gt_total = in_bucket.iter().filter(|&&b| b).count();
        let matched = records.iter().filter(|r| r.is_tp()).count();
        ImageMatches {
            image_id: self.image_id.into(),
            records,
            gt_total,
            gt_unmatched: gt_total - matched,
        }
    }
}

/// Groups boxes by image (sorted by image id), ranks and caps detections,
/// and precomputes IoUs.
pub(crate) fn build_scenes<'a>(gt: &'a [GroundTruthBox], dt: &'a [Detection], cap: usize) -> Vec<Scene<'a>> {
    let mut grouped: BTreeMap<&str, (Vec<&GroundTruthBox>, Vec<&Detection>)> = BTreeMap::new();
    for g in gt {
        grouped.entry(g.image_id.as_str()).or_default().0.push(g);
    }
    for d in dt {
        grouped.entry(d.image_id.as_str()).or_default().1.push(d);
    }
    grouped
        .into_iter()
        .map(|(image_id, (mut gts, mut dets))| {
            gts.sort_by_key(|g| g.id);
            dets.sort_by(|a, b| rank_order(a, b));
            dets.truncate(cap);
            let ious = dets
                .iter()
                .flat_map(|d| gts.iter().map(move |g| iou(&d.bbox, &g.bbox)))
                .collect();
            Scene {
                image_id,
                gts,
                dets,
                ious,
            }
        })
        .collect()
}

pub(crate) fn match_scenes(scenes: &[Scene<'_>], threshold: f64, bucket: AreaRange, edges: [f64; 2]) -> MatchResult {
    MatchResult {
        threshold,
        images: scenes.iter().map(|s| s.greedy(threshold, bucket, edges)).collect(),
    }
}

/// Matches all detections against all ground truth at one IoU threshold,
/// keeping at most `cap` detections per image.
pub fn match_detections(gt: &[GroundTruthBox], dt: &[Detection], threshold: f64, cap: usize) -> MatchResult {
    let scenes = build_scenes(gt, dt, cap);
    match_scenes(&scenes, threshold, AreaRange::All, [0.0, 0.0])
}
