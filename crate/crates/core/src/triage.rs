//! Frame triage by largest detected hand area, plus the examiner verdict
//! ledger and the review report.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::formats::{Detection, SizeIndex};
use crate::geometry::ImageSize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TriageError {
    #[error("threshold must be a non-negative number, got {0}")]
    InvalidThreshold(f64),
    #[error("detections reference unknown frames: {}", .0.join(", "))]
    UnknownFrames(Vec<String>),
    #[error("frame {0} is listed twice")]
    DuplicateFrame(String),
    #[error("normalized scoring needs the size of frame {0}")]
    MissingSize(String),
    #[error("frame {frame_id}: revision {expected} is stale, current revision is {current}")]
    StaleRevision {
        frame_id: String,
        expected: u64,
        current: u64,
    },
    #[error("unknown verdict {0:?}; expected unreviewed, relevant or irrelevant")]
    UnknownVerdict(String),
}

/// Compares strings treating runs of ASCII digits as numbers, so
/// `frame2` sorts before `frame10`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    while let (Some(&cx), Some(&cy)) = (x.first(), y.first()) {
        if cx.is_ascii_digit() && cy.is_ascii_digit() {
            let run = |s: &[u8]| s.iter().take_while(|c| c.is_ascii_digit()).count();
            let (nx, ny) = (run(x), run(y));
            let trim = |s: &[u8]| {
                let z = s.iter().take_while(|&&c| c == b'0').count();
                s[z..].to_vec()
            };
            let (dx, dy) = (trim(&x[..nx]), trim(&y[..ny]));
            let ord = dx.len().cmp(&dy.len()).then_with(|| dx.cmp(&dy));
            if ord != Ordering::Equal {
                return ord;
            }
            x = &x[nx..];
            y = &y[ny..];
        } else {
            if cx != cy {
                return cx.cmp(&cy);
            }
            x = &x[1..];
            y = &y[1..];
        }
    }
    x.len().cmp(&y.len()).then_with(|| a.cmp(b))
}

/// Largest box area among the detections; 0 when there are none.
pub fn score_frame(detections: &[Detection]) -> f64 {
    detections.iter().map(|d| d.bbox.area()).fold(0.0, f64::max)
}

fn check_threshold(t: f64) -> Result<(), TriageError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(TriageError::InvalidThreshold(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TriageOptions {
    /// Detections below this confidence are dropped before scoring.
    pub min_confidence: f64,
    /// Score by area as a fraction of the frame area instead of pixels.
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunMeta {
    pub run_id: String,
    pub frames_dir: String,
    pub detections_path: String,
    pub created_at: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FrameRecord {
    pub frame_id: String,
    pub size: Option<ImageSize>,
    pub detections: Vec<Detection>,
    pub largest_area: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TriageSummary {
    pub threshold: f64,
    pub flagged: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TriageRun {
    pub meta: RunMeta,
    pub threshold: f64,
    pub options: TriageOptions,
    /// Ranked: area descending, then frame id in natural order. Flagged
    /// frames therefore form a prefix.
    pub frames: Vec<FrameRecord>,
    pub summary: TriageSummary,
}

fn rank(a: &FrameRecord, b: &FrameRecord) -> Ordering {
    b.largest_area
        .total_cmp(&a.largest_area)
        .then_with(|| natural_cmp(&a.frame_id, &b.frame_id))
}

impl TriageRun {
    /// Re-sorts frames and recomputes flags and summary from stored areas.
    /// Use after deserializing or editing records by hand.
    pub fn reindex(&mut self) {
        self.frames.sort_by(rank);
        for f in &mut self.frames {
            f.flagged = f.largest_area > self.threshold;
        }
        self.summary = TriageSummary {
            threshold: self.threshold,
            flagged: self.flagged_count(self.threshold),
            total: self.frames.len(),
        };
    }

    fn flagged_count(&self, threshold: f64) -> usize {
        self.frames.partition_point(|f| f.largest_area > threshold)
    }

    pub fn frame(&self, frame_id: &str) -> Option<&FrameRecord> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    /// Frames in natural id order.
    pub fn frames_in_order(&self) -> Vec<&FrameRecord> {
        let mut v: Vec<&FrameRecord> = self.frames.iter().collect();
        v.sort_by(|a, b| natural_cmp(&a.frame_id, &b.frame_id));
        v
    }
}

/// Scores every frame and flags those whose largest area is strictly above
/// `threshold`. Detections are matched to frames by image id. `sizes` is
/// consulted for frame resolution and is required in normalized mode.
pub fn run_triage(
    meta: RunMeta,
    frames: &[String],
    detections: &[Detection],
    threshold: f64,
    options: TriageOptions,
    sizes: Option<&SizeIndex>,
) -> Result<TriageRun, TriageError> {
    check_threshold(threshold)?;
    let mut by_frame: BTreeMap<&str, Vec<Detection>> = BTreeMap::new();
    for id in frames {
        if by_frame.insert(id.as_str(), Vec::new()).is_some() {
            return Err(TriageError::DuplicateFrame(id.clone()));
        }
    }
    let mut unknown: Vec<String> = Vec::new();
    for d in detections {
        match by_frame.get_mut(d.image_id.as_str()) {
            Some(list) => {
                if d.confidence >= options.min_confidence {
                    list.push(d.clone());
                }
            }
            None => unknown.push(d.image_id.clone()),
        }
    }
    if !unknown.is_empty() {
        unknown.sort_by(|a, b| natural_cmp(a, b));
        unknown.dedup();
        return Err(TriageError::UnknownFrames(unknown));
    }

    let mut records = Vec::with_capacity(frames.len());
    for (frame_id, dets) in by_frame {
        let size = sizes.and_then(|s| s.lookup(frame_id));
        let mut largest_area = score_frame(&dets);
        if options.normalized && !dets.is_empty() {
            let size = size.ok_or_else(|| TriageError::MissingSize(frame_id.to_string()))?;
            largest_area /= size.area();
        }
        records.push(FrameRecord {
            frame_id: frame_id.to_string(),
            size,
            detections: dets,
            largest_area,
            flagged: false,
        });
    }
    let mut run = TriageRun {
        meta,
        threshold,
        options,
        frames: records,
        summary: TriageSummary {
            threshold,
            flagged: 0,
            total: 0,
        },
    };
    run.reindex();
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Rethreshold {
    pub threshold: f64,
    pub flagged: usize,
    pub total: usize,
    /// Largest area first.
    pub flagged_ids: Vec<String>,
}

/// Summary at another threshold from stored areas. Binary search over the
/// ranking, no rescoring.
pub fn rethreshold(run: &TriageRun, threshold: f64) -> Result<Rethreshold, TriageError> {
    check_threshold(threshold)?;
    let n = run.flagged_count(threshold);
    Ok(Rethreshold {
        threshold,
        flagged: n,
        total: run.frames.len(),
        flagged_ids: run.frames[..n].iter().map(|f| f.frame_id.clone()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    #[default]
    Unreviewed,
    Relevant,
    Irrelevant,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Unreviewed => "unreviewed",
            Verdict::Relevant => "relevant",
            Verdict::Irrelevant => "irrelevant",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = TriageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unreviewed" => Ok(Verdict::Unreviewed),
            "relevant" => Ok(Verdict::Relevant),
            "irrelevant" => Ok(Verdict::Irrelevant),
            other => Err(TriageError::UnknownVerdict(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct FrameVerdict {
    pub frame_id: String,
    pub verdict: Verdict,
    pub note: String,
    pub revision: u64,
}

/// Latest verdict per frame. Every update must name the revision it was
/// based on, so replayed or concurrent edits are rejected instead of
/// silently applied twice.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerdictLedger {
    latest: BTreeMap<String, FrameVerdict>,
}

impl VerdictLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds from a log; for each frame the highest revision wins.
    pub fn replay(log: impl IntoIterator<Item = FrameVerdict>) -> Self {
        let mut ledger = Self::new();
        for v in log {
            match ledger.latest.get(&v.frame_id) {
                Some(cur) if cur.revision >= v.revision => {}
                _ => {
                    ledger.latest.insert(v.frame_id.clone(), v);
                }
            }
        }
        ledger
    }

    /// 0 for frames never marked.
    pub fn revision(&self, frame_id: &str) -> u64 {
        self.latest.get(frame_id).map_or(0, |v| v.revision)
    }

    pub fn get(&self, frame_id: &str) -> Option<&FrameVerdict> {
        self.latest.get(frame_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FrameVerdict> {
        self.latest.values()
    }

    /// Records a verdict on top of `based_on`, returning the stored entry
    /// with its new revision.
    pub fn apply(
        &mut self,
        frame_id: &str,
        verdict: Verdict,
        note: impl Into<String>,
        based_on: u64,
    ) -> Result<FrameVerdict, TriageError> {
        let current = self.revision(frame_id);
        if based_on != current {
            return Err(TriageError::StaleRevision {
                frame_id: frame_id.to_string(),
                expected: based_on,
                current,
            });
        }
        let entry = FrameVerdict {
            frame_id: frame_id.to_string(),
            verdict,
            note: note.into(),
            revision: current + 1,
        };
        self.latest.insert(frame_id.to_string(), entry.clone());
        Ok(entry)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ReportRow {
    pub frame_id: String,
    pub area_px2: f64,
    pub flagged: bool,
    pub verdict: Verdict,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TriageReport {
    pub meta: RunMeta,
    pub threshold: f64,
    pub options: TriageOptions,
    pub summary: TriageSummary,
    pub rows: Vec<ReportRow>,
}

/// Rows follow the run ranking; frames without a verdict are unreviewed.
pub fn export_report(run: &TriageRun, verdicts: &VerdictLedger) -> TriageReport {
    let rows = run
        .frames
        .iter()
        .map(|f| {
            let v = verdicts.get(&f.frame_id);
            ReportRow {
                frame_id: f.frame_id.clone(),
                area_px2: f.largest_area,
                flagged: f.flagged,
                verdict: v.map_or(Verdict::Unreviewed, |v| v.verdict),
                note: v.map_or_else(String::new, |v| v.note.clone()),
            }
        })
        .collect();
    TriageReport {
        meta: run.meta.clone(),
        threshold: run.threshold,
        options: run.options,
        summary: run.summary.clone(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use alloc::format;
    use alloc::vec;

    fn det(id: u64, frame: &str, w: f64, h: f64, conf: f64) -> Detection {
        Detection::new(id, frame, BBox::new(0.0, 0.0, w, h).unwrap(), conf).unwrap()
    }

    /// Largest areas 900, 30,000, 31,000 and 40,000.
    fn fixture() -> (Vec<String>, Vec<Detection>) {
        let frames = ["f1", "f2", "f3", "f4"].map(String::from).to_vec();
        let dets = vec![
            det(1, "f1", 30.0, 30.0, 0.9),
            det(2, "f2", 100.0, 300.0, 0.8),
            det(3, "f3", 100.0, 310.0, 0.7),
            det(4, "f4", 200.0, 200.0, 0.6),
            det(5, "f4", 30.0, 30.0, 0.95),
        ];
        (frames, dets)
    }

    fn triage(t: f64) -> TriageRun {
        let (frames, dets) = fixture();
        run_triage(RunMeta::default(), &frames, &dets, t, TriageOptions::default(), None).unwrap()
    }

    #[test]
    fn score_examples() {
        assert_eq!(score_frame(&[]), 0.0);
        assert_eq!(
            score_frame(&[det(1, "a", 30.0, 30.0, 0.1), det(2, "a", 200.0, 200.0, 0.1)]),
            40_000.0
        );
        assert_eq!(score_frame(&[det(1, "a", 100.0, 300.0, 0.1)]), 30_000.0);
    }

    #[test]
    fn boundary_area_is_not_flagged() {
        let run = triage(30_000.0);
        assert_eq!((run.summary.flagged, run.summary.total), (2, 4));
        let flagged: Vec<&str> = run
            .frames
            .iter()
            .filter(|f| f.flagged)
            .map(|f| f.frame_id.as_str())
            .collect();
        assert_eq!(flagged, ["f4", "f3"]);
        assert!(!run.frame("f2").unwrap().flagged);
    }

    #[test]
    fn threshold_zero_flags_frames_with_detections() {
        let (mut frames, dets) = fixture();
        frames.push("empty".into());
        let run = run_triage(RunMeta::default(), &frames, &dets, 0.0, TriageOptions::default(), None).unwrap();
        assert_eq!((run.summary.flagged, run.summary.total), (4, 5));
        assert!(!run.frame("empty").unwrap().flagged);
    }

    #[test]
    fn unknown_frames_listed() {
        let (frames, mut dets) = fixture();
        dets.push(det(9, "ghost2", 1.0, 1.0, 0.5));
        dets.push(det(10, "ghost10", 1.0, 1.0, 0.5));
        let err = run_triage(RunMeta::default(), &frames, &dets, 1.0, TriageOptions::default(), None).unwrap_err();
        assert_eq!(err, TriageError::UnknownFrames(vec!["ghost2".into(), "ghost10".into()]));
        assert!(format!("{err}").contains("ghost2, ghost10"));
    }

    #[test]
    fn rethreshold_sweep() {
        let run = triage(30_000.0);
        let counts: Vec<usize> = [50_000.0, 40_000.0, 35_000.0, 30_000.0, 0.0]
            .iter()
            .map(|&t| rethreshold(&run, t).unwrap().flagged)
            .collect();
        assert_eq!(counts, [0, 0, 1, 2, 4]);
        assert_eq!(rethreshold(&run, 30_000.0).unwrap().flagged_ids, ["f4", "f3"]);
        assert!(rethreshold(&run, -1.0).is_err());
        assert!(rethreshold(&run, f64::NAN).is_err());
        assert!(run_triage(RunMeta::default(), &[], &[], -1.0, TriageOptions::default(), None).is_err());
    }

    #[test]
    fn min_confidence_filter_and_normalized_mode() {
        let (frames, dets) = fixture();
        let opts = TriageOptions {
            min_confidence: 0.75,
            normalized: false,
        };
        let run = run_triage(RunMeta::default(), &frames, &dets, 0.0, opts, None).unwrap();
        assert_eq!(run.frame("f4").unwrap().largest_area, 900.0);
        assert_eq!(run.frame("f3").unwrap().largest_area, 0.0);

        let opts = TriageOptions {
            min_confidence: 0.0,
            normalized: true,
        };
        assert_eq!(
            run_triage(RunMeta::default(), &frames, &dets, 0.0, opts, None).unwrap_err(),
            TriageError::MissingSize("f1".into())
        );
        let sizes: SizeIndex = frames
            .iter()
            .map(|f| (f.clone(), ImageSize::new(400, 250).unwrap()))
            .collect();
        let run = run_triage(RunMeta::default(), &frames, &dets, 0.3, opts, Some(&sizes)).unwrap();
        assert_eq!(run.frame("f2").unwrap().largest_area, 0.3);
        assert_eq!(run.summary.flagged, 2);
    }

    #[test]
    fn natural_order() {
        let mut ids = vec!["frame10", "frame2", "frame1", "frame02", "a"];
        ids.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(ids, ["a", "frame1", "frame02", "frame2", "frame10"]);
        assert_eq!(natural_cmp("x", "x"), Ordering::Equal);
    }

    #[test]
    fn ranking_ties_use_natural_order() {
        let frames: Vec<String> = ["f10", "f9", "f1"].map(String::from).to_vec();
        let run = run_triage(RunMeta::default(), &frames, &[], 0.0, TriageOptions::default(), None).unwrap();
        let order: Vec<&str> = run.frames.iter().map(|f| f.frame_id.as_str()).collect();
        assert_eq!(order, ["f1", "f9", "f10"]);
    }

    #[test]
    fn verdict_revisions() {
        let mut ledger = VerdictLedger::new();
        let v1 = ledger.apply("f3", Verdict::Relevant, "left hand", 0).unwrap();
        assert_eq!(v1.revision, 1);
        assert!(matches!(
            ledger.apply("f3", Verdict::Irrelevant, "", 0),
            Err(TriageError::StaleRevision { current: 1, .. })
        ));
        let v2 = ledger.apply("f3", Verdict::Irrelevant, "blurred", 1).unwrap();
        assert_eq!(v2.revision, 2);
        let replayed = VerdictLedger::replay([v2.clone(), v1]);
        assert_eq!(replayed.get("f3"), Some(&v2));
        assert_eq!("relevant".parse::<Verdict>().unwrap(), Verdict::Relevant);
        assert!("maybe".parse::<Verdict>().is_err());
    }

    #[test]
    fn report_rows() {
        let run = triage(30_000.0);
        let mut ledger = VerdictLedger::new();
        ledger.apply("f3", Verdict::Relevant, "ring visible", 0).unwrap();
        let report = export_report(&run, &ledger);
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.rows.iter().filter(|r| r.flagged).count(), 2);
        let ids: Vec<&str> = report.rows.iter().map(|r| r.frame_id.as_str()).collect();
        assert_eq!(ids, ["f4", "f3", "f2", "f1"]);
        assert_eq!(report.rows[1].verdict, Verdict::Relevant);
        assert_eq!(report.rows[0].verdict, Verdict::Unreviewed);

        let empty = run_triage(RunMeta::default(), &[], &[], 1.0, TriageOptions::default(), None).unwrap();
        assert!(export_report(&empty, &ledger).rows.is_empty());
    }
}
