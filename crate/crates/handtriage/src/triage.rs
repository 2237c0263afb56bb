//! Triage over a directory of frames and a detections file, and the report
//! writers.

use std::fs;
use std::path::{Path, PathBuf};

use handtriage_core::formats::coco::resolve_detections;
use handtriage_core::formats::yolo::to_detections;
use handtriage_core::formats::CocoArtifact;
use handtriage_core::triage::{natural_cmp, run_triage, RunMeta, TriageOptions, TriageReport, TriageRun};
use handtriage_core::SizeIndex;

use crate::error::{format_err, io_err, Error, Result};
use crate::fsutil::{write_atomic, write_json};
use crate::io::{is_image, read_coco, read_image_size, read_label_dir};

/// Image files directly inside `dir`, in natural order of their names.
/// Frame ids are file stems.
pub fn list_frames(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut frames = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() && is_image(&path) {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            frames.push((stem, path));
        }
    }
    frames.sort_by(|a, b| natural_cmp(&a.0, &b.0));
    if let Some(w) = frames.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Invalid(format!(
            "{} and {} map to the same frame id",
            w[0].1.display(),
            w[1].1.display()
        )));
    }
    Ok(frames)
}

/// Frame file for a frame id, if present.
pub fn frame_path(dir: &Path, frame_id: &str) -> Result<Option<PathBuf>> {
    Ok(list_frames(dir)?
        .into_iter()
        .find(|(id, _)| id == frame_id)
        .map(|(_, p)| p))
}

fn frame_id_of(image_id: &str) -> String {
    let name = image_id.rsplit('/').next().unwrap_or(image_id);
    match name.rsplit_once('.') {
        Some((stem, ext)) if is_image(Path::new(&format!("x.{ext}"))) => stem.to_string(),
        _ => name.to_string(),
    }
}

pub struct TriageRequest<'a> {
    pub frames_dir: &'a Path,
    /// COCO detection list (absolute boxes) or a directory of 6-field YOLO
    /// label files named after the frames.
    pub detections: &'a Path,
    pub threshold: f64,
    pub options: TriageOptions,
    pub run_id: String,
    pub created_at: String,
}

pub fn triage_from_paths(req: &TriageRequest<'_>) -> Result<TriageRun> {
    let frames = list_frames(req.frames_dir)?;
    let mut sizes = SizeIndex::default();
    for (id, path) in &frames {
        sizes.insert(id.clone(), read_image_size(path)?);
    }
    let mut dets = if req.detections.is_dir() {
        let files = read_label_dir(req.detections, None)?;
        to_detections(&files, &sizes).map_err(format_err(req.detections))?
    } else {
        match read_coco(req.detections)? {
            CocoArtifact::Detections(d) => resolve_detections(&d, None).map_err(format_err(req.detections))?,
            CocoArtifact::GroundTruth(_) => {
                return Err(Error::Invalid(format!(
                    "{}: expected a detection list",
                    req.detections.display()
                )))
            }
        }
    };
    for d in &mut dets {
        d.image_id = frame_id_of(&d.image_id);
    }
    let ids: Vec<String> = frames.into_iter().map(|(id, _)| id).collect();
    let meta = RunMeta {
        run_id: req.run_id.clone(),
        frames_dir: req.frames_dir.display().to_string(),
        detections_path: req.detections.display().to_string(),
        created_at: req.created_at.clone(),
    };
    Ok(run_triage(meta, &ids, &dets, req.threshold, req.options, Some(&sizes))?)
}

/// CSV with columns frame_id, area_px2, flagged, verdict, note.
pub fn report_csv(report: &TriageReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["frame_id", "area_px2", "flagged", "verdict", "note"])?;
    for row in &report.rows {
        w.write_record([
            row.frame_id.as_str(),
            &row.area_px2.to_string(),
            if row.flagged { "true" } else { "false" },
            row.verdict.as_str(),
            row.note.as_str(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes `path` as JSON and a CSV next to it with the same stem.
pub fn write_report(path: &Path, report: &TriageReport) -> Result<PathBuf> {
    write_json(path, report)?;
    let csv_path = path.with_extension("csv");
    write_atomic(&csv_path, report_csv(report)?.as_bytes())?;
    Ok(csv_path)
}
