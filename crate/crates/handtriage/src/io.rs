//! Reading and writing label directories, COCO files, size indexes and
//! manifests.

use std::fs;
use std::path::Path;

use handtriage_core::formats::coco::{detections_to_labels, labels_to_coco, resolve_detections};
use handtriage_core::formats::yolo::{to_detections, to_ground_truth};
use handtriage_core::formats::{label_path, CocoArtifact, CocoDetection, CocoGroundTruth};
use handtriage_core::{Detection, GroundTruthBox, ImageSize, LabelFile, SizeIndex};

use crate::error::{format_err, io_err, json_err, Error, Result};
use crate::fsutil::{read_json, read_string, walk_files, write_atomic, write_json};

pub const IMAGE_EXTENSIONS: [&str; 8] = ["jpg", "jpeg", "png", "bmp", "gif", "webp", "tif", "tiff"];

pub fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// `tag/relative/path` with forward slashes.
fn relative_id(root: &Path, path: &Path, tag: Option<&str>) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let rel = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/");
    match tag {
        Some(t) if !t.is_empty() => format!("{t}/{rel}"),
        _ => rel,
    }
}

/// Every `*.txt` under `dir`. Image ids are the relative paths without the
/// `.txt` suffix, optionally prefixed with `tag/`.
pub fn read_label_dir(dir: &Path, tag: Option<&str>) -> Result<Vec<LabelFile>> {
    let mut out = Vec::new();
    for path in walk_files(dir)? {
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let id = relative_id(dir, &path.with_extension(""), tag);
        let text = read_string(&path)?;
        out.push(LabelFile::parse(id, &text).map_err(format_err(&path))?);
    }
    Ok(out)
}

/// Plain write without sync: label directories are bulk outputs that can be
/// regenerated.
pub fn write_label_file(dir: &Path, file: &LabelFile) -> Result<()> {
    let path = dir.join(label_path(&file.image_id));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&path, file.to_yolo_string()).map_err(io_err(&path))
}

pub fn write_label_dir(dir: &Path, files: &[LabelFile]) -> Result<()> {
    files.iter().try_for_each(|f| write_label_file(dir, f))
}

pub fn read_image_size(path: &Path) -> Result<ImageSize> {
    let dim = imagesize::size(path).map_err(|e| Error::ImageSize {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let narrow = |v: usize| u32::try_from(v).unwrap_or(0);
    ImageSize::new(narrow(dim.width), narrow(dim.height)).map_err(|e| Error::ImageSize {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Sizes of every image under `dir`, keyed like [`read_label_dir`] ids but
/// keeping the image extension.
pub fn sizes_from_images(dir: &Path, tag: Option<&str>) -> Result<SizeIndex> {
    let mut index = SizeIndex::default();
    for path in walk_files(dir)? {
        if is_image(&path) {
            index.insert(relative_id(dir, &path, tag), read_image_size(&path)?);
        }
    }
    Ok(index)
}

pub fn read_sizes(path: &Path) -> Result<SizeIndex> {
    SizeIndex::parse(&read_string(path)?).map_err(format_err(path))
}

pub fn write_sizes(path: &Path, sizes: &SizeIndex) -> Result<()> {
    write_atomic(path, sizes.to_text().as_bytes())
}

/// A JSON array is a detection list; an object is a ground-truth file.
pub fn read_coco(path: &Path) -> Result<CocoArtifact> {
    let value: serde_json::Value = read_json(path)?;
    if value.is_array() {
        let dets: Vec<CocoDetection> = serde_json::from_value(value).map_err(json_err(path))?;
        Ok(CocoArtifact::Detections(dets))
    } else {
        let gt: CocoGroundTruth = serde_json::from_value(value).map_err(json_err(path))?;
        Ok(CocoArtifact::GroundTruth(gt))
    }
}

pub fn write_coco(path: &Path, artifact: &CocoArtifact) -> Result<()> {
    match artifact {
        CocoArtifact::GroundTruth(gt) => write_json(path, gt),
        CocoArtifact::Detections(d) => write_json(path, d),
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("json")
}

/// Ground truth loaded from a label directory or a COCO file.
pub struct GroundTruthSource {
    pub boxes: Vec<GroundTruthBox>,
    pub sizes: SizeIndex,
    pub coco: Option<CocoGroundTruth>,
}

/// Label directories need `sizes`; COCO files carry their own.
pub fn load_ground_truth(path: &Path, sizes: Option<&SizeIndex>) -> Result<GroundTruthSource> {
    if is_json(path) {
        let CocoArtifact::GroundTruth(gt) = read_coco(path)? else {
            return Err(Error::Invalid(format!(
                "{}: expected a ground-truth object, found a detection list",
                path.display()
            )));
        };
        let mut index = gt.sizes().map_err(format_err(path))?;
        if let Some(extra) = sizes {
            for (id, size) in extra.iter() {
                index.insert(id, size);
            }
        }
        return Ok(GroundTruthSource {
            boxes: gt.boxes().map_err(format_err(path))?,
            sizes: index,
            coco: Some(gt),
        });
    }
    let sizes = sizes.ok_or_else(|| Error::Invalid(format!("{}: label directories need --sizes", path.display())))?;
    let files = read_label_dir(path, None)?;
    Ok(GroundTruthSource {
        boxes: to_ground_truth(&files, sizes).map_err(format_err(path))?,
        sizes: sizes.clone(),
        coco: None,
    })
}

pub fn load_detections(path: &Path, sizes: &SizeIndex, coco_gt: Option<&CocoGroundTruth>) -> Result<Vec<Detection>> {
    if is_json(path) {
        let CocoArtifact::Detections(dets) = read_coco(path)? else {
            return Err(Error::Invalid(format!(
                "{}: expected a detection list, found a ground-truth object",
                path.display()
            )));
        };
        return resolve_detections(&dets, coco_gt).map_err(format_err(path));
    }
    let files = read_label_dir(path, None)?;
    to_detections(&files, sizes).map_err(format_err(path))
}

/// Converts between a YOLO label directory and a COCO file, in whichever
/// direction `input` implies. Returns the number of boxes written.
pub fn convert(input: &Path, output: &Path, sizes: Option<&SizeIndex>, tag: Option<&str>) -> Result<usize> {
    if is_json(input) {
        let files = match read_coco(input)? {
            CocoArtifact::GroundTruth(gt) => gt.to_labels().map_err(format_err(input))?,
            CocoArtifact::Detections(dets) => {
                let sizes = sizes.ok_or_else(|| Error::Invalid("detection lists need --sizes".into()))?;
                let dets = resolve_detections(&dets, None).map_err(format_err(input))?;
                detections_to_labels(&dets, sizes).map_err(format_err(input))?
            }
        };
        write_label_dir(output, &files)?;
        return Ok(files.iter().map(|f| f.entries.len()).sum());
    }
    let sizes = sizes.ok_or_else(|| Error::Invalid("label directories need --sizes".into()))?;
    let files = read_label_dir(input, tag)?;
    let artifact = labels_to_coco(&files, sizes).map_err(format_err(input))?;
    write_coco(output, &artifact)?;
    Ok(files.iter().map(|f| f.entries.len()).sum())
}
