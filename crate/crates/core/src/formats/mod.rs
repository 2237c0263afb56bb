//! Annotation and detection files: YOLO text labels, COCO-layout records,
//! the image size index and dataset manifests.

use alloc::string::String;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, GeometryError};

pub mod coco;
pub mod manifest;
pub mod sizes;
pub mod yolo;

pub use coco::{CocoAnnotation, CocoArtifact, CocoCategory, CocoDetection, CocoGroundTruth, CocoImage, ImageRef};
pub use manifest::{build_manifest, merge_manifests, DatasetManifest, ManifestError, Split, SplitCounts};
pub use sizes::SizeIndex;
pub use yolo::{LabelEntry, LabelFile};

/// The single category used throughout: hands.
pub const HAND_CATEGORY_ID: u64 = 1;
pub const HAND_CATEGORY_NAME: &str = "hand";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: {field} out of range ({value})")]
    OutOfRange {
        line: usize,
        field: &'static str,
        value: f64,
    },
    #[error("line {line}: found {found} fields but earlier lines have {expected}; ground truth and detection lines cannot be mixed")]
    MixedArity { line: usize, expected: usize, found: usize },
    #[error("line {line}: class {class} is not the hand class 0")]
    UnknownClass { line: usize, class: u32 },
    #[error("no image size known for {image_id}")]
    MissingSize { image_id: String },
    #[error("unknown image {image_id}")]
    UnknownImage { image_id: String },
    #[error("image {image_id} appears more than once")]
    DuplicateImage { image_id: String },
    #[error("annotation {annotation_id} has category {category_id}; only hand ({HAND_CATEGORY_ID}) is supported")]
    UnknownCategory { annotation_id: u64, category_id: u64 },
    #[error("{image_id}: expected {expected} but found {found}")]
    WrongKind {
        image_id: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("{image_id}: {source}")]
    Geometry {
        image_id: String,
        #[source]
        source: GeometryError,
    },
    #[error("{image_id}: confidence {value} outside [0, 1]")]
    Confidence { image_id: String, value: f64 },
}

/// Annotated hand box.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GroundTruthBox {
    pub id: u64,
    pub image_id: String,
    pub bbox: BBox,
}

impl GroundTruthBox {
    pub fn source_tag(&self) -> Option<&str> {
        source_tag(&self.image_id)
    }
}

/// Detector output: a box with its confidence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Detection {
    pub id: u64,
    pub image_id: String,
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn new(id: u64, image_id: impl Into<String>, bbox: BBox, confidence: f64) -> Result<Self, FormatError> {
        let image_id = image_id.into();
        if !(0.0..=1.0).contains(&confidence) {
            return Err(FormatError::Confidence {
                image_id,
                value: confidence,
            });
        }
        Ok(Self {
            id,
            image_id,
            bbox,
            confidence,
        })
    }
}

/// Dataset tag of a `tag/relative/path` image id.
pub fn source_tag(image_id: &str) -> Option<&str> {
    image_id.split_once('/').map(|(tag, _)| tag)
}

/// Image id with the extension of its last path segment removed.
///
/// This is the key shared by an image and its `.txt` label file.
pub fn label_key(image_id: &str) -> &str {
    let segment_start = image_id.rfind('/').map_or(0, |i| i + 1);
    match image_id[segment_start..].rfind('.') {
        Some(dot) if dot > 0 => &image_id[..segment_start + dot],
        _ => image_id,
    }
}

/// Relative path of the label file for an image id.
pub fn label_path(image_id: &str) -> String {
    let mut path = String::from(label_key(image_id));
    path.push_str(".txt");
    path
}
