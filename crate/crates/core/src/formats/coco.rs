//! COCO-layout records and conversion to and from YOLO label files.
//!
//! Ground truth uses the usual `images` / `annotations` / `categories` object;
//! detections are a flat array of `{image_id, category_id, bbox, score}`.
//! Image ids inside COCO are integers, the toolkit's string id travels in
//! `file_name`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::yolo::geometry_error;
use super::{
    Detection, FormatError, GroundTruthBox, LabelEntry, LabelFile, SizeIndex, HAND_CATEGORY_ID, HAND_CATEGORY_NAME,
};
use crate::geometry::{to_normalized, BBox, ImageSize};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CocoImage {
    pub id: u64,
    pub file_name: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    #[cfg_attr(feature = "serde", serde(default))]
    pub area: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub iscrowd: u8,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CocoCategory {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CocoGroundTruth {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub categories: Vec<CocoCategory>,
}

/// A detection's image: the COCO integer id or the toolkit string id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(untagged))]
pub enum ImageRef {
    Id(u64),
    Name(String),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CocoDetection {
    pub image_id: ImageRef,
    pub category_id: u64,
    pub bbox: [f64; 4],
    pub score: f64,
}

/// Output of a YOLO to COCO conversion.
#[derive(Debug, Clone, PartialEq)]
pub enum CocoArtifact {
    GroundTruth(CocoGroundTruth),
    Detections(Vec<CocoDetection>),
}

fn hand_category() -> CocoCategory {
    CocoCategory {
        id: HAND_CATEGORY_ID,
        name: HAND_CATEGORY_NAME.to_string(),
    }
}

fn sorted_unique(files: &[LabelFile]) -> Result<Vec<&LabelFile>, FormatError> {
    let mut sorted: Vec<&LabelFile> = files.iter().collect();
    sorted.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    if let Some(pair) = sorted.windows(2).find(|p| p[0].image_id == p[1].image_id) {
        return Err(FormatError::DuplicateImage {
            image_id: pair[0].image_id.clone(),
        });
    }
    Ok(sorted)
}

fn size_of(sizes: &SizeIndex, image_id: &str) -> Result<ImageSize, FormatError> {
    sizes.lookup(image_id).ok_or_else(|| FormatError::MissingSize {
        image_id: image_id.to_string(),
    })
}

/// YOLO to COCO. Detection files (with confidences) produce a detection
/// array, ground-truth files a COCO ground-truth object. Mixing both is an
/// error. An empty set yields an empty ground-truth object.
pub fn labels_to_coco(files: &[LabelFile], sizes: &SizeIndex) -> Result<CocoArtifact, FormatError> {
    let sorted = sorted_unique(files)?;
    let detection_file = sorted.iter().find(|f| f.is_detection());
    let gt_file = sorted.iter().find(|f| !f.is_detection() && !f.entries.is_empty());
    match (detection_file, gt_file) {
        (Some(_), Some(gt)) => Err(FormatError::WrongKind {
            image_id: gt.image_id.clone(),
            expected: "detections",
            found: "ground truth",
        }),
        (Some(_), None) => {
            let mut dets = Vec::new();
            for file in sorted {
                let size = size_of(sizes, &file.image_id)?;
                for entry in &file.entries {
                    dets.push(CocoDetection {
                        image_id: ImageRef::Name(file.image_id.clone()),
                        category_id: HAND_CATEGORY_ID,
                        bbox: entry.bbox.to_absolute(size).to_xywh(),
                        score: entry.confidence.unwrap_or_default(),
                    });
                }
            }
            Ok(CocoArtifact::Detections(dets))
        }
        (None, _) => {
            let mut gt = CocoGroundTruth {
                categories: vec![hand_category()],
                ..Default::default()
            };
            for (idx, file) in sorted.into_iter().enumerate() {
                let size = size_of(sizes, &file.image_id)?;
                let image_id = idx as u64 + 1;
                gt.images.push(CocoImage {
                    id: image_id,
                    file_name: file.image_id.clone(),
                    width: size.width,
                    height: size.height,
                });
                for entry in &file.entries {
                    let b = entry.bbox.to_absolute(size);
                    gt.annotations.push(CocoAnnotation {
                        id: gt.annotations.len() as u64 + 1,
                        image_id,
                        category_id: HAND_CATEGORY_ID,
                        bbox: b.to_xywh(),
                        area: b.area(),
                        iscrowd: 0,
                    });
                }
            }
            Ok(CocoArtifact::GroundTruth(gt))
        }
    }
}

impl CocoGroundTruth {
    fn image_table(&self) -> Result<BTreeMap<u64, &CocoImage>, FormatError> {
        let mut table = BTreeMap::new();
        for image in &self.images {
            if table.insert(image.id, image).is_some() {
                return Err(FormatError::DuplicateImage {
                    image_id: image.file_name.clone(),
                });
            }
        }
        Ok(table)
    }

    fn check_category(ann: &CocoAnnotation) -> Result<(), FormatError> {
        if ann.category_id != HAND_CATEGORY_ID {
            return Err(FormatError::UnknownCategory {
                annotation_id: ann.id,
                category_id: ann.category_id,
            });
        }
        Ok(())
    }

    /// Image sizes recorded in the `images` array, keyed by `file_name`.
    pub fn sizes(&self) -> Result<SizeIndex, FormatError> {
        let mut index = SizeIndex::default();
        for image in &self.images {
            let size = ImageSize::new(image.width, image.height).map_err(geometry_error(&image.file_name))?;
            index.insert(image.file_name.clone(), size);
        }
        Ok(index)
    }

    /// `file_name` of a COCO image id.
    pub fn file_name(&self, id: u64) -> Option<&str> {
        self.images.iter().find(|i| i.id == id).map(|i| i.file_name.as_str())
    }

    /// Absolute ground-truth boxes, keyed by `file_name`, ids = annotation ids.
    pub fn boxes(&self) -> Result<Vec<GroundTruthBox>, FormatError> {
        let table = self.image_table()?;
        let mut out = Vec::with_capacity(self.annotations.len());
        for ann in &self.annotations {
            Self::check_category(ann)?;
            let image = table.get(&ann.image_id).ok_or_else(|| FormatError::UnknownImage {
                image_id: ann.image_id.to_string(),
            })?;
            out.push(GroundTruthBox {
                id: ann.id,
                image_id: image.file_name.clone(),
                bbox: BBox::from_xywh(ann.bbox).map_err(geometry_error(&image.file_name))?,
            });
        }
        Ok(out)
    }

    /// COCO to YOLO. Every image gets a label file, possibly empty, in image
    /// order.
    pub fn to_labels(&self) -> Result<Vec<LabelFile>, FormatError> {
        let table = self.image_table()?;
        let mut files: BTreeMap<u64, LabelFile> = self
            .images
            .iter()
            .map(|i| (i.id, LabelFile::new(i.file_name.clone())))
            .collect();
        for ann in &self.annotations {
            Self::check_category(ann)?;
            let image = table.get(&ann.image_id).ok_or_else(|| FormatError::UnknownImage {
                image_id: ann.image_id.to_string(),
            })?;
            let size = ImageSize::new(image.width, image.height).map_err(geometry_error(&image.file_name))?;
            let b = BBox::from_xywh(ann.bbox).map_err(geometry_error(&image.file_name))?;
            let bbox = to_normalized(&b, size).map_err(geometry_error(&image.file_name))?;
            if let Some(file) = files.get_mut(&ann.image_id) {
                file.entries.push(LabelEntry {
                    class: 0,
                    bbox,
                    confidence: None,
                });
            }
        }
        let mut out: Vec<LabelFile> = files.into_values().collect();
        out.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        Ok(out)
    }
}

/// Resolves detection image references to string ids. Integer references
/// need the ground truth that defines them.
pub fn resolve_detections(dets: &[CocoDetection], gt: Option<&CocoGroundTruth>) -> Result<Vec<Detection>, FormatError> {
    let names: BTreeMap<u64, &str> = gt
        .map(|g| g.images.iter().map(|i| (i.id, i.file_name.as_str())).collect())
        .unwrap_or_default();
    let mut out = Vec::with_capacity(dets.len());
    for (idx, det) in dets.iter().enumerate() {
        let image_id = match &det.image_id {
            ImageRef::Name(name) => name.clone(),
            ImageRef::Id(id) => names
                .get(id)
                .map(|n| n.to_string())
                .ok_or_else(|| FormatError::UnknownImage {
                    image_id: id.to_string(),
                })?,
        };
        if det.category_id != HAND_CATEGORY_ID {
            return Err(FormatError::UnknownCategory {
                annotation_id: idx as u64 + 1,
                category_id: det.category_id,
            });
        }
        let bbox = BBox::from_xywh(det.bbox).map_err(geometry_error(&image_id))?;
        out.push(Detection::new(idx as u64 + 1, image_id, bbox, det.score)?);
    }
    Ok(out)
}

/// Detections back to 6-field YOLO label files, one per image, sorted by id.
pub fn detections_to_labels(dets: &[Detection], sizes: &SizeIndex) -> Result<Vec<LabelFile>, FormatError> {
    let mut files: BTreeMap<&str, LabelFile> = BTreeMap::new();
    for det in dets {
        let size = size_of(sizes, &det.image_id)?;
        let bbox = to_normalized(&det.bbox, size).map_err(geometry_error(&det.image_id))?;
        files
            .entry(det.image_id.as_str())
            .or_insert_with(|| LabelFile::new(det.image_id.clone()))
            .entries
            .push(LabelEntry {
                class: 0,
                bbox,
                confidence: Some(det.confidence),
            });
    }
    Ok(files.into_values().collect())
}
