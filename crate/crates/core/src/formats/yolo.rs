//! YOLO-layout label files: `class cx cy w h [confidence]`, one box per line.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{Detection, FormatError, GroundTruthBox, SizeIndex};
use crate::geometry::{GeometryError, NormalizedBox};

const GT_FIELDS: usize = 5;
const DETECTION_FIELDS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LabelEntry {
    pub class: u32,
    pub bbox: NormalizedBox,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub confidence: Option<f64>,
}

/// Parsed contents of one label file.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LabelFile {
    pub image_id: String,
    pub entries: Vec<LabelEntry>,
}

fn parse_unit(line: usize, field: &'static str, raw: &str) -> Result<f64, FormatError> {
    let value: f64 = raw.parse().map_err(|_| FormatError::Malformed {
        line,
        reason: format!("{field} is not a number: {raw:?}"),
    })?;
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(FormatError::OutOfRange { line, field, value });
    }
    Ok(value)
}

/// Formats a float with at most 9 significant digits, shortest form.
pub fn format_coord(value: f64) -> String {
    let rounded: f64 = format!("{value:.8e}").parse().unwrap_or(value);
    format!("{rounded}")
}

impl LabelFile {
    pub fn new(image_id: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            entries: Vec::new(),
        }
    }

    /// Parses label text. Lines are 1-based in errors; blank lines are skipped.
    pub fn parse(image_id: impl Into<String>, text: &str) -> Result<Self, FormatError> {
        let mut entries = Vec::new();
        let mut arity: Option<usize> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let fields: Vec<&str> = raw_line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != GT_FIELDS && fields.len() != DETECTION_FIELDS {
                return Err(FormatError::Malformed {
                    line,
                    reason: format!("expected 5 or 6 fields, found {}", fields.len()),
                });
            }
            match arity {
                None => arity = Some(fields.len()),
                Some(expected) if expected != fields.len() => {
                    return Err(FormatError::MixedArity {
                        line,
                        expected,
                        found: fields.len(),
                    })
                }
                Some(_) => {}
            }
            let class: u32 = fields[0].parse().map_err(|_| FormatError::Malformed {
                line,
                reason: format!("class is not an integer: {:?}", fields[0]),
            })?;
            if class != 0 {
                return Err(FormatError::UnknownClass { line, class });
            }
            let bbox = NormalizedBox {
                cx: parse_unit(line, "cx", fields[1])?,
                cy: parse_unit(line, "cy", fields[2])?,
                w: parse_unit(line, "w", fields[3])?,
                h: parse_unit(line, "h", fields[4])?,
            };
            let confidence = match fields.get(5) {
                Some(raw) => Some(parse_unit(line, "confidence", raw)?),
                None => None,
            };
            entries.push(LabelEntry {
                class,
                bbox,
                confidence,
            });
        }
        Ok(Self {
            image_id: image_id.into(),
            entries,
        })
    }

    /// True when entries carry confidences. Empty files count as ground truth.
    pub fn is_detection(&self) -> bool {
        self.entries.iter().any(|e| e.confidence.is_some())
    }

    /// Drops the confidence column.
    pub fn as_ground_truth(&self) -> LabelFile {
        LabelFile {
            image_id: self.image_id.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| LabelEntry {
                    confidence: None,
                    ..e.clone()
                })
                .collect(),
        }
    }

    pub fn max_confidence(&self) -> Option<f64> {
        self.entries.iter().filter_map(|e| e.confidence).reduce(f64::max)
    }

    /// Serializes to label text, one entry per line with a trailing newline.
    pub fn to_yolo_string(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = write!(
                out,
                "{} {} {} {} {}",
                e.class,
                format_coord(e.bbox.cx),
                format_coord(e.bbox.cy),
                format_coord(e.bbox.w),
                format_coord(e.bbox.h)
            );
            if let Some(c) = e.confidence {
                out.push(' ');
                out.push_str(&format_coord(c));
            }
            out.push('\n');
        }
        out
    }
}

fn size_for(sizes: &SizeIndex, image_id: &str) -> Result<crate::geometry::ImageSize, FormatError> {
    sizes.lookup(image_id).ok_or_else(|| FormatError::MissingSize {
        image_id: image_id.to_string(),
    })
}

fn sorted_by_id(files: &[LabelFile]) -> Result<Vec<&LabelFile>, FormatError> {
    let mut sorted: Vec<&LabelFile> = files.iter().collect();
    sorted.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    for pair in sorted.windows(2) {
        if pair[0].image_id == pair[1].image_id {
            return Err(FormatError::DuplicateImage {
                image_id: pair[0].image_id.clone(),
            });
        }
    }
    Ok(sorted)
}

/// Converts ground-truth label files to absolute boxes. Ids count up from 1
/// in image-id order.
pub fn to_ground_truth(files: &[LabelFile], sizes: &SizeIndex) -> Result<Vec<GroundTruthBox>, FormatError> {
    let mut out = Vec::new();
    for file in sorted_by_id(files)? {
        let size = size_for(sizes, &file.image_id)?;
        for entry in &file.entries {
            out.push(GroundTruthBox {
                id: out.len() as u64 + 1,
                image_id: file.image_id.clone(),
                bbox: entry.bbox.to_absolute(size),
            });
        }
    }
    Ok(out)
}

/// Converts detection label files to absolute detections. Ids count up from 1
/// in image-id order.
pub fn to_detections(files: &[LabelFile], sizes: &SizeIndex) -> Result<Vec<Detection>, FormatError> {
    let mut out = Vec::new();
    for file in sorted_by_id(files)? {
        if file.entries.is_empty() {
            continue;
        }
        let size = size_for(sizes, &file.image_id)?;
        for entry in &file.entries {
            let confidence = entry.confidence.ok_or_else(|| FormatError::WrongKind {
                image_id: file.image_id.clone(),
                expected: "detections",
                found: "ground truth",
            })?;
            out.push(Detection {
                id: out.len() as u64 + 1,
                image_id: file.image_id.clone(),
                bbox: entry.bbox.to_absolute(size),
                confidence,
            });
        }
    }
    Ok(out)
}

pub(crate) fn geometry_error(image_id: &str) -> impl Fn(GeometryError) -> FormatError + '_ {
    move |source| FormatError::Geometry {
        image_id: image_id.to_string(),
        source,
    }
}
