//! Sidecar size index: one `image-id width height` line per image.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt::Write;

use super::{label_key, FormatError};
use crate::geometry::ImageSize;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SizeIndex {
    by_id: BTreeMap<String, ImageSize>,
    by_key: BTreeMap<String, ImageSize>,
}

impl SizeIndex {
    pub fn insert(&mut self, image_id: impl Into<String>, size: ImageSize) {
        let image_id = image_id.into();
        self.by_key.insert(label_key(&image_id).to_string(), size);
        self.by_id.insert(image_id, size);
    }

    /// Exact id first, then the extension-less label key.
    pub fn lookup(&self, image_id: &str) -> Option<ImageSize> {
        self.by_id
            .get(image_id)
            .or_else(|| self.by_key.get(label_key(image_id)))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ImageSize)> {
        self.by_id.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Parses index text. Ids may contain spaces; the last two fields are the
    /// dimensions. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut index = SizeIndex::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.rsplitn(3, char::is_whitespace);
            let (Some(h), Some(w), Some(id)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(FormatError::Malformed {
                    line,
                    reason: "expected `image-id width height`".to_string(),
                });
            };
            let dim = |field: &str, raw: &str| -> Result<u32, FormatError> {
                raw.parse().map_err(|_| FormatError::Malformed {
                    line,
                    reason: format!("{field} is not a positive integer: {raw:?}"),
                })
            };
            let size = ImageSize::new(dim("width", w)?, dim("height", h)?).map_err(|e| FormatError::Malformed {
                line,
                reason: e.to_string(),
            })?;
            let id = id.trim_end();
            if index.by_id.contains_key(id) {
                return Err(FormatError::DuplicateImage {
                    image_id: id.to_string(),
                });
            }
            index.insert(id, size);
        }
        Ok(index)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, size) in &self.by_id {
            let _ = writeln!(out, "{id} {} {}", size.width, size.height);
        }
        out
    }
}

impl FromIterator<(String, ImageSize)> for SizeIndex {
    fn from_iter<T: IntoIterator<Item = (String, ImageSize)>>(iter: T) -> Self {
        let mut index = SizeIndex::default();
        for (id, size) in iter {
            index.insert(id, size);
        }
        index
    }
}
