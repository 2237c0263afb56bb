//! Axis-aligned boxes in absolute pixels and normalized YOLO layout.
//!
//! [`BBox`] is corner-anchored (`x`, `y` = top-left) in pixels, [`NormalizedBox`] is
//! center-anchored with every field a fraction of the image size.

use core::fmt;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Tolerance used when deciding whether a box fits inside an image.
const BOUNDS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("{field} must be finite (got {value})")]
    NotFinite { field: &'static str, value: f64 },
    #[error("{field} must be non-negative (got {value})")]
    Negative { field: &'static str, value: f64 },
    #[error("{field} out of range (got {value}, expected 0..=1)")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("image {field} must be at least 1 pixel")]
    EmptyImage { field: &'static str },
    #[error("box ({x}, {y}, {w}, {h}) exceeds image bounds {width}x{height}")]
    OutOfBounds {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        width: u32,
        height: u32,
    },
}

fn check_non_negative(field: &'static str, value: f64) -> Result<f64, GeometryError> {
    if !value.is_finite() {
        return Err(GeometryError::NotFinite { field, value });
    }
    if value < 0.0 {
        return Err(GeometryError::Negative { field, value });
    }
    Ok(value)
}

fn check_unit(field: &'static str, value: f64) -> Result<f64, GeometryError> {
    if !value.is_finite() {
        return Err(GeometryError::NotFinite { field, value });
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(GeometryError::OutOfRange { field, value });
    }
    Ok(value)
}

/// Corner-anchored rectangle in absolute pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    /// Validated constructor: all fields finite and non-negative.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Ok(Self {
            x: check_non_negative("x", x)?,
            y: check_non_negative("y", y)?,
            w: check_non_negative("w", w)?,
            h: check_non_negative("h", h)?,
        })
    }

    /// Builds a box from a COCO-style `[x, y, w, h]` array.
    pub fn from_xywh(xywh: [f64; 4]) -> Result<Self, GeometryError> {
        Self::new(xywh[0], xywh[1], xywh[2], xywh[3])
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Area in square pixels; degenerate boxes have area 0.
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() == 0.0
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// Scales every coordinate by `k` about the origin.
    pub fn scaled(&self, k: f64) -> BBox {
        BBox {
            x: self.x * k,
            y: self.y * k,
            w: self.w * k,
            h: self.h * k,
        }
    }

    pub fn fits_within(&self, size: ImageSize) -> bool {
        let width = f64::from(size.width);
        let height = f64::from(size.height);
        self.right() <= width + BOUNDS_EPS * width && self.bottom() <= height + BOUNDS_EPS * height
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.w, self.h)
    }
}

/// Free-function form of [`BBox::area`].
pub fn area(b: &BBox) -> f64 {
    b.area()
}

/// IoU together with a flag marking the vacuous degenerate/degenerate comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub iou: f64,
    /// Union area was zero; `iou` is reported as 0.
    pub vacuous: bool,
}

pub fn overlap(a: &BBox, b: &BBox) -> Overlap {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return Overlap {
            iou: 0.0,
            vacuous: true,
        };
    }
    Overlap {
        iou: (inter / union).clamp(0.0, 1.0),
        vacuous: false,
    }
}

/// Intersection over union. Two degenerate boxes compare as 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    overlap(a, b).iou
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 {
            return Err(GeometryError::EmptyImage { field: "width" });
        }
        if height == 0 {
            return Err(GeometryError::EmptyImage { field: "height" });
        }
        Ok(Self { width, height })
    }

    pub fn area(&self) -> f64 {
        f64::from(self.width) * f64::from(self.height)
    }
}

impl fmt::Display for ImageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Center-anchored box in YOLO layout, every field a fraction in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NormalizedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl NormalizedBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        Ok(Self {
            cx: check_unit("cx", cx)?,
            cy: check_unit("cy", cy)?,
            w: check_unit("w", w)?,
            h: check_unit("h", h)?,
        })
    }

    pub fn to_absolute(&self, size: ImageSize) -> BBox {
        to_absolute(self, size)
    }
}

/// Converts a normalized box to pixels, clipping the result to the image.
pub fn to_absolute(n: &NormalizedBox, size: ImageSize) -> BBox {
    let width = f64::from(size.width);
    let height = f64::from(size.height);
    let x0 = ((n.cx - n.w / 2.0) * width).clamp(0.0, width);
    let y0 = ((n.cy - n.h / 2.0) * height).clamp(0.0, height);
    let x1 = ((n.cx + n.w / 2.0) * width).clamp(0.0, width);
    let y1 = ((n.cy + n.h / 2.0) * height).clamp(0.0, height);
    // Unclipped boxes keep w*width exactly so the inverse is lossless.
    let w = if x0 > 0.0 && x1 < width { n.w * width } else { x1 - x0 };
    let h = if y0 > 0.0 && y1 < height { n.h * height } else { y1 - y0 };
    BBox {
        x: x0,
        y: y0,
        w: w.max(0.0),
        h: h.max(0.0),
    }
}

/// Inverse of [`to_absolute`]. Boxes must already lie inside the image.
pub fn to_normalized(b: &BBox, size: ImageSize) -> Result<NormalizedBox, GeometryError> {
    if !b.fits_within(size) {
        return Err(GeometryError::OutOfBounds {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            width: size.width,
            height: size.height,
        });
    }
    let width = f64::from(size.width);
    let height = f64::from(size.height);
    NormalizedBox::new(
        ((b.x + b.w / 2.0) / width).clamp(0.0, 1.0),
        ((b.y + b.h / 2.0) / height).clamp(0.0, 1.0),
        (b.w / width).clamp(0.0, 1.0),
        (b.h / height).clamp(0.0, 1.0),
    )
}
