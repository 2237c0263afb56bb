use alloc::vec::Vec;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("at least one IoU threshold is required")]
    NoThresholds,
    #[error("IoU threshold {0} is outside (0, 1]")]
    ThresholdRange(f64),
    #[error("IoU thresholds must be strictly increasing")]
    ThresholdOrder,
    #[error("max-detection caps must be strictly increasing positive integers")]
    Caps,
    #[error("area edges must be strictly increasing positive numbers")]
    Edges,
    #[error("the recall grid needs at least 2 points (got {0})")]
    RecallGrid(usize),
}

/// Protocol parameters: IoU sweep, detection caps, scale edges, recall grid.
///
/// Exactly three caps are carried; they feed the three AR columns of the
/// report in increasing order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub max_detections: [usize; 3],
    /// Square-pixel edges between the small/medium and medium/large buckets.
    pub area_edges: [f64; 2],
    pub recall_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect(),
            max_detections: [1, 10, 100],
            area_edges: [32.0 * 32.0, 96.0 * 96.0],
            recall_points: 101,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.iou_thresholds.is_empty() {
            return Err(ConfigError::NoThresholds);
        }
        for &t in &self.iou_thresholds {
            if !(t > 0.0 && t <= 1.0) {
                return Err(ConfigError::ThresholdRange(t));
            }
        }
        if self.iou_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::ThresholdOrder);
        }
        let [a, b, c] = self.max_detections;
        if a == 0 || a >= b || b >= c {
            return Err(ConfigError::Caps);
        }
        let [lo, hi] = self.area_edges;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(ConfigError::Edges);
        }
        if self.recall_points < 2 {
            return Err(ConfigError::RecallGrid(self.recall_points));
        }
        Ok(())
    }

    pub fn max_cap(&self) -> usize {
        self.max_detections[2]
    }

    /// Evenly spaced recall levels from 0 to 1 inclusive.
    pub fn recall_grid(&self) -> Vec<f64> {
        let steps = (self.recall_points - 1) as f64;
        (0..self.recall_points).map(|i| i as f64 / steps).collect()
    }
}

/// Scale bucket of a box, by area in square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum AreaRange {
    All,
    Small,
    Medium,
    Large,
}

impl AreaRange {
    pub const BUCKETS: [AreaRange; 4] = [AreaRange::All, AreaRange::Small, AreaRange::Medium, AreaRange::Large];

    /// Buckets are closed on the left: small `< lo`, medium `[lo, hi)`, large `>= hi`.
    pub fn contains(&self, area: f64, edges: [f64; 2]) -> bool {
        let [lo, hi] = edges;
        match self {
            AreaRange::All => true,
            AreaRange::Small => area < lo,
            AreaRange::Medium => area >= lo && area < hi,
            AreaRange::Large => area >= hi,
        }
    }
}
