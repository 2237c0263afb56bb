use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::config::EvalConfig;

/// Reported when the ground-truth subset behind a metric is empty.
pub const SENTINEL: f64 = -1.0;

/// The twelve summary metrics. `ar1`, `ar10` and `ar100` are recall at the
/// configured caps in increasing order (1, 10, 100 by default).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MetricReport {
    #[cfg_attr(feature = "serde", serde(rename = "AP"))]
    pub ap: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AP50"))]
    pub ap50: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AP75"))]
    pub ap75: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AP_S"))]
    pub ap_small: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AP_M"))]
    pub ap_medium: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AP_L"))]
    pub ap_large: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AR1"))]
    pub ar1: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AR10"))]
    pub ar10: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AR100"))]
    pub ar100: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AR_S"))]
    pub ar_small: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AR_M"))]
    pub ar_medium: f64,
    #[cfg_attr(feature = "serde", serde(rename = "AR_L"))]
    pub ar_large: f64,
}

pub const METRIC_NAMES: [&str; 12] = [
    "AP", "AP50", "AP75", "AP-S", "AP-M", "AP-L", "AR1", "AR10", "AR100", "AR-S", "AR-M", "AR-L",
];

impl MetricReport {
    pub fn values(&self) -> [f64; 12] {
        [
            self.ap,
            self.ap50,
            self.ap75,
            self.ap_small,
            self.ap_medium,
            self.ap_large,
            self.ar1,
            self.ar10,
            self.ar100,
            self.ar_small,
            self.ar_medium,
            self.ar_large,
        ]
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, f64)> {
        METRIC_NAMES.into_iter().zip(self.values())
    }

    /// Two-line fixed-point table with three decimals; empty subsets print as `-1.000`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for name in METRIC_NAMES {
            let _ = write!(out, "{name:>7}");
        }
        out.push('\n');
        for v in self.values() {
            let _ = write!(out, "{v:>7.3}");
        }
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ThresholdMetrics {
    pub iou: f64,
    /// AP over all scales at the largest cap.
    pub ap: f64,
    /// Recall over all scales at the largest cap.
    pub ar: f64,
    pub true_positives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EvalOutcome {
    pub metrics: MetricReport,
    pub config: EvalConfig,
    pub per_threshold: Vec<ThresholdMetrics>,
    pub images: usize,
    pub ground_truth: usize,
    pub detections: usize,
}
