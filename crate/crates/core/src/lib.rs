//! Detection evaluation, pseudo-label bootstrapping and hand-area frame triage.
//!
//! Everything here is pure computation over in-memory values; file IO, the
//! external trainer, the CLI and the HTTP service live in the `handtriage`
//! crate.

#![no_std]
extern crate alloc;

pub mod bootstrap;
pub mod evaluator;
pub mod formats;
pub mod geometry;
pub mod triage;

pub use bootstrap::{plan_rounds, select_top_k, Aggregate, BootstrapError, BootstrapPlan, LabeledPool, Provenance};
pub use evaluator::{evaluate, EvalConfig, EvalOutcome, MetricReport};
pub use formats::{Detection, FormatError, GroundTruthBox, LabelFile, SizeIndex};
pub use geometry::{area, iou, to_absolute, to_normalized, BBox, GeometryError, ImageSize, NormalizedBox};
pub use triage::{rethreshold, run_triage, score_frame, TriageError, TriageRun, Verdict, VerdictLedger};
