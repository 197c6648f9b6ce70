//! File formats and evaluation.

pub mod annotations;
pub mod detections;
pub mod eval;
pub mod png;
pub mod weights;

pub use annotations::{parse_annotations, read_annotations, GtBox, GtByImage};
pub use detections::{detections_to_json, parse_detections, read_detections, to_records, DetectionRecord, DetsByImage};
pub use eval::{average_precision, evaluate_ap, evaluate_counts, mae_rmse, EvalSummary, ImageCount};
pub use png::{load_png, save_png};
pub use weights::{WeightEntry, WeightStore};
