//! Score thresholding, NMS and tiled inference.

pub mod decode;
pub mod nms;
pub mod tiles;

pub use crate::boxes::iou;
pub use decode::{run_postprocess, softmax, PostprocessParams};
pub use nms::{detection_order, nms, Detection};
pub use tiles::{merge_tiles, plan_tiles, TileWindow};
