use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::boxes::{iou_unchecked, BBox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: usize,
    pub score: f32,
    pub bbox: BBox,
}

/// Score descending, then box corners, then class. Gives a total order so
/// results do not depend on input order.
pub fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.bbox.xmin.total_cmp(&b.bbox.xmin))
        .then(a.bbox.ymin.total_cmp(&b.bbox.ymin))
        .then(a.bbox.xmax.total_cmp(&b.bbox.xmax))
        .then(a.bbox.ymax.total_cmp(&b.bbox.ymax))
        .then(a.class_id.cmp(&b.class_id))
}

/// Greedy non-maximum suppression, independently per class.
///
/// A box is kept iff its IoU with every already kept box of its class is at
/// most `threshold`. Output is sorted by [`detection_order`].
pub fn nms(dets: &[Detection], threshold: f32) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sorted.sort_by(detection_order);
    let mut kept: Vec<Detection> = Vec::new();
    for d in sorted {
        let suppressed = kept
            .iter()
            .any(|k| k.class_id == d.class_id && iou_unchecked(&k.bbox, &d.bbox) > threshold);
        if !suppressed {
            kept.push(d);
        }
    }
    kept
}
