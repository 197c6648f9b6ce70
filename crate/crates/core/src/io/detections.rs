//! Detections as a JSON array of `{image_id, class, score, xmin, ymin, xmax, ymax}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boxes::BBox;
use crate::error::{Error, Result};
use crate::postprocess::Detection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class: usize,
    pub score: f32,
    pub xmin: f32,
    pub ymin: f32,
    pub xmax: f32,
    pub ymax: f32,
}

pub type DetsByImage = BTreeMap<String, Vec<Detection>>;

pub fn to_records(image_id: &str, dets: &[Detection]) -> Vec<DetectionRecord> {
    dets.iter()
        .map(|d| DetectionRecord {
            image_id: image_id.to_string(),
            class: d.class_id,
            score: d.score,
            xmin: d.bbox.xmin,
            ymin: d.bbox.ymin,
            xmax: d.bbox.xmax,
            ymax: d.bbox.ymax,
        })
        .collect()
}

pub fn detections_to_json(records: &[DetectionRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("records serialize");
    s.push('\n');
    s
}

pub fn parse_detections(text: &str) -> Result<DetsByImage> {
    let records: Vec<DetectionRecord> = serde_json::from_str(text)?;
    let mut out = DetsByImage::new();
    for r in records {
        let bbox = BBox::new(r.xmin, r.ymin, r.xmax, r.ymax).checked()?;
        if !(0.0..=1.0).contains(&r.score) {
            return Err(Error::InvalidArgument(format!(
                "image {}: score {} outside [0, 1]",
                r.image_id, r.score
            )));
        }
        out.entry(r.image_id).or_default().push(Detection {
            class_id: r.class,
            score: r.score,
            bbox,
        });
    }
    Ok(out)
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<DetsByImage> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text)
}
