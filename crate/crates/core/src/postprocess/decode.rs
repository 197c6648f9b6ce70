use super::nms::{nms, Detection};
use crate::error::{Error, Result};
use crate::graph::HeadOutput;
use crate::ssd::{decode_box, PriorSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessParams {
    pub conf_threshold: f32,
    pub nms_threshold: f32,
    pub variances: [f32; 2],
}

impl Default for PostprocessParams {
    fn default() -> Self {
        PostprocessParams {
            conf_threshold: 0.5,
            nms_threshold: 0.3,
            variances: [0.1, 0.2],
        }
    }
}

pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let m = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let e: Vec<f32> = logits.iter().map(|&v| (v - m).exp()).collect();
    let s: f32 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Scores, thresholds and decodes every prior, scales to a `width × height`
/// pixel frame, then applies per-class NMS. Boxes that collapse to zero
/// extent after clamping are dropped.
pub fn run_postprocess(
    head: &HeadOutput,
    priors: &PriorSet,
    params: &PostprocessParams,
    image_dims: (usize, usize),
) -> Result<Vec<Detection>> {
    if head.num_priors() != priors.len() {
        return Err(Error::Shape(format!(
            "head predicts {} priors but {} were generated",
            head.num_priors(),
            priors.len()
        )));
    }
    let (w, h) = (image_dims.0 as f32, image_dims.1 as f32);
    let loc = head.flat_loc();
    let conf = head.flat_conf();
    let mut dets = Vec::new();
    for (p, (t, logits)) in loc.iter().zip(&conf).enumerate() {
        let probs = softmax(logits);
        let mut decoded = None;
        for (class_id, &score) in probs.iter().enumerate().skip(1) {
            if score < params.conf_threshold {
                continue;
            }
            let bbox = *decoded
                .get_or_insert_with(|| decode_box(t, &priors.boxes[p], params.variances).scale(w, h));
            if bbox.is_valid() {
                dets.push(Detection {
                    class_id,
                    score,
                    bbox,
                });
            }
        }
    }
    Ok(nms(&dets, params.nms_threshold))
}
