//! Multi-box training loss with hard negative mining.

use super::coding::encode_box;
use super::matching::match_priors;
use super::priors::PriorSet;
use crate::boxes::BBox;
use crate::error::{Error, Result};
use crate::graph::HeadOutput;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub variances: [f32; 2],
    pub match_iou: f32,
    /// Negatives kept per positive.
    pub neg_ratio: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            variances: [0.1, 0.2],
            match_iou: 0.5,
            neg_ratio: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// Smooth-L1 over positives, divided by `num_pos`.
    pub loc_loss: f32,
    /// Cross-entropy over positives and mined negatives, divided by `num_pos`.
    pub conf_loss: f32,
    pub num_pos: usize,
    pub num_neg_mined: usize,
}

impl LossReport {
    pub fn total(&self) -> f32 {
        self.loc_loss + self.conf_loss
    }
}

pub fn smooth_l1(x: f32) -> f32 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * a * a
    } else {
        a - 0.5
    }
}

/// `logsumexp(logits) − logits[target]`.
pub fn cross_entropy(logits: &[f32], target: usize) -> f32 {
    let m = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<f32>().ln();
    lse - logits[target]
}

/// Indices of the `min(ratio · num_pos, available)` non-positive priors with
/// the highest background loss, highest first. Ties go to the lower index.
pub fn mine_hard_negatives(bg_loss: &[f32], positive: &[bool], ratio: usize) -> Vec<usize> {
    let num_pos = positive.iter().filter(|&&p| p).count();
    let mut negatives: Vec<usize> = (0..bg_loss.len()).filter(|&i| !positive[i]).collect();
    let keep = (ratio * num_pos).min(negatives.len());
    negatives.sort_by(|&a, &b| bg_loss[b].total_cmp(&bg_loss[a]).then(a.cmp(&b)));
    negatives.truncate(keep);
    negatives
}

/// `labels[i]` is the foreground class (≥ 1) of `gts[i]`; class 0 is background.
/// With no positives the loss is defined as zero and nothing is mined.
pub fn multibox_loss(
    head: &HeadOutput,
    priors: &PriorSet,
    gts: &[BBox],
    labels: &[usize],
    cfg: &LossConfig,
) -> Result<LossReport> {
    if head.num_priors() != priors.len() {
        return Err(Error::Shape(format!(
            "head predicts {} priors but {} were generated",
            head.num_priors(),
            priors.len()
        )));
    }
    if gts.len() != labels.len() {
        return Err(Error::Shape(format!("{} boxes but {} labels", gts.len(), labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l == 0 || l >= head.num_classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside foreground classes 1..{}",
            head.num_classes
        )));
    }
    for g in gts {
        g.checked()?;
    }

    let m = match_priors(gts, priors, cfg.match_iou);
    let positive: Vec<bool> = m.matched.iter().map(Option::is_some).collect();
    let num_pos = m.num_positive();
    if num_pos == 0 {
        return Ok(LossReport {
            loc_loss: 0.0,
            conf_loss: 0.0,
            num_pos: 0,
            num_neg_mined: 0,
        });
    }

    let loc = head.flat_loc();
    let conf = head.flat_conf();
    let mut loc_sum = 0.0f32;
    let mut conf_sum = 0.0f32;
    for (p, g) in m.matched.iter().enumerate() {
        if let Some(g) = *g {
            let target = encode_box(&gts[g], &priors.boxes[p], cfg.variances)?;
            loc_sum += loc[p].iter().zip(target).map(|(a, b)| smooth_l1(a - b)).sum::<f32>();
            conf_sum += cross_entropy(&conf[p], labels[g]);
        }
    }
    let bg: Vec<f32> = conf.iter().map(|c| cross_entropy(c, 0)).collect();
    let mined = mine_hard_negatives(&bg, &positive, cfg.neg_ratio);
    conf_sum += mined.iter().map(|&i| bg[i]).sum::<f32>();

    Ok(LossReport {
        loc_loss: loc_sum / num_pos as f32,
        conf_loss: conf_sum / num_pos as f32,
        num_pos,
        num_neg_mined: mined.len(),
    })
}
