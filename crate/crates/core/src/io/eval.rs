//! Counting errors and average precision.

use std::collections::BTreeSet;

use serde::Serialize;

use super::annotations::GtByImage;
use super::detections::DetsByImage;
use crate::boxes::iou_unchecked;
use crate::error::{Error, Result};
use crate::postprocess::detection_order;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ImageCount {
    pub image_id: String,
    pub predicted: usize,
    pub ground_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub images: Vec<ImageCount>,
    pub mae: f64,
    pub rmse: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap: Option<f64>,
}

/// Mean absolute and root-mean-square difference of paired counts.
pub fn mae_rmse(predicted: &[usize], ground_truth: &[usize]) -> Result<(f64, f64)> {
    if predicted.len() != ground_truth.len() || predicted.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "need equally many non-zero counts, got {} and {}",
            predicted.len(),
            ground_truth.len()
        )));
    }
    let n = predicted.len() as f64;
    let diffs = predicted.iter().zip(ground_truth).map(|(&p, &g)| p as f64 - g as f64);
    let (abs, sq) = diffs.fold((0.0, 0.0), |(a, s), d| (a + d.abs(), s + d * d));
    Ok((abs / n, (sq / n).sqrt()))
}

fn check_ids(dets: &DetsByImage, gts: &GtByImage) -> Result<()> {
    let d: BTreeSet<&String> = dets.keys().collect();
    let g: BTreeSet<&String> = gts.keys().collect();
    if d != g {
        let missing: Vec<_> = g.difference(&d).collect();
        let extra: Vec<_> = d.difference(&g).collect();
        return Err(Error::ImageIdMismatch(format!(
            "missing detections for {missing:?}, detections for unknown images {extra:?}"
        )));
    }
    Ok(())
}

pub fn evaluate_counts(dets: &DetsByImage, gts: &GtByImage) -> Result<EvalSummary> {
    check_ids(dets, gts)?;
    let images: Vec<ImageCount> = gts
        .iter()
        .map(|(id, g)| ImageCount {
            image_id: id.clone(),
            predicted: dets[id].len(),
            ground_truth: g.len(),
        })
        .collect();
    let p: Vec<usize> = images.iter().map(|c| c.predicted).collect();
    let g: Vec<usize> = images.iter().map(|c| c.ground_truth).collect();
    let (mae, rmse) = mae_rmse(&p, &g)?;
    Ok(EvalSummary {
        images,
        mae,
        rmse,
        ap: None,
    })
}

/// Area under the monotone precision envelope (all-point interpolation).
pub fn average_precision(recall: &[f64], precision: &[f64]) -> f64 {
    let mut r = vec![0.0];
    r.extend_from_slice(recall);
    r.push(1.0);
    let mut p = vec![0.0];
    p.extend_from_slice(precision);
    p.push(0.0);
    for i in (0..p.len() - 1).rev() {
        p[i] = p[i].max(p[i + 1]);
    }
    (0..r.len() - 1).map(|i| (r[i + 1] - r[i]) * p[i + 1]).sum()
}

/// VOC-style AP pooled over all images. A detection is a true positive when
/// its best-overlapping ground truth of the same class reaches `iou_t` and
/// is not already claimed by a higher-scoring detection.
pub fn evaluate_ap(dets: &DetsByImage, gts: &GtByImage, iou_t: f32) -> Result<f64> {
    check_ids(dets, gts)?;
    let total_gt: usize = gts.values().map(Vec::len).sum();
    if total_gt == 0 {
        return Ok(0.0);
    }
    let mut all: Vec<(&String, _)> = dets
        .iter()
        .flat_map(|(id, ds)| ds.iter().map(move |d| (id, *d)))
        .collect();
    all.sort_by(|a, b| detection_order(&a.1, &b.1).then(a.0.cmp(b.0)));

    let mut claimed: std::collections::BTreeMap<&String, Vec<bool>> =
        gts.iter().map(|(id, g)| (id, vec![false; g.len()])).collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut recall = Vec::with_capacity(all.len());
    let mut precision = Vec::with_capacity(all.len());
    for (id, d) in all {
        let mut best: Option<(f32, usize)> = None;
        for (j, g) in gts[id].iter().enumerate() {
            if g.class_id != d.class_id {
                continue;
            }
            let v = iou_unchecked(&d.bbox, &g.bbox);
            if best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, j));
            }
        }
        let flags = claimed.get_mut(id).expect("ids checked");
        match best {
            Some((v, j)) if v >= iou_t && !flags[j] => {
                flags[j] = true;
                tp += 1;
            }
            _ => fp += 1,
        }
        recall.push(tp as f64 / total_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    Ok(average_precision(&recall, &precision))
}
