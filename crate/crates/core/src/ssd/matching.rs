use super::priors::PriorSet;
use crate::boxes::{iou_unchecked, BBox};

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Ground-truth index per prior, `None` for background.
    pub matched: Vec<Option<usize>>,
    /// IoU with the matched ground truth, or the best IoU for background priors.
    pub iou: Vec<f32>,
}

impl MatchResult {
    pub fn num_positive(&self) -> usize {
        self.matched.iter().filter(|m| m.is_some()).count()
    }
}

/// Two-step matching.
///
/// First every ground truth claims a prior: the globally best remaining
/// (gt, prior) pair is assigned repeatedly, so two boxes never fight over
/// one prior. Then each unclaimed prior takes the gt it overlaps most if
/// that IoU reaches `threshold`. Ties go to the lower index.
pub fn match_priors(gts: &[BBox], priors: &PriorSet, threshold: f32) -> MatchResult {
    let n = priors.len();
    let corners: Vec<BBox> = priors.boxes.iter().map(|p| p.corners()).collect();
    let overlaps: Vec<Vec<f32>> = gts
        .iter()
        .map(|g| corners.iter().map(|p| iou_unchecked(g, p)).collect())
        .collect();

    let mut matched = vec![None; n];
    let mut iou = vec![0.0f32; n];
    for (p, slot) in iou.iter_mut().enumerate() {
        *slot = overlaps.iter().map(|row| row[p]).fold(0.0, f32::max);
    }

    let mut gt_done = vec![false; gts.len()];
    for _ in 0..gts.len().min(n) {
        let mut best: Option<(f32, usize, usize)> = None;
        for (g, row) in overlaps.iter().enumerate() {
            if gt_done[g] {
                continue;
            }
            for (p, &v) in row.iter().enumerate() {
                if matched[p].is_some() {
                    continue;
                }
                if best.is_none_or(|(bv, _, _)| v > bv) {
                    best = Some((v, g, p));
                }
            }
        }
        let Some((v, g, p)) = best else { break };
        matched[p] = Some(g);
        iou[p] = v;
        gt_done[g] = true;
    }

    for p in 0..n {
        if matched[p].is_some() {
            continue;
        }
        let mut best: Option<(f32, usize)> = None;
        for (g, row) in overlaps.iter().enumerate() {
            if best.is_none_or(|(bv, _)| row[p] > bv) {
                best = Some((row[p], g));
            }
        }
        if let Some((v, g)) = best {
            if v >= threshold {
                matched[p] = Some(g);
                iou[p] = v;
            }
        }
    }
    MatchResult { matched, iou }
}
