//! Default boxes.

use crate::boxes::BBox;
use crate::error::{Error, Result};
use crate::graph::{NetworkConfig, NetworkPlan};

/// Centre-form prior, normalised to the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorBox {
    pub cx: f32,
    pub cy: f32,
    pub w: f32,
    pub h: f32,
}

impl PriorBox {
    pub fn corners(&self) -> BBox {
        BBox::from_center(self.cx, self.cy, self.w, self.h)
    }
}

/// Priors in tap-major, then row-major, then box order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    pub boxes: Vec<PriorBox>,
    pub per_tap: Vec<usize>,
    /// `s_1 ..= s_m`.
    pub scales: Vec<f64>,
}

impl PriorSet {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Linear scale schedule from `s_min` to `s_max` over `m` taps.
pub fn scale_schedule(m: usize, s_min: f64, s_max: f64) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 taps for scales, got {m}")));
    }
    Ok((0..m)
        .map(|k| {
            let t = k as f64 / (m - 1) as f64;
            s_min * (1.0 - t) + s_max * t
        })
        .collect())
}

/// `(w, h)` of the boxes at one cell: ratio 1, the extra ratio-1 box at
/// `sqrt(s_k · s_{k+1})`, then ratios 2, 1/2 and, for six boxes, 3, 1/3.
pub fn cell_box_sizes(s_k: f64, s_next: f64, boxes: usize) -> Result<Vec<(f64, f64)>> {
    if ![2, 4, 6].contains(&boxes) {
        return Err(Error::InvalidArgument(format!("boxes per location must be 2, 4 or 6, got {boxes}")));
    }
    let mut out = vec![(s_k, s_k)];
    let extra = (s_k * s_next).sqrt();
    out.push((extra, extra));
    for r in [2.0f64, 3.0].into_iter().take((boxes - 2) / 2) {
        out.push((s_k * r.sqrt(), s_k / r.sqrt()));
        out.push((s_k / r.sqrt(), s_k * r.sqrt()));
    }
    Ok(out)
}

pub fn generate_priors_for(
    tap_shapes: &[(usize, usize)],
    boxes: &[usize],
    s_min: f64,
    s_max: f64,
) -> Result<PriorSet> {
    if tap_shapes.len() != boxes.len() {
        return Err(Error::Shape("one box count per tap required".into()));
    }
    let scales = scale_schedule(tap_shapes.len(), s_min, s_max)?;
    let mut out = PriorSet {
        boxes: Vec::new(),
        per_tap: Vec::new(),
        scales: scales.clone(),
    };
    for (k, (&(h, w), &b)) in tap_shapes.iter().zip(boxes).enumerate() {
        let s_next = scales.get(k + 1).copied().unwrap_or(1.0);
        let sizes = cell_box_sizes(scales[k], s_next, b)?;
        for i in 0..h {
            let cy = ((i as f64 + 0.5) / h as f64).clamp(0.0, 1.0);
            for j in 0..w {
                let cx = ((j as f64 + 0.5) / w as f64).clamp(0.0, 1.0);
                for &(bw, bh) in &sizes {
                    out.boxes.push(PriorBox {
                        cx: cx as f32,
                        cy: cy as f32,
                        w: bw as f32,
                        h: bh as f32,
                    });
                }
            }
        }
        out.per_tap.push(h * w * b);
    }
    Ok(out)
}

pub fn generate_priors(cfg: &NetworkConfig) -> Result<PriorSet> {
    let plan = NetworkPlan::new(cfg)?;
    generate_priors_for(&plan.tap_shapes(), &plan.boxes_per_tap(), cfg.s_min, cfg.s_max)
}
