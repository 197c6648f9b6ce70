//! Offset encoding of boxes relative to priors.

use super::priors::PriorBox;
use crate::boxes::BBox;
use crate::error::{Error, Result};

/// `[(gcx − cx)/(w·v_c), (gcy − cy)/(h·v_c), ln(gw/w)/v_s, ln(gh/h)/v_s]`.
pub fn encode_box(gt: &BBox, prior: &PriorBox, variances: [f32; 2]) -> Result<[f32; 4]> {
    if !(gt.width() > 0.0 && gt.height() > 0.0) {
        return Err(Error::DegenerateBox(gt.xmin, gt.ymin, gt.xmax, gt.ymax));
    }
    let (vc, vs) = (variances[0] as f64, variances[1] as f64);
    let (pcx, pcy, pw, ph) = (prior.cx as f64, prior.cy as f64, prior.w as f64, prior.h as f64);
    let gw = gt.xmax as f64 - gt.xmin as f64;
    let gh = gt.ymax as f64 - gt.ymin as f64;
    let gcx = (gt.xmin as f64 + gt.xmax as f64) / 2.0;
    let gcy = (gt.ymin as f64 + gt.ymax as f64) / 2.0;
    Ok([
        ((gcx - pcx) / (pw * vc)) as f32,
        ((gcy - pcy) / (ph * vc)) as f32,
        ((gw / pw).ln() / vs) as f32,
        ((gh / ph).ln() / vs) as f32,
    ])
}

/// Inverse of [`encode_box`], with corners clamped to `[0, 1]`.
pub fn decode_box(t: &[f32; 4], prior: &PriorBox, variances: [f32; 2]) -> BBox {
    let (vc, vs) = (variances[0] as f64, variances[1] as f64);
    let (pcx, pcy, pw, ph) = (prior.cx as f64, prior.cy as f64, prior.w as f64, prior.h as f64);
    let cx = pcx + t[0] as f64 * vc * pw;
    let cy = pcy + t[1] as f64 * vc * ph;
    let w = pw * (t[2] as f64 * vs).exp();
    let h = ph * (t[3] as f64 * vs).exp();
    let clamp = |v: f64| v.clamp(0.0, 1.0) as f32;
    BBox::new(
        clamp(cx - w / 2.0),
        clamp(cy - h / 2.0),
        clamp(cx + w / 2.0),
        clamp(cy + h / 2.0),
    )
}
