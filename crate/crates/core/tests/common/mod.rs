//! Reference implementations used as test oracles. Written for clarity, not
//! speed, and independent of the library's kernels.

#![allow(dead_code)]

use rand::Rng;
use shuffledet::boxes::BBox;
use shuffledet::postprocess::{Detection, TileWindow};
use shuffledet::tensor::{Shape4, Tensor};

pub fn rand_tensor(rng: &mut impl Rng, shape: Shape4) -> Tensor {
    Tensor::from_vec(shape, (0..shape.numel()).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
}

/// Dense conv straight from the definition, accumulated in f64.
pub fn conv_ref(x: &Tensor, w: &Tensor, bias: Option<&[f32]>, stride: usize, pad: usize) -> Tensor {
    let (s, k) = (x.shape(), w.shape());
    let ho = (s.h + 2 * pad - k.h) / stride + 1;
    let wo = (s.w + 2 * pad - k.w) / stride + 1;
    let mut out = Vec::with_capacity(k.n * ho * wo);
    for co in 0..k.n {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = bias.map_or(0.0, |b| b[co] as f64);
                for ci in 0..s.c {
                    for ky in 0..k.h {
                        for kx in 0..k.w {
                            let y = (oy * stride + ky) as i64 - pad as i64;
                            let xx = (ox * stride + kx) as i64 - pad as i64;
                            if y >= 0 && xx >= 0 && (y as usize) < s.h && (xx as usize) < s.w {
                                acc += x.at(0, ci, y as usize, xx as usize) as f64 * w.at(co, ci, ky, kx) as f64;
                            }
                        }
                    }
                }
                out.push(acc as f32);
            }
        }
    }
    Tensor::from_vec(Shape4::new(1, k.n, ho, wo), out).unwrap()
}

/// Grouped weights `(Cout, Cin/g, k, k)` embedded block-diagonally in a dense kernel.
pub fn block_diag(w: &Tensor, groups: usize) -> Tensor {
    let s = w.shape();
    let cout_g = s.n / groups;
    let cin = s.c * groups;
    let mut data = vec![0.0f32; s.n * cin * s.h * s.w];
    for co in 0..s.n {
        let g = co / cout_g;
        for ci in 0..s.c {
            for ky in 0..s.h {
                for kx in 0..s.w {
                    data[((co * cin + g * s.c + ci) * s.h + ky) * s.w + kx] = w.at(co, ci, ky, kx);
                }
            }
        }
    }
    Tensor::from_vec(Shape4::new(s.n, cin, s.h, s.w), data).unwrap()
}

pub fn iou_ref(a: &BBox, b: &BBox) -> f32 {
    let ix = (a.xmax.min(b.xmax) - a.xmin.max(b.xmin)).max(0.0);
    let iy = (a.ymax.min(b.ymax) - a.ymin.max(b.ymin)).max(0.0);
    let inter = ix * iy;
    let union = (a.xmax - a.xmin) * (a.ymax - a.ymin) + (b.xmax - b.xmin) * (b.ymax - b.ymin) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Ranking key: score descending, then corners, then class.
fn better(a: &Detection, b: &Detection) -> bool {
    let ka = (-a.score, a.bbox.xmin, a.bbox.ymin, a.bbox.xmax, a.bbox.ymax, a.class_id as f32);
    let kb = (-b.score, b.bbox.xmin, b.bbox.ymin, b.bbox.xmax, b.bbox.ymax, b.class_id as f32);
    ka.partial_cmp(&kb).unwrap().is_lt()
}

/// O(n²) greedy NMS: repeatedly take the best remaining detection and
/// discard same-class detections overlapping it beyond the threshold.
pub fn nms_ref(dets: &[Detection], t: f32) -> Vec<Detection> {
    let mut alive = vec![true; dets.len()];
    let mut out = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for i in 0..dets.len() {
            if alive[i] && best.is_none_or(|b| better(&dets[i], &dets[b])) {
                best = Some(i);
            }
        }
        let Some(b) = best else { break };
        alive[b] = false;
        for i in 0..dets.len() {
            if alive[i] && dets[i].class_id == dets[b].class_id && iou_ref(&dets[i].bbox, &dets[b].bbox) > t {
                alive[i] = false;
            }
        }
        out.push(dets[b]);
    }
    out
}

pub fn rand_det(rng: &mut impl Rng) -> Detection {
    let x = rng.random_range(0.0f32..100.0);
    let y = rng.random_range(0.0f32..100.0);
    Detection {
        class_id: rng.random_range(1..=2),
        score: rng.random_range(1..=10) as f32 / 10.0,
        bbox: BBox::new(x, y, x + rng.random_range(2.0f32..40.0), y + rng.random_range(2.0f32..40.0)),
    }
}

/// Priors counted by visiting every cell of every tap grid.
pub fn enumerate_priors(tap_shapes: &[(usize, usize)], boxes: &[usize]) -> usize {
    let mut n = 0;
    for (&(h, w), &b) in tap_shapes.iter().zip(boxes) {
        for _ in 0..h {
            for _ in 0..w {
                for _ in 0..b {
                    n += 1;
                }
            }
        }
    }
    n
}

/// Per-pixel window count.
pub fn raster_coverage(width: usize, height: usize, windows: &[TileWindow]) -> Vec<u16> {
    let mut cover = vec![0u16; width * height];
    for t in windows {
        for y in t.y0..t.y0 + t.height {
            for x in t.x0..t.x0 + t.width {
                cover[y * width + x] += 1;
            }
        }
    }
    cover
}

/// Indices of the top `3·num_pos` negatives by loss via a full stable sort.
pub fn mine_ref(loss: &[f32], positive: &[bool]) -> Vec<usize> {
    let num_pos = positive.iter().filter(|&&p| p).count();
    let mut idx: Vec<usize> = (0..loss.len()).filter(|&i| !positive[i]).collect();
    idx.sort_by(|&a, &b| loss[b].partial_cmp(&loss[a]).unwrap());
    idx.into_iter().take(3 * num_pos).collect()
}

pub fn mae_rmse_ref(p: &[usize], g: &[usize]) -> (f64, f64) {
    let n = p.len() as f64;
    let mae = p.iter().zip(g).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum::<f64>() / n;
    let mse = p.iter().zip(g).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum::<f64>() / n;
    (mae, mse.sqrt())
}

/// Hand FLOP count of one DAB over a tap of `c` channels at `hw` positions,
/// consuming `portion` of them and narrowing to `ceil(c'/5)` inside.
pub fn dab_flops_ref(c: usize, hw: usize, portion: f64) -> u64 {
    let cp = (c as f64 * portion).round() as u64;
    let mid = (cp as f64 / 5.0).ceil() as u64;
    let hw = hw as u64;
    let conv1 = 2 * hw * mid * cp;
    let bn1 = 2 * mid * hw;
    let offset = 2 * hw * 18 * cp * 9;
    let dconv = 2 * hw * cp * mid * 9;
    let sampling = 8 * 9 * mid * hw;
    let bn2 = 2 * cp * hw;
    let add = cp * hw;
    let relu = cp * hw;
    conv1 + bn1 + offset + dconv + sampling + bn2 + add + relu
}
