//! Runtime oracle checks behind `shuffledet selftest`.
//!
//! Each check compares a production routine against a separate, deliberately
//! naive reference written here.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boxes::{iou_unchecked, BBox};
use crate::graph::NetworkConfig;
use crate::io::mae_rmse;
use crate::ops::{channel_shuffle, conv2d, deformable_conv2d, shuffle_permutation, ConvParams, OffsetField};
use crate::postprocess::{nms, plan_tiles, Detection};
use crate::ssd::{decode_box, encode_box, generate_priors, mine_hard_negatives, PriorBox};
use crate::tensor::{Shape4, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn random_tensor(rng: &mut impl Rng, shape: Shape4) -> Tensor {
    let data = (0..shape.numel()).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    Tensor::from_vec(shape, data).expect("sized")
}

/// Dense convolution by definition, one output at a time, in f64.
pub fn naive_dense_conv(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Tensor {
    let (s, ws) = (x.shape(), w.shape());
    let ho = (s.h + 2 * pad - ws.h) / stride + 1;
    let wo = (s.w + 2 * pad - ws.w) / stride + 1;
    let mut out = Tensor::zeros(Shape4::new(1, ws.n, ho, wo));
    let od = out.data_mut();
    for co in 0..ws.n {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0.0f64;
                for ci in 0..s.c {
                    for ky in 0..ws.h {
                        for kx in 0..ws.w {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= s.h as isize || ix >= s.w as isize {
                                continue;
                            }
                            acc += x.at(0, ci, iy as usize, ix as usize) as f64
                                * w.at(co, ci, ky, kx) as f64;
                        }
                    }
                }
                od[(co * ho + oy) * wo + ox] = acc as f32;
            }
        }
    }
    out
}

/// Expands grouped weights `(Cout, Cin/g, k, k)` to block-diagonal dense ones.
pub fn block_diagonal(w: &Tensor, groups: usize) -> Tensor {
    let s = w.shape();
    let (cin_g, cout_g) = (s.c, s.n / groups);
    let mut dense = Tensor::zeros(Shape4::new(s.n, cin_g * groups, s.h, s.w));
    let dc = cin_g * groups;
    let d = dense.data_mut();
    for co in 0..s.n {
        let g = co / cout_g;
        for ci in 0..cin_g {
            for ky in 0..s.h {
                for kx in 0..s.w {
                    d[((co * dc + g * cin_g + ci) * s.h + ky) * s.w + kx] = w.at(co, ci, ky, kx);
                }
            }
        }
    }
    dense
}

fn grouped_conv(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f32;
    for _ in 0..50 {
        let g = rng.random_range(1..=4);
        let cin_g = rng.random_range(1..=3);
        let cout_g = rng.random_range(1..=3);
        let k = [1, 3][rng.random_range(0..2)];
        let stride = rng.random_range(1..=2);
        let h = rng.random_range(k..=9);
        let w = rng.random_range(k..=9);
        let x = random_tensor(rng, Shape4::new(1, cin_g * g, h, w));
        let wt = random_tensor(rng, Shape4::new(cout_g * g, cin_g, k, k));
        let p = ConvParams::new(wt.clone(), stride, k / 2, g).expect("valid");
        let got = conv2d(&x, &p).expect("conv");
        let want = naive_dense_conv(&x, &block_diagonal(&wt, g), stride, k / 2);
        worst = worst.max(got.max_abs_diff(&want));
    }
    Check {
        name: "grouped conv = block-diagonal dense conv",
        passed: worst < 1e-5,
        detail: format!("max abs error {worst:.2e} over 50 cases"),
    }
}

fn shuffle(rng: &mut ChaCha8Rng) -> Check {
    let base = shuffle_permutation(6, 3).expect("valid");
    let mut bijective = true;
    for _ in 0..50 {
        let g = rng.random_range(1..=6);
        let c = g * rng.random_range(1..=6);
        let x = Tensor::from_vec(Shape4::new(1, c, 1, 1), (0..c).map(|i| i as f32).collect()).expect("sized");
        let mut seen: Vec<f32> = channel_shuffle(&x, g).expect("valid").into_data();
        seen.sort_by(f32::total_cmp);
        bijective &= seen == x.data();
    }
    Check {
        name: "channel shuffle permutation",
        passed: base == [0, 2, 4, 1, 3, 5] && bijective,
        detail: format!("C=6 g=3 -> {base:?}, bijective on 50 random cases: {bijective}"),
    }
}

fn deform_zero(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f32;
    for _ in 0..20 {
        let (c, co) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let (h, w) = (rng.random_range(3..=8), rng.random_range(3..=8));
        let x = random_tensor(rng, Shape4::new(1, c, h, w));
        let wt = random_tensor(rng, Shape4::new(co, c, 3, 3));
        let p = ConvParams::new(wt.clone(), 1, 1, 1).expect("valid");
        let got = deformable_conv2d(&x, &OffsetField::zeros(1, 3, h, w), &p).expect("dconv");
        worst = worst.max(got.max_abs_diff(&naive_dense_conv(&x, &wt, 1, 1)));
    }
    Check {
        name: "deformable conv with zero offsets = conv",
        passed: worst < 1e-5,
        detail: format!("max abs error {worst:.2e} over 20 cases"),
    }
}

/// Greedy suppression by repeated removal: take the best remaining box,
/// drop everything of its class overlapping it too much, repeat.
pub fn brute_force_nms(dets: &[Detection], threshold: f32) -> Vec<Detection> {
    let mut remaining = dets.to_vec();
    let mut kept = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            if crate::postprocess::detection_order(&remaining[i], &remaining[best]).is_lt() {
                best = i;
            }
        }
        let top = remaining.swap_remove(best);
        remaining.retain(|d| d.class_id != top.class_id || iou_unchecked(&d.bbox, &top.bbox) <= threshold);
        kept.push(top);
    }
    kept
}

pub fn random_detection(rng: &mut impl Rng, classes: usize) -> Detection {
    let x = rng.random_range(0.0f32..90.0);
    let y = rng.random_range(0.0f32..90.0);
    Detection {
        class_id: rng.random_range(1..=classes),
        // Coarse scores so ties actually occur.
        score: rng.random_range(1..=20) as f32 / 20.0,
        bbox: BBox::new(x, y, x + rng.random_range(1.0f32..30.0), y + rng.random_range(1.0f32..30.0)),
    }
}

fn nms_check(rng: &mut ChaCha8Rng) -> Check {
    let mut failures = 0;
    for _ in 0..200 {
        let n = rng.random_range(0..=64);
        let dets: Vec<Detection> = (0..n).map(|_| random_detection(rng, 2)).collect();
        let t = rng.random_range(0.1f32..0.7);
        if nms(&dets, t) != brute_force_nms(&dets, t) {
            failures += 1;
        }
    }
    Check {
        name: "NMS = brute-force reference",
        passed: failures == 0,
        detail: format!("{failures} mismatches over 200 random sets"),
    }
}

fn coding(rng: &mut ChaCha8Rng) -> Check {
    let mut worst = 0.0f32;
    for _ in 0..1000 {
        let (x0, y0) = (rng.random_range(0.0f32..0.8), rng.random_range(0.0f32..0.8));
        let gt = BBox::new(x0, y0, x0 + rng.random_range(0.01f32..0.2), y0 + rng.random_range(0.01f32..0.2));
        let prior = PriorBox {
            cx: rng.random_range(0.0f32..1.0),
            cy: rng.random_range(0.0f32..1.0),
            w: rng.random_range(0.02f32..0.5),
            h: rng.random_range(0.02f32..0.5),
        };
        let t = encode_box(&gt, &prior, [0.1, 0.2]).expect("valid gt");
        let back = decode_box(&t, &prior, [0.1, 0.2]);
        for (a, b) in [(back.xmin, gt.xmin), (back.ymin, gt.ymin), (back.xmax, gt.xmax), (back.ymax, gt.ymax)] {
            worst = worst.max((a - b).abs());
        }
    }
    Check {
        name: "box encode/decode round trip",
        passed: worst < 1e-6,
        detail: format!("max corner error {worst:.2e} over 1000 pairs"),
    }
}

fn priors() -> Check {
    let cfg = NetworkConfig::default();
    let set = generate_priors(&cfg).expect("default config");
    // Walk the tap grids cell by cell.
    let mut walked = 0usize;
    let mut size = cfg.input_size / 8;
    for slot in cfg.active_slots() {
        for _row in 0..size {
            for _col in 0..size {
                walked += cfg.boxes_per_location[slot];
            }
        }
        size = (size / 2).max(1);
    }
    Check {
        name: "prior count = grid enumeration",
        passed: walked == set.len(),
        detail: format!("generated {}, enumerated {walked}", set.len()),
    }
}

fn tiles() -> Check {
    let (w, h) = (5616usize, 3744usize);
    let windows = plan_tiles(w, h, 512, 100).expect("valid");
    let mut cover = vec![0u8; w * h];
    for win in &windows {
        for y in win.y0..win.y0 + win.height {
            for c in &mut cover[y * w + win.x0..y * w + win.x0 + win.width] {
                *c = c.saturating_add(1);
            }
        }
    }
    let uncovered = cover.iter().filter(|&&c| c == 0).count();
    let full_size = windows.iter().all(|t| t.width == 512 && t.height == 512);
    Check {
        name: "tile coverage 5616x3744",
        passed: uncovered == 0 && full_size,
        detail: format!("{} windows, {uncovered} uncovered pixels", windows.len()),
    }
}

fn mining(rng: &mut ChaCha8Rng) -> Check {
    let mut failures = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..200);
        let positive: Vec<bool> = (0..n).map(|_| rng.random_bool(0.1)).collect();
        let loss: Vec<f32> = (0..n).map(|_| rng.random_range(0..50) as f32).collect();
        let got = mine_hard_negatives(&loss, &positive, 3);
        let mut all: Vec<(f32, usize)> = (0..n).filter(|&i| !positive[i]).map(|i| (-loss[i], i)).collect();
        all.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let num_pos = positive.iter().filter(|&&p| p).count();
        let want: Vec<usize> = all.iter().take(3 * num_pos).map(|&(_, i)| i).collect();
        if got != want {
            failures += 1;
        }
    }
    Check {
        name: "hard negative mining = full sort",
        passed: failures == 0,
        detail: format!("{failures} mismatches over 100 cases"),
    }
}

fn metrics() -> Check {
    let a = mae_rmse(&[3, 5], &[4, 4]).ok();
    let b = mae_rmse(&[2, 6], &[4, 4]).ok();
    Check {
        name: "MAE / RMSE hand cases",
        passed: a == Some((1.0, 1.0)) && b == Some((2.0, 2.0)),
        detail: format!("{a:?} {b:?}"),
    }
}

pub fn run_all(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        grouped_conv(&mut rng),
        shuffle(&mut rng),
        deform_zero(&mut rng),
        nms_check(&mut rng),
        coding(&mut rng),
        priors(),
        tiles(),
        mining(&mut rng),
        metrics(),
    ]
}
