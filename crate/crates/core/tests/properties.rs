mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shuffledet::blocks::even_split;
use shuffledet::boxes::{iou, BBox};
use shuffledet::io::mae_rmse;
use shuffledet::ops::{bilinear_sample, channel_shuffle, conv2d, shuffle_permutation, ConvParams};
use shuffledet::postprocess::{nms, plan_tiles, Detection};
use shuffledet::ssd::{decode_box, encode_box, mine_hard_negatives, PriorBox};
use shuffledet::tensor::Shape4;

use common::*;

const VAR: [f32; 2] = [0.1, 0.2];

fn bbox() -> impl Strategy<Value = BBox> {
    (0.0f32..80.0, 0.0f32..80.0, 0.5f32..40.0, 0.5f32..40.0).prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h))
}

fn detection() -> impl Strategy<Value = Detection> {
    (1usize..=2, 1u8..=10, bbox()).prop_map(|(class_id, s, bbox)| Detection {
        class_id,
        score: s as f32 / 10.0,
        bbox,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shuffle_is_a_bijection(groups in 1usize..6, per in 1usize..8) {
        let c = groups * per;
        let mut p = shuffle_permutation(c, groups).unwrap();
        p.sort_unstable();
        prop_assert_eq!(p, (0..c).collect::<Vec<_>>());
    }

    #[test]
    fn shuffle_inverted_by_transposed_shuffle(groups in 1usize..5, per in 1usize..5, seed: u64) {
        let c = groups * per;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, Shape4::new(1, c, 3, 2));
        let back = channel_shuffle(&channel_shuffle(&x, groups).unwrap(), per).unwrap();
        prop_assert_eq!(back, x);
    }

    #[test]
    fn shuffle_rejects_indivisible(groups in 2usize..6, per in 1usize..6, extra in 1usize..6) {
        prop_assume!(extra % groups != 0);
        prop_assert!(shuffle_permutation(groups * per + extra, groups).is_err());
    }

    #[test]
    fn grouped_conv_equals_block_diagonal_dense(
        groups in 1usize..4, cin_g in 1usize..4, cout_g in 1usize..4,
        k in prop::sample::select(vec![1usize, 3]), stride in 1usize..3, seed: u64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rand_tensor(&mut rng, Shape4::new(1, groups * cin_g, 7, 6));
        let w = rand_tensor(&mut rng, Shape4::new(groups * cout_g, cin_g, k, k));
        let pad = k / 2;
        let got = conv2d(&x, &ConvParams::new(w.clone(), stride, pad, groups).unwrap()).unwrap();
        let want = conv_ref(&x, &block_diag(&w, groups), None, stride, pad);
        prop_assert_eq!(got.shape(), want.shape());
        prop_assert!(got.max_abs_diff(&want) < 1e-5);
    }

    #[test]
    fn encode_decode_round_trip(
        cx in 0.2f32..0.8, cy in 0.2f32..0.8, w in 0.05f32..0.3, h in 0.05f32..0.3,
        pw in 0.05f32..0.5, ph in 0.05f32..0.5, dx in -0.1f32..0.1, dy in -0.1f32..0.1,
    ) {
        let gt = BBox::from_center(cx, cy, w, h);
        let prior = PriorBox { cx: cx + dx, cy: cy + dy, w: pw, h: ph };
        let back = decode_box(&encode_box(&gt, &prior, VAR).unwrap(), &prior, VAR);
        for (a, b) in [(back.xmin, gt.xmin), (back.ymin, gt.ymin), (back.xmax, gt.xmax), (back.ymax, gt.ymax)] {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn decode_stays_in_unit_square(t in prop::array::uniform4(-20.0f32..20.0), cx in 0.0f32..1.0, cy in 0.0f32..1.0) {
        let b = decode_box(&t, &PriorBox { cx, cy, w: 0.3, h: 0.2 }, VAR);
        for v in [b.xmin, b.ymin, b.xmax, b.ymax] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(b.xmin <= b.xmax && b.ymin <= b.ymax);
    }

    #[test]
    fn iou_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let ab = iou(&a, &b).unwrap();
        prop_assert_eq!(ab, iou(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - iou_ref(&a, &b)).abs() < 1e-6);
        prop_assert!((iou(&a, &a).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nms_matches_reference(dets in prop::collection::vec(detection(), 0..40), t in 0.1f32..0.9) {
        prop_assert_eq!(nms(&dets, t), nms_ref(&dets, t));
    }

    #[test]
    fn nms_ignores_input_order(dets in prop::collection::vec(detection(), 0..40), seed: u64) {
        use rand::seq::SliceRandom;
        let mut shuffled = dets.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(nms(&dets, 0.45), nms(&shuffled, 0.45));
    }

    #[test]
    fn nms_survivors_do_not_overlap(dets in prop::collection::vec(detection(), 0..40)) {
        let kept = nms(&dets, 0.45);
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                prop_assert!(a.class_id != b.class_id || iou_ref(&a.bbox, &b.bbox) <= 0.45);
            }
        }
        let again = nms(&kept, 0.45);
        prop_assert_eq!(again, kept);
    }

    #[test]
    fn mae_never_exceeds_rmse(pairs in prop::collection::vec((0usize..50, 0usize..50), 1..30)) {
        let (p, g): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let (mae, rmse) = mae_rmse(&p, &g).unwrap();
        let (mae_r, rmse_r) = mae_rmse_ref(&p, &g);
        prop_assert!(mae <= rmse + 1e-12);
        prop_assert!((mae - mae_r).abs() < 1e-9 && (rmse - rmse_r).abs() < 1e-9);
    }

    #[test]
    fn tiles_cover_every_pixel(w in 1usize..1400, h in 1usize..1100) {
        let tiles = plan_tiles(w, h, 512, 100).unwrap();
        for t in &tiles {
            prop_assert!(t.x0 + t.width <= w && t.y0 + t.height <= h);
            prop_assert_eq!(t.width, w.min(512));
            prop_assert_eq!(t.height, h.min(512));
        }
        prop_assert!(raster_coverage(w, h, &tiles).iter().all(|&c| c >= 1));
        let mut xs: Vec<usize> = tiles.iter().map(|t| t.x0).collect();
        xs.sort_unstable();
        xs.dedup();
        for p in xs.windows(2) {
            prop_assert!(p[0] + 512 - p[1] >= 100);
        }
    }

    #[test]
    fn even_split_is_balanced(total in 0usize..2000, parts in 1usize..8) {
        let s = even_split(total, parts);
        prop_assert_eq!(s.len(), parts);
        prop_assert_eq!(s.iter().sum::<usize>(), total);
        prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        prop_assert!(s.windows(2).all(|p| p[0] >= p[1]));
    }

    #[test]
    fn mining_picks_hardest_negatives(
        cells in prop::collection::vec((0u8..20, prop::bool::weighted(0.15)), 1..200),
    ) {
        let loss: Vec<f32> = cells.iter().map(|c| c.0 as f32 / 4.0).collect();
        let positive: Vec<bool> = cells.iter().map(|c| c.1).collect();
        let got = mine_hard_negatives(&loss, &positive, 3);
        let num_pos = positive.iter().filter(|&&p| p).count();
        let negatives = positive.len() - num_pos;
        prop_assert_eq!(got.len(), (3 * num_pos).min(negatives));
        prop_assert!(got.iter().all(|&i| !positive[i]));
        // Stable sort by loss descending keeps lower indices first on ties.
        prop_assert_eq!(&got, &mine_ref(&loss, &positive));
        if let Some(&weakest) = got.last() {
            for i in (0..loss.len()).filter(|i| !positive[*i] && !got.contains(i)) {
                prop_assert!(loss[i] <= loss[weakest]);
            }
        }
    }

    #[test]
    fn bilinear_is_linear_between_grid_points(
        plane in prop::collection::vec(-1.0f32..1.0, 30), y in 0usize..5, x in 0usize..5, t in 0.0f32..1.0,
    ) {
        let (h, w) = (5, 6);
        let at = |yy: f32, xx: f32| bilinear_sample(&plane, h, w, yy, xx);
        let (yf, xf) = (y as f32, x as f32);
        let lerp = (1.0 - t) * at(yf, xf) + t * at(yf, xf + 1.0);
        prop_assert!((at(yf, xf + t) - lerp).abs() < 1e-5);
        prop_assert_eq!(at(yf, xf), plane[y * w + x]);
    }
}
