mod common;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shuffledet::analysis::network_cost;
use shuffledet::detect::Detector;
use shuffledet::error::Error;
use shuffledet::graph::plan::OpKind;
use shuffledet::graph::{build_network, NetworkConfig, NetworkPlan, RandomInit, RgbImage, StoreSource, ZeroInit};
use shuffledet::io::WeightStore;
use shuffledet::postprocess::{merge_tiles, run_postprocess, softmax, PostprocessParams, TileWindow};
use shuffledet::ssd::generate_priors;
use shuffledet::tensor::Shape4;

use common::*;

/// Reduced widths and input so full forwards stay cheap.
fn small_cfg() -> NetworkConfig {
    NetworkConfig {
        input_size: 128,
        stage_widths: [12, 48, 96, 192],
        stage_units: [2, 2, 1],
        mincep_widths: [48, 24, 24, 24],
        ..NetworkConfig::default()
    }
}

#[test]
fn default_head_channels() {
    let plan = NetworkPlan::new(&NetworkConfig::default()).unwrap();
    let loc: Vec<usize> = plan.taps.iter().map(|t| t.loc.cout).collect();
    assert_eq!(loc, vec![16, 24, 24, 24, 16, 16, 16]);
    assert_eq!(plan.taps[0].conf.cout, 8);
}

#[test]
fn tap_sizes_halve() {
    for cfg in [NetworkConfig::default(), NetworkConfig::shufflenet_ssd(), small_cfg()] {
        let shapes = NetworkPlan::new(&cfg).unwrap().tap_shapes();
        for p in shapes.windows(2) {
            assert_eq!(p[1].0, (p[0].0 / 2).max(1));
            assert_eq!(p[1].1, (p[0].1 / 2).max(1));
        }
    }
}

#[test]
fn disabling_mincep_leaves_three_taps() {
    let cfg = NetworkConfig {
        mincep_enabled: [false; 4],
        ..NetworkConfig::default()
    };
    assert_eq!(NetworkPlan::new(&cfg).unwrap().taps.len(), 3);
}

#[test]
fn random_build_is_reproducible() {
    let a = build_network(&small_cfg(), &mut RandomInit::new(9)).unwrap();
    let b = build_network(&small_cfg(), &mut RandomInit::new(9)).unwrap();
    let c = build_network(&small_cfg(), &mut RandomInit::new(10)).unwrap();
    assert_eq!(a.params(), b.params());
    assert_ne!(a.params(), c.params());
}

#[test]
fn zero_network_gives_uniform_scores() {
    let cfg = small_cfg();
    let net = build_network(&cfg, &mut ZeroInit).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let out = net.forward(&rand_tensor(&mut rng, Shape4::new(1, 3, 128, 128))).unwrap();
    for logits in out.flat_conf() {
        assert_eq!(softmax(&logits), vec![0.5, 0.5]);
    }
}

#[test]
fn wrong_input_shape_rejected() {
    let net = build_network(&small_cfg(), &mut ZeroInit).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    assert!(net.forward(&rand_tensor(&mut rng, Shape4::new(1, 3, 64, 128))).is_err());
    assert!(net.forward(&rand_tensor(&mut rng, Shape4::new(1, 1, 128, 128))).is_err());
}

#[test]
fn dab_flag_only_touches_its_tap() {
    let mut with = small_cfg();
    with.dab_enabled = [false; 7];
    let without = with.clone();
    with.dab_enabled[2] = true;
    let net_with = build_network(&with, &mut RandomInit::new(5)).unwrap();
    let net_without = build_network(&without, &mut RandomInit::new(5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let img = rand_tensor(&mut rng, Shape4::new(1, 3, 128, 128));
    let a = net_with.forward_detailed(&img).unwrap();
    let b = net_without.forward_detailed(&img).unwrap();
    for i in 0..a.taps.len() {
        assert_eq!(a.taps[i], b.taps[i], "tap feature {i}");
        if i != 2 {
            assert_eq!(a.head_inputs[i], b.head_inputs[i], "head input {i}");
            assert_eq!(a.head.loc[i], b.head.loc[i]);
            assert_eq!(a.head.conf[i], b.head.conf[i]);
        }
    }
    assert_ne!(a.head_inputs[2], b.head_inputs[2]);
    // The untouched channels pass straight through.
    let dab = net_with.plan().taps[2].dab.clone().unwrap();
    assert!(dab.consumed < dab.channels);
    assert_eq!(
        a.head_inputs[2].slice_channels(dab.consumed, dab.channels).unwrap(),
        b.head_inputs[2].slice_channels(dab.consumed, dab.channels).unwrap()
    );
    without.validate().unwrap();
}

#[test]
fn weights_round_trip_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    let cfg = small_cfg();
    let net = build_network(&cfg, &mut RandomInit::new(1)).unwrap();
    net.to_weight_store().unwrap().save(&path).unwrap();
    let store = WeightStore::load(&path).unwrap();
    let loaded = build_network(&cfg, &mut StoreSource::new(&store)).unwrap();
    assert_eq!(loaded.params().len(), net.params().len());
    for (a, b) in loaded.params().iter().zip(net.params()) {
        assert_eq!(a.name, b.name);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.data), bits(&b.data));
    }
}

#[test]
fn weight_store_mismatches_are_distinct_errors() {
    let cfg = small_cfg();
    let net = build_network(&cfg, &mut RandomInit::new(1)).unwrap();
    let params = net.params();

    let mut extra: Vec<(String, Vec<usize>, Vec<f32>)> =
        params.iter().map(|p| (p.name.clone(), p.shape.clone(), p.data.clone())).collect();
    extra.push(("ghost.weight".into(), vec![1], vec![0.0]));
    let store = WeightStore::from_tensors(extra.iter().map(|(n, s, d)| (n.as_str(), s.as_slice(), d.as_slice()))).unwrap();
    let err = build_network(&cfg, &mut StoreSource::new(&store)).unwrap_err();
    assert!(matches!(err, Error::UnknownLayer(ref n) if n == "ghost.weight"), "{err}");

    let store = WeightStore::from_tensors(
        params[1..].iter().map(|p| (p.name.as_str(), p.shape.as_slice(), p.data.as_slice())),
    )
    .unwrap();
    assert!(matches!(build_network(&cfg, &mut StoreSource::new(&store)), Err(Error::MissingWeight(_))));

    // Same names and sizes, but a wider stage-4 expects different shapes.
    let wider = NetworkConfig {
        stage_widths: [12, 48, 96, 240],
        ..cfg.clone()
    };
    let store = net.to_weight_store().unwrap();
    assert!(matches!(build_network(&wider, &mut StoreSource::new(&store)), Err(Error::WeightShape { .. })));
}

#[test]
fn cost_report_covers_every_layer() {
    for cfg in [NetworkConfig::default(), NetworkConfig::shufflenet_ssd(), small_cfg()] {
        let net = build_network(&cfg, &mut ZeroInit).unwrap();
        let report = network_cost(&cfg).unwrap();
        let mut report_params: BTreeMap<&str, u64> = BTreeMap::new();
        for l in &report.layers {
            assert!(report_params.insert(&l.name, l.params).is_none(), "duplicate {}", l.name);
        }
        let mut stored: BTreeMap<String, u64> = BTreeMap::new();
        for p in net.params() {
            let layer = p.name.rsplit_once('.').unwrap().0.to_string();
            *stored.entry(layer).or_default() += p.data.len() as u64;
        }
        for (layer, n) in &stored {
            let reported = *report_params.get(layer.as_str()).unwrap_or_else(|| panic!("{layer} missing"));
            // Batch norm stores running statistics too; only gamma and beta are counted.
            let expected = if layer.ends_with(".bn") { n / 2 } else { *n };
            assert_eq!(reported, expected, "{layer}");
        }
        let with_params: Vec<&str> = report.layers.iter().filter(|l| l.params > 0).map(|l| l.name.as_str()).collect();
        assert_eq!(with_params.len(), stored.len());
        assert_eq!(net.layer_names().len(), stored.len());
    }
}

#[test]
fn report_is_weight_independent() {
    let cfg = small_cfg();
    let a = network_cost(&cfg).unwrap();
    let _ = build_network(&cfg, &mut RandomInit::new(1)).unwrap();
    assert_eq!(a, network_cost(&cfg).unwrap());
}

#[test]
fn stage_one_by_hand() {
    let r = network_cost(&NetworkConfig::default()).unwrap();
    let stage1 = r.stages.iter().find(|s| s.stage == "stage1").unwrap();
    let conv = 2 * 256 * 256 * 24 * 3 * 9;
    let bn = 2 * 24 * 256 * 256;
    let relu = 24 * 256 * 256;
    let pool = 9 * 24 * 128 * 128;
    assert_eq!(stage1.flops, conv + bn + relu + pool);
}

#[test]
fn conv_ops_match_reference_geometry() {
    let plan = NetworkPlan::new(&NetworkConfig::default()).unwrap();
    for op in plan.ops() {
        if let OpKind::Conv(g) = op.kind {
            let expect = (g.in_hw.0 + 2 * g.pad - g.k) / g.stride + 1;
            assert_eq!(g.out_hw.0, expect, "{}", g.name);
        }
    }
}

#[test]
fn single_tile_merge_equals_direct() {
    let cfg = small_cfg();
    let net = build_network(&cfg, &mut RandomInit::new(4)).unwrap();
    let priors = generate_priors(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let head = net.forward(&rand_tensor(&mut rng, Shape4::new(1, 3, 128, 128))).unwrap();
    let params = PostprocessParams::default();
    let direct = run_postprocess(&head, &priors, &params, (128, 128)).unwrap();
    let win = TileWindow {
        x0: 0,
        y0: 0,
        width: 128,
        height: 128,
    };
    assert_eq!(merge_tiles(&[(win, direct.clone())], params.nms_threshold).unwrap(), direct);
}

#[test]
fn tiled_detection_matches_whole_image_when_small() {
    let detector = Detector::new(build_network(&small_cfg(), &mut RandomInit::new(8)).unwrap()).unwrap();
    let px: Vec<u8> = (0..100 * 90 * 3).map(|i| (i * 37 % 251) as u8).collect();
    let img = RgbImage::new(100, 90, px).unwrap();
    assert_eq!(detector.detect(&img).unwrap(), detector.detect_tiled(&img).unwrap());
}

#[test]
fn tiled_detection_boxes_stay_in_image() {
    let detector = Detector::new(build_network(&small_cfg(), &mut RandomInit::new(8)).unwrap()).unwrap();
    let px: Vec<u8> = (0..300 * 200 * 3).map(|i| (i * 13 % 253) as u8).collect();
    let img = RgbImage::new(300, 200, px).unwrap();
    for d in detector.detect_tiled(&img).unwrap() {
        assert!(d.bbox.xmin >= 0.0 && d.bbox.xmax <= 300.0 && d.bbox.ymax <= 200.0);
    }
}
