use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use pseudobox_core::formats::{
    load_config, parse_dota, parse_points, read_cpm, write_cpm, write_dota, write_points,
    ClassTable, DotaInstance,
};
use pseudobox_core::geometry::OrientedBox;
use pseudobox_core::metrics::{miou, perturb_points};
use pseudobox_core::synth::{generate_scene, Density, SceneParams};
use pseudobox_core::{ClassProbabilityMap, PointAnnotation};

fn table() -> ClassTable {
    ClassTable::new(["plane", "ship", "small-vehicle"]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cpm_bytes_round_trip(
        n_class in 1usize..4, w in 1usize..12, h in 1usize..12, stride in 1u32..9,
        seed in prop::collection::vec(0.0..=1.0f32, 4 * 12 * 12),
    ) {
        let values = seed[..n_class * w * h].to_vec();
        let m = ClassProbabilityMap::new(n_class, w, h, stride, values).unwrap();
        prop_assert_eq!(read_cpm(&write_cpm(&m)).unwrap(), m);
    }

    #[test]
    fn dota_text_round_trip(
        boxes in prop::collection::vec(
            (0.0..1000.0f64, 0.0..1000.0f64, 2.0..200.0f64, 2.0..200.0f64, -FRAC_PI_2..FRAC_PI_2, 0usize..3),
            0..10,
        ),
    ) {
        let t = table();
        let inst: Vec<DotaInstance> = boxes
            .iter()
            .map(|&(cx, cy, w, h, a, c)| {
                DotaInstance::from_box(&OrientedBox::new(cx, cy, w, h, a).unwrap(), t.name(c).unwrap())
            })
            .collect();
        let text = write_dota(&inst);
        let back = parse_dota(&text).unwrap();
        prop_assert_eq!(back.len(), inst.len());
        for (a, b) in inst.iter().zip(&back) {
            prop_assert_eq!(&a.category, &b.category);
            for (p, q) in a.corners.0.iter().zip(&b.corners.0) {
                // Six significant digits.
                prop_assert!((p.x - q.x).abs() <= 5e-6 * p.x.abs().max(1.0));
                prop_assert!((p.y - q.y).abs() <= 5e-6 * p.y.abs().max(1.0));
            }
        }
        prop_assert_eq!(write_dota(&back), text);
    }

    #[test]
    fn point_text_round_trip(
        pts in prop::collection::vec((-1e4..1e4f64, -1e4..1e4f64, 0usize..3), 0..20),
    ) {
        let t = table();
        let pts: Vec<_> = pts.into_iter().map(|(x, y, c)| PointAnnotation::new(x, y, c)).collect();
        prop_assert_eq!(parse_points(&write_points(&pts, &t).unwrap(), &t).unwrap(), pts);
    }

    #[test]
    fn miou_ignores_pair_order(
        pairs in prop::collection::vec(
            (10.0..90.0f64, 10.0..90.0f64, 5.0..30.0f64, -5.0..5.0f64, 0usize..3),
            1..15,
        ),
        rot in 0usize..15,
    ) {
        let gt: Vec<_> = pairs
            .iter()
            .map(|&(x, y, s, _, c)| (OrientedBox::new(x, y, s, s / 2.0, 0.3).unwrap(), c))
            .collect();
        let pseudo: Vec<_> = pairs
            .iter()
            .map(|&(x, y, s, d, c)| (OrientedBox::new(x + d, y, s, s / 2.0, 0.2).unwrap(), c))
            .collect();
        let k = rot % pairs.len();
        let (mut g2, mut p2) = (gt.clone(), pseudo.clone());
        g2.rotate_left(k);
        p2.rotate_left(k);
        let a = miou(&pseudo, &gt).unwrap();
        let b = miou(&p2, &g2).unwrap();
        prop_assert!((a.mean - b.mean).abs() < 1e-12);
    }
}

#[test]
fn class_mean_not_instance_mean() {
    let unit = OrientedBox::new(0.0, 0.0, 10.0, 10.0, 0.0).unwrap();
    // Shifts chosen so the IoUs are exactly 0.8 and 0.2 on a 10x10 square.
    let shift = |iou: f64| {
        let overlap = 20.0 * iou / (1.0 + iou);
        OrientedBox::new(10.0 - overlap, 0.0, 10.0, 10.0, 0.0).unwrap()
    };
    let mut pseudo = vec![(shift(0.2), 0); 99];
    let mut gt = vec![(unit, 0); 99];
    pseudo.push((shift(0.8), 1));
    gt.push((unit, 1));
    let r = miou(&pseudo, &gt).unwrap();
    assert!((r.per_class[&0].mean_iou - 0.2).abs() < 1e-9);
    assert!((r.mean - 0.5).abs() < 1e-9);
}

#[test]
fn larger_sigma_moves_points_further() {
    let boxes: Vec<_> = (0..50)
        .map(|i| OrientedBox::new(100.0 + i as f64, 200.0, 30.0, 10.0, 0.0).unwrap())
        .collect();
    let pts: Vec<_> = boxes.iter().map(|b| PointAnnotation::new(b.cx, b.cy, 0)).collect();
    let max_shift = |sigma: f64| {
        (0..20u64)
            .flat_map(|seed| {
                perturb_points(&pts, &boxes, sigma, seed, (1000.0, 1000.0))
                    .unwrap()
                    .into_iter()
                    .zip(&pts)
                    .map(|(a, b)| a.point().distance(b.point()))
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    };
    let (a, b, c) = (max_shift(0.0), max_shift(0.1), max_shift(0.2));
    assert_eq!(a, 0.0);
    assert!(a < b && b < c, "{a} {b} {c}");
    assert!(c <= 0.2 * 300f64.sqrt() + 1e-9);
}

#[test]
fn scenes_are_reproducible() {
    let p = SceneParams { seed: 42, ..Default::default() };
    assert_eq!(generate_scene(&p).unwrap(), generate_scene(&p).unwrap());
    let q = SceneParams { seed: 43, ..Default::default() };
    assert_ne!(generate_scene(&p).unwrap(), generate_scene(&q).unwrap());
}

#[test]
fn rows_are_evenly_spaced() {
    let p = SceneParams {
        density: Density::ParallelRows { rows: 2, cols: 5, gap: 16.0 },
        ..Default::default()
    };
    let s = generate_scene(&p).unwrap();
    assert_eq!(s.instances.len(), 10);
    let w = s.instances[0].bbox.w;
    for pair in s.instances[..5].windows(2) {
        let d = pair[0].bbox.center().distance(pair[1].bbox.center());
        assert!((d - (w + 16.0)).abs() < 1e-9, "{d}");
    }
}

#[test]
fn config_text_round_trip() {
    let c = load_config("seed = 9\nsample_mode = probabilistic\nstride = 8\nrows = 3\n").unwrap();
    assert_eq!(load_config(&c.to_text()).unwrap(), c);
    assert!(load_config("seed = 1\nseed = 2\n").is_err());
    assert!(load_config("grid_size = 4\n").is_err());
}
