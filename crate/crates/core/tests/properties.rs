mod common;

use proptest::prelude::*;
use rotbox::coder::angle_residual;
use rotbox::geom::{corners, hrect, hrect_iou, intersect_convex, skew_iou};
use rotbox::nms::{hrect_nms, rotated_nms, ScoredBox};
use rotbox::{canonicalize, decode, encode, RotatedBox};

fn any_box() -> impl Strategy<Value = RotatedBox> {
    (
        -200.0..200.0f64,
        -200.0..200.0f64,
        1.0..80.0f64,
        1.0..80.0f64,
        -400.0..400.0f64,
    )
        .prop_map(|(x, y, w, h, t)| RotatedBox::new(x, y, w, h, t).unwrap())
}

fn near_pair() -> impl Strategy<Value = (RotatedBox, RotatedBox)> {
    (
        any_box(),
        -30.0..30.0f64,
        -30.0..30.0f64,
        1.0..80.0f64,
        1.0..80.0f64,
        -90.0..0.0f64,
    )
        .prop_map(|(a, dx, dy, w, h, t)| {
            (a, RotatedBox::new(a.x() + dx, a.y() + dy, w, h, t).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn canonical_theta_range_and_idempotence(b in any_box()) {
        prop_assert!((-90.0..0.0).contains(&b.theta()));
        let again = canonicalize(b.x(), b.y(), b.w(), b.h(), b.theta()).unwrap();
        prop_assert_eq!(again, b);
    }

    #[test]
    fn canonical_form_ignores_representation(b in any_box(), turns in -3i32..3) {
        let half_turns = RotatedBox::new(b.x(), b.y(), b.w(), b.h(), b.theta() + 180.0 * turns as f64).unwrap();
        let quarter = RotatedBox::new(b.x(), b.y(), b.h(), b.w(), b.theta() + 90.0).unwrap();
        for other in [half_turns, quarter] {
            prop_assert_eq!((other.w(), other.h()), (b.w(), b.h()));
            prop_assert!((other.theta() - b.theta()).abs() < 1e-9);
        }
    }

    #[test]
    fn corner_polygon_area(b in any_box()) {
        let a = corners(&b).area();
        prop_assert!((a / (b.w() * b.h()) - 1.0).abs() < 1e-9);
        let r = hrect(&b);
        for p in corners(&b).vertices() {
            prop_assert!(r.contains(*p));
        }
    }

    #[test]
    fn iou_symmetric_and_bounded((a, b) in near_pair()) {
        let ab = skew_iou(&a, &b);
        let ba = skew_iou(&b, &a);
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn intersection_within_circumscribed_overlap((a, b) in near_pair()) {
        let inter = intersect_convex(&corners(&a), &corners(&b)).area();
        prop_assert!(inter <= hrect(&a).intersection_area(&hrect(&b)) + 1e-9);
        prop_assert!(inter <= a.area().min(b.area()) * (1.0 + 1e-12) + 1e-9);
    }

    #[test]
    fn iou_invariant_under_translation_and_quarter_turns(
        (a, b) in near_pair(), dx in -5000.0..5000.0f64, dy in -5000.0..5000.0f64, q in 0u8..4
    ) {
        let base = skew_iou(&a, &b);
        let moved = skew_iou(&a.translated(dx, dy), &b.translated(dx, dy));
        prop_assert!((base - moved).abs() < 1e-9);
        // rotate both about the origin by q·90°: (x, y) -> (-y, x)
        let rot = |r: &RotatedBox| {
            let (mut x, mut y) = (r.x(), r.y());
            for _ in 0..q { (x, y) = (-y, x); }
            RotatedBox::new(x, y, r.w(), r.h(), r.theta() + 90.0 * q as f64).unwrap()
        };
        prop_assert!((base - skew_iou(&rot(&a), &rot(&b))).abs() < 1e-9);
    }

    #[test]
    fn axis_aligned_matches_hrect_iou(
        x in -50.0..50.0f64, y in -50.0..50.0f64, w in 1.0..40.0f64, h in 1.0..40.0f64,
        w2 in 1.0..40.0f64, h2 in 1.0..40.0f64
    ) {
        let a = RotatedBox::new(0.0, 0.0, w, h, -90.0).unwrap();
        let b = RotatedBox::new(x / 4.0, y / 4.0, w2, h2, -90.0).unwrap();
        let s = skew_iou(&a, &b);
        prop_assert!((s - hrect_iou(&hrect(&a), &hrect(&b))).abs() < 1e-12);
        prop_assert!((s - common::axis_aligned_iou(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn coder_round_trip(anchor in any_box(), target in any_box()) {
        let d = encode(&anchor, &target);
        prop_assert!(d.t_theta.abs() <= 45.0);
        let back = decode(&anchor, &d).unwrap();
        // canonical boxes near the -90/0 seam may come back on the other side of it
        prop_assume!(target.theta() > -90.0 + 1e-6 && target.theta() < -1e-6);
        prop_assert!((back.x() - target.x()).abs() < 1e-6);
        prop_assert!((back.y() - target.y()).abs() < 1e-6);
        prop_assert!((back.w() - target.w()).abs() < 1e-6);
        prop_assert!((back.h() - target.h()).abs() < 1e-6);
        prop_assert!((back.theta() - target.theta()).abs() < 1e-6);
    }

    #[test]
    fn residual_equals_minimal_wrap(ta in -90.0..0.0f64, tb in -90.0..0.0f64) {
        let (r, k) = angle_residual(ta, tb);
        let brute = (-3..=3).map(|k| (tb - ta + 90.0 * k as f64).abs()).fold(f64::INFINITY, f64::min);
        prop_assert!((r.abs() - brute).abs() < 1e-12);
        prop_assert!((r - (tb - ta + 90.0 * k as f64)).abs() < 1e-12);
    }

    #[test]
    fn nms_keeps_an_independent_maximal_set(
        boxes in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64, 4.0..30.0f64, 4.0..30.0f64, -90.0..0.0f64, 0.0..1.0f64), 0..40),
        thr in 0.1..0.9f64
    ) {
        let items: Vec<ScoredBox> = boxes.iter().enumerate()
            .map(|(i, &(x, y, w, h, t, s))| ScoredBox::new(RotatedBox::new(x, y, w, h, t).unwrap(), s, i))
            .collect();
        let kept = rotated_nms(&items, thr);
        for (n, &i) in kept.iter().enumerate() {
            for &j in &kept[n + 1..] {
                prop_assert!(skew_iou(&items[i].boxed, &items[j].boxed) <= thr);
            }
        }
        for it in &items {
            if !kept.contains(&it.index) {
                prop_assert!(kept.iter().any(|&k| items[k].score >= it.score
                    && skew_iou(&items[k].boxed, &it.boxed) > thr));
            }
        }
        prop_assert_eq!(rotated_nms(&items, 1.0).len(), items.len());
        let hr = hrect_nms(&items, thr);
        prop_assert_eq!(hr, common::brute_force_nms(&items, thr, |a, b| hrect_iou(&hrect(a), &hrect(b))));
    }
}

#[test]
fn axis_aligned_nms_modes_agree() {
    let items: Vec<ScoredBox> = (0..30)
        .map(|i| {
            let f = i as f64;
            ScoredBox::new(
                RotatedBox::new(
                    (f * 7.3) % 50.0,
                    (f * 3.1) % 40.0,
                    10.0 + f % 5.0,
                    12.0,
                    -90.0,
                )
                .unwrap(),
                ((f * 0.37) % 1.0).abs(),
                i,
            )
        })
        .collect();
    for thr in [0.1, 0.3, 0.5, 0.7] {
        assert_eq!(rotated_nms(&items, thr), hrect_nms(&items, thr));
    }
}

#[test]
fn raster_oracle_examples() {
    let a = RotatedBox::new(0.0, 0.0, 10.0, 70.0, -90.0).unwrap();
    let b = RotatedBox::new(0.0, 0.0, 10.0, 70.0, -75.0).unwrap();
    let est = common::raster_iou(&a, &b, 1000);
    assert!((est - skew_iou(&a, &b)).abs() < 1e-2);
    // unit squares offset by half a side
    let s1 = RotatedBox::new(0.5, 0.5, 1.0, 1.0, -90.0).unwrap();
    let s2 = RotatedBox::new(1.0, 1.0, 1.0, 1.0, -90.0).unwrap();
    let inter = intersect_convex(&corners(&s1), &corners(&s2)).area();
    assert!((inter - 0.25).abs() < 1e-12);
    assert!((common::raster_iou(&s1, &s2, 1000) - 0.25 / 1.75).abs() < 1e-2);
}
