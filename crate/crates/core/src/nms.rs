//! Greedy non-maximum suppression under skew IoU or circumscribed-rectangle IoU.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::geom::{hrect_iou, skew_iou_prepared, PreparedBox, RotatedBox};

/// Pre-NMS candidate count between anchors and proposals.
pub const PRE_NMS_TOPK: usize = 12_000;
/// Proposals kept after the first NMS.
pub const POST_NMS_TOPK: usize = 1_200;
/// First-stage IoU threshold; the source leaves it unspecified.
pub const PROPOSAL_NMS_IOU: f64 = 0.7;
/// Second-stage IoU threshold; also unspecified upstream.
pub const DETECTION_NMS_IOU: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub boxed: RotatedBox,
    pub score: f64,
    /// Position in the caller's original list.
    pub index: usize,
}

impl ScoredBox {
    pub fn new(boxed: RotatedBox, score: f64, index: usize) -> Self {
        Self {
            boxed,
            score,
            index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmsMode {
    #[default]
    Rotated,
    Hrect,
}

/// Descending score, then ascending original index.
pub fn score_order(a: &ScoredBox, b: &ScoredBox) -> Ordering {
    b.score.total_cmp(&a.score).then(a.index.cmp(&b.index))
}

pub fn topk(items: &[ScoredBox], k: usize) -> Vec<ScoredBox> {
    let mut v = items.to_vec();
    if k < v.len() {
        v.select_nth_unstable_by(k, score_order);
        v.truncate(k);
    }
    v.sort_by(score_order);
    v
}

fn greedy<F>(items: &[ScoredBox], iou_threshold: f64, iou: F) -> Vec<usize>
where
    F: Fn(usize, usize) -> Option<f64>,
{
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| score_order(&items[a], &items[b]));
    let mut suppressed = vec![false; items.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(items[i].index);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && iou(i, j).is_some_and(|v| v > iou_threshold) {
                suppressed[j] = true;
            }
        }
    }
    keep
}

/// Kept `index` values in keep order. Pairs exactly at the threshold both survive.
pub fn rotated_nms(items: &[ScoredBox], iou_threshold: f64) -> Vec<usize> {
    let prepared: Vec<PreparedBox> = items.iter().map(|s| PreparedBox::new(s.boxed)).collect();
    greedy(items, iou_threshold, |i, j| {
        let (a, b) = (&prepared[i], &prepared[j]);
        // disjoint bounds imply zero overlap
        a.hrect()
            .touches(&b.hrect())
            .then(|| skew_iou_prepared(a, b))
    })
}

/// Same greedy loop on the circumscribed rectangles.
pub fn hrect_nms(items: &[ScoredBox], iou_threshold: f64) -> Vec<usize> {
    let rects: Vec<_> = items.iter().map(|s| crate::geom::hrect(&s.boxed)).collect();
    greedy(items, iou_threshold, |i, j| {
        Some(hrect_iou(&rects[i], &rects[j]))
    })
}

pub fn nms(items: &[ScoredBox], iou_threshold: f64, mode: NmsMode) -> Vec<usize> {
    match mode {
        NmsMode::Rotated => rotated_nms(items, iou_threshold),
        NmsMode::Hrect => hrect_nms(items, iou_threshold),
    }
}

/// Top-`pre` by score, suppression, then the first `post` survivors.
pub fn proposal_filter(
    items: &[ScoredBox],
    pre: usize,
    post: usize,
    iou_threshold: f64,
    mode: NmsMode,
) -> Vec<usize> {
    let candidates = topk(items, pre);
    let mut kept = nms(&candidates, iou_threshold, mode);
    kept.truncate(post);
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sb(x: f64, y: f64, w: f64, h: f64, t: f64, score: f64, index: usize) -> ScoredBox {
        ScoredBox::new(RotatedBox::new(x, y, w, h, t).unwrap(), score, index)
    }

    #[test]
    fn topk_basics() {
        let items: Vec<_> = (0..5)
            .map(|i| sb(i as f64 * 10.0, 0.0, 2.0, 2.0, -90.0, 0.5, i))
            .collect();
        assert!(topk(&items, 0).is_empty());
        let t = topk(&items, 3);
        assert_eq!(t.iter().map(|s| s.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        let mut mixed = items.clone();
        mixed[3].score = 0.9;
        let t = topk(&mixed, 10);
        assert_eq!(
            t.iter().map(|s| s.index).collect::<Vec<_>>(),
            vec![3, 0, 1, 2, 4]
        );
    }

    #[test]
    fn nms_simple_cases() {
        let a = sb(0.0, 0.0, 10.0, 10.0, -90.0, 0.9, 0);
        let b = sb(100.0, 0.0, 10.0, 10.0, -90.0, 0.8, 1);
        assert_eq!(rotated_nms(&[a, b], 0.5), vec![0, 1]);
        let c = sb(0.0, 0.0, 10.0, 10.0, -90.0, 0.8, 1);
        assert_eq!(rotated_nms(&[c, a], 0.5), vec![0]);
        assert!(rotated_nms(&[], 0.5).is_empty());
        assert!(hrect_nms(&[], 0.5).is_empty());
    }

    #[test]
    fn parallel_ships_survive_rotated_nms_only() {
        let t = (-45f64).to_radians();
        let a = sb(0.0, 0.0, 10.0, 70.0, -45.0, 0.9, 0);
        let b = sb(12.0 * t.cos(), 12.0 * t.sin(), 10.0, 70.0, -45.0, 0.8, 1);
        assert_eq!(rotated_nms(&[a, b], 0.5), vec![0, 1]);
        assert_eq!(hrect_nms(&[a, b], 0.5), vec![0]);
    }

    #[test]
    fn threshold_is_strict() {
        // IoU of these two is exactly 1/3
        let a = sb(0.0, 0.0, 2.0, 2.0, -90.0, 0.9, 0);
        let b = sb(1.0, 0.0, 2.0, 2.0, -90.0, 0.8, 1);
        let iou = crate::geom::skew_iou(&a.boxed, &b.boxed);
        assert_eq!(rotated_nms(&[a, b], iou), vec![0, 1]);
        assert_eq!(rotated_nms(&[a, b], iou - 1e-12), vec![0]);
    }

    #[test]
    fn higher_threshold_can_keep_fewer() {
        // A-B = 0.6, B-C = B-D = 0.739, C-D = 0.538, A-C = A-D = 0.468.
        // At 0.55 A removes B, so C and D survive; at 0.72 B survives and removes C and D.
        let boxes = [
            sb(0.0, -2.5, 10.0, 10.0, -90.0, 0.9, 0),
            sb(0.0, 0.0, 10.0, 10.0, -90.0, 0.8, 1),
            sb(1.5, 0.0, 10.0, 10.0, -90.0, 0.7, 2),
            sb(-1.5, 0.0, 10.0, 10.0, -90.0, 0.6, 3),
        ];
        assert_eq!(rotated_nms(&boxes, 0.55), vec![0, 2, 3]);
        assert_eq!(rotated_nms(&boxes, 0.72), vec![0, 1]);
    }

    #[test]
    fn proposal_filter_truncates() {
        let items: Vec<_> = (0..50)
            .map(|i| sb(i as f64 * 20.0, 0.0, 5.0, 5.0, -45.0, i as f64 / 50.0, i))
            .collect();
        let kept = proposal_filter(&items, 30, 10, 0.7, NmsMode::Rotated);
        assert_eq!(kept, (40..50).rev().collect::<Vec<_>>());
    }
}
