//! Synthetic workloads and the throughput report behind `rotbox bench`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{skew_iou, RotatedBox};
use crate::nms::{rotated_nms, ScoredBox};

/// Ship-like boxes (aspect 1:1 to 1:9) scattered over a square scene.
pub fn random_boxes(rng: &mut impl Rng, n: usize, scene: f64, max_side: f64) -> Vec<RotatedBox> {
    (0..n)
        .map(|_| {
            let long = rng.random_range(max_side * 0.2..max_side);
            let short = long / rng.random_range(1.0..9.0);
            RotatedBox::new(
                rng.random_range(0.0..scene),
                rng.random_range(0.0..scene),
                short,
                long,
                rng.random_range(-90.0..0.0),
            )
            .expect("positive sides")
        })
        .collect()
}

/// Pairs drawn close enough that most of them overlap.
pub fn overlapping_pairs(rng: &mut impl Rng, n: usize) -> Vec<(RotatedBox, RotatedBox)> {
    (0..n)
        .map(|_| {
            let a = random_boxes(rng, 1, 100.0, 80.0)[0];
            let b = RotatedBox::new(
                a.x() + rng.random_range(-20.0..20.0),
                a.y() + rng.random_range(-20.0..20.0),
                rng.random_range(5.0..40.0),
                rng.random_range(5.0..80.0),
                rng.random_range(-90.0..0.0),
            )
            .expect("positive sides");
            (a, b)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub iou_pairs: usize,
    pub nms_boxes: usize,
    pub nms_iou: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            iou_pairs: 200_000,
            nms_boxes: 10_000,
            nms_iou: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub iou_pairs: usize,
    pub iou_seconds: f64,
    pub iou_pairs_per_second: f64,
    pub nms_boxes: usize,
    pub nms_seconds: f64,
    pub nms_ops_per_second: f64,
    pub nms_kept: usize,
}

pub fn run_bench(cfg: &BenchConfig) -> BenchReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs = overlapping_pairs(&mut rng, cfg.iou_pairs);
    let start = Instant::now();
    let mut sink = 0.0;
    for (a, b) in &pairs {
        sink += skew_iou(a, b);
    }
    let iou_seconds = start.elapsed().as_secs_f64();
    std::hint::black_box(sink);

    // density comparable to a crowded harbour tile
    let boxes = random_boxes(&mut rng, cfg.nms_boxes, 5_000.0, 80.0);
    let items: Vec<ScoredBox> = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| ScoredBox::new(*b, rng.random_range(0.0..1.0), i))
        .collect();
    let start = Instant::now();
    let kept = rotated_nms(&items, cfg.nms_iou);
    let nms_seconds = start.elapsed().as_secs_f64();

    BenchReport {
        iou_pairs: cfg.iou_pairs,
        iou_seconds,
        iou_pairs_per_second: cfg.iou_pairs as f64 / iou_seconds.max(1e-12),
        nms_boxes: cfg.nms_boxes,
        nms_seconds,
        nms_ops_per_second: 1.0 / nms_seconds.max(1e-12),
        nms_kept: kept.len(),
    }
}
