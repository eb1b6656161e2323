//! Recall / precision / F-measure with greedy one-to-one matching.
//!
//! Per image, detections at or above the score threshold are visited in
//! descending score and each claims the unmatched ground truth it overlaps
//! most, provided that overlap reaches the IoU threshold. Anything else is a
//! false positive, unless it overlaps an ignore region by the IoU threshold,
//! in which case it is dropped from the count.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::geom::{hrect, hrect_iou, skew_iou, RotatedBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Rotated,
    /// IoU of the horizontal circumscribed rectangles.
    Circumscribed,
}

impl Criterion {
    pub fn iou(self, a: &RotatedBox, b: &RotatedBox) -> f64 {
        match self {
            Criterion::Rotated => skew_iou(a, b),
            Criterion::Circumscribed => hrect_iou(&hrect(a), &hrect(b)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub score_threshold: f64,
    pub criterion: Criterion,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            score_threshold: 0.5,
            criterion: Criterion::Rotated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(flatten)]
    pub boxed: RotatedBox,
    pub score: f64,
}

impl Detection {
    pub fn new(boxed: RotatedBox, score: f64) -> Self {
        Self { boxed, score }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImageId {
    Num(u64),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalImage {
    pub id: ImageId,
    #[serde(default)]
    pub gts: Vec<RotatedBox>,
    #[serde(default)]
    pub dets: Vec<Detection>,
    /// Unlabelled regions: unmatched detections on them are neither TP nor FP.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ignore: Vec<RotatedBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub recall: f64,
    pub precision: f64,
    pub f_measure: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    #[serde(default)]
    pub pr_curve: Vec<PrPoint>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

/// Descending score; equal scores fall back to the box parameters so input order never matters.
fn det_order(a: &Detection, b: &Detection) -> Ordering {
    b.score.total_cmp(&a.score).then(a.boxed.key_cmp(&b.boxed))
}

fn evaluate_image(img: &EvalImage, cfg: &EvalConfig) -> Counts {
    let mut dets: Vec<&Detection> = img
        .dets
        .iter()
        .filter(|d| d.score >= cfg.score_threshold)
        .collect();
    dets.sort_by(|a, b| det_order(a, b));
    let mut matched = vec![false; img.gts.len()];
    let mut c = Counts::default();
    for d in dets {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in img.gts.iter().enumerate() {
            if matched[j] {
                continue;
            }
            let iou = cfg.criterion.iou(&d.boxed, g);
            if iou >= cfg.iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((j, iou));
            }
        }
        match best {
            Some((j, _)) => {
                matched[j] = true;
                c.tp += 1;
            }
            None => {
                let ignored = img
                    .ignore
                    .iter()
                    .any(|r| cfg.criterion.iou(&d.boxed, r) >= cfg.iou_threshold);
                if !ignored {
                    c.fp += 1;
                }
            }
        }
    }
    c.fn_ = matched.iter().filter(|m| !**m).count();
    c
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate(images: &[EvalImage], cfg: &EvalConfig) -> EvalResult {
    let total =
        images
            .iter()
            .map(|img| evaluate_image(img, cfg))
            .fold(Counts::default(), |a, b| Counts {
                tp: a.tp + b.tp,
                fp: a.fp + b.fp,
                fn_: a.fn_ + b.fn_,
            });
    let precision = ratio(total.tp, total.tp + total.fp);
    let recall = ratio(total.tp, total.tp + total.fn_);
    let f_measure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    EvalResult {
        recall,
        precision,
        f_measure,
        tp: total.tp,
        fp: total.fp,
        fn_: total.fn_,
        pr_curve: Vec::new(),
    }
}

/// One operating point per score threshold.
pub fn pr_curve(images: &[EvalImage], cfg: &EvalConfig, thresholds: &[f64]) -> Vec<PrPoint> {
    thresholds
        .iter()
        .map(|&t| {
            let r = evaluate(
                images,
                &EvalConfig {
                    score_threshold: t,
                    ..*cfg
                },
            );
            PrPoint {
                threshold: t,
                precision: r.precision,
                recall: r.recall,
            }
        })
        .collect()
}
