//! Positive / negative / ignore labelling of anchors and mini-batch sampling.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coder::angle_residual;
use crate::error::{Error, Result};
use crate::geom::{skew_iou_prepared, PreparedBox, RotatedBox};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssignerConfig {
    pub pos_iou: f64,
    pub neg_iou: f64,
    /// Degrees.
    pub max_angle_diff: f64,
    pub batch_size: usize,
    pub pos_fraction: f64,
}

impl Default for AssignerConfig {
    fn default() -> Self {
        Self {
            pos_iou: 0.5,
            neg_iou: 0.2,
            max_angle_diff: 15.0,
            batch_size: 512,
            pos_fraction: 0.5,
        }
    }
}

impl AssignerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.neg_iou && self.neg_iou < self.pos_iou && self.pos_iou <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= neg_iou < pos_iou <= 1, got {} and {}",
                self.neg_iou, self.pos_iou
            )));
        }
        if !(self.max_angle_diff > 0.0 && self.max_angle_diff <= 90.0) {
            return Err(Error::Config("max_angle_diff must be in (0, 90]".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pos_fraction) {
            return Err(Error::Config("pos_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub label: Label,
    pub matched_gt: Option<usize>,
    /// IoU with the matched gt for positives, otherwise the best IoU over all gts.
    pub iou: f64,
}

/// Label a single anchor from its best-overlap statistics.
pub fn classify(best_iou: f64, angle_diff: f64, cfg: &AssignerConfig) -> Label {
    if best_iou > cfg.pos_iou {
        if angle_diff < cfg.max_angle_diff {
            Label::Positive
        } else {
            Label::Negative
        }
    } else if best_iou < cfg.neg_iou {
        Label::Negative
    } else {
        Label::Ignore
    }
}

pub fn assign(anchors: &[RotatedBox], gts: &[RotatedBox], cfg: &AssignerConfig) -> Vec<Assignment> {
    if gts.is_empty() {
        return vec![
            Assignment {
                label: Label::Negative,
                matched_gt: None,
                iou: 0.0,
            };
            anchors.len()
        ];
    }
    let prepared_gts: Vec<PreparedBox> = gts.iter().map(|g| PreparedBox::new(*g)).collect();
    let ious: Vec<Vec<f64>> = anchors
        .par_iter()
        .map(|a| {
            let pa = PreparedBox::new(*a);
            prepared_gts
                .iter()
                .map(|g| skew_iou_prepared(&pa, g))
                .collect()
        })
        .collect();

    let mut out: Vec<Assignment> = anchors
        .iter()
        .zip(&ious)
        .map(|(a, row)| {
            let (best_gt, best_iou) =
                row.iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (j, v)| if v > acc.1 { (j, v) } else { acc },
                    );
            let (residual, _) = angle_residual(a.theta(), gts[best_gt].theta());
            let label = classify(best_iou, residual.abs(), cfg);
            Assignment {
                label,
                matched_gt: (label == Label::Positive).then_some(best_gt),
                iou: best_iou,
            }
        })
        .collect();

    // Highest-IoU anchors of each gt become positive regardless of the rules above.
    // Ties all qualify; a later gt takes over an anchor claimed by an earlier one.
    for j in 0..gts.len() {
        let max = ious.iter().map(|row| row[j]).fold(0.0, f64::max);
        if max <= 0.0 {
            continue;
        }
        for (i, row) in ious.iter().enumerate() {
            if row[j] == max {
                out[i] = Assignment {
                    label: Label::Positive,
                    matched_gt: Some(j),
                    iou: max,
                };
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiniBatch {
    /// Ascending anchor indices.
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    /// Set when there were too few candidates to fill the batch.
    pub warning: Option<String>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn pick(rng: &mut ChaCha8Rng, pool: &[usize], n: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = index::sample(rng, pool.len(), n.min(pool.len()))
        .into_iter()
        .map(|i| pool[i])
        .collect();
    chosen.sort_unstable();
    chosen
}

/// Draw a mini-batch: positives up to `pos_fraction · batch_size`, negatives fill the rest.
pub fn sample(assignments: &[Assignment], cfg: &AssignerConfig, seed: u64) -> MiniBatch {
    let pos: Vec<usize> = (0..assignments.len())
        .filter(|&i| assignments[i].label == Label::Positive)
        .collect();
    let neg: Vec<usize> = (0..assignments.len())
        .filter(|&i| assignments[i].label == Label::Negative)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos_quota = (cfg.pos_fraction * cfg.batch_size as f64).floor() as usize;
    let positives = pick(&mut rng, &pos, pos_quota);
    let negatives = pick(&mut rng, &neg, cfg.batch_size - positives.len());
    let filled = positives.len() + negatives.len();
    let warning = (filled < cfg.batch_size).then(|| {
        let msg = format!("mini-batch holds {filled} of {} anchors", cfg.batch_size);
        log::warn!("{msg}");
        msg
    });
    MiniBatch {
        positives,
        negatives,
        warning,
    }
}
