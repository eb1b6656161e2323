//! Classification + regression objective evaluated on a batch of anchors.

use serde::{Deserialize, Serialize};

use crate::coder::DeltaVector;
use crate::error::{Error, Result};

/// Probability floor inside the log.
pub const PROB_EPS: f64 = 1e-12;

/// Unit in which the angle residual enters the smooth-L1 term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleUnit {
    Degrees,
    /// Degrees divided by 90.
    #[default]
    RightAngles,
}

impl AngleUnit {
    fn scale(self) -> f64 {
        match self {
            AngleUnit::Degrees => 1.0,
            AngleUnit::RightAngles => 1.0 / 90.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub lambda: f64,
    /// Defaults to the number of batch entries.
    pub n_cls: Option<f64>,
    /// Defaults to the number of positives, at least 1.
    pub n_reg: Option<f64>,
    pub angle_residual_unit: AngleUnit,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            n_cls: None,
            n_reg: None,
            angle_residual_unit: AngleUnit::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cls_loss: f64,
    pub reg_loss: f64,
    pub n_cls: f64,
    pub n_reg: f64,
    /// `cls_loss / n_cls`.
    pub cls_term: f64,
    /// `lambda · reg_loss / n_reg`.
    pub reg_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossEntry {
    pub probs: Vec<f64>,
    pub label: usize,
    pub predicted: DeltaVector,
    #[serde(default)]
    pub target: Option<DeltaVector>,
    pub is_positive: bool,
}

pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = *probs.get(label).ok_or_else(|| {
        Error::InvalidInput(format!(
            "label {label} out of range for {} classes",
            probs.len()
        ))
    })?;
    if probs.iter().any(|&q| !q.is_finite() || q < 0.0) {
        return Err(Error::InvalidInput(
            "probabilities must be finite and non-negative".into(),
        ));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!("probabilities sum to {sum}")));
    }
    Ok(-p.max(PROB_EPS).ln())
}

pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Derivative of [`smooth_l1`].
pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

fn regression_term(pred: &DeltaVector, target: &DeltaVector, unit: AngleUnit) -> f64 {
    let s = unit.scale();
    smooth_l1(target.t_x - pred.t_x)
        + smooth_l1(target.t_y - pred.t_y)
        + smooth_l1(target.t_w - pred.t_w)
        + smooth_l1(target.t_h - pred.t_h)
        + smooth_l1((target.t_theta - pred.t_theta) * s)
}

/// Sums run in index order, so results are reproducible bit for bit.
pub fn multitask_loss(batch: &[LossEntry], cfg: &LossConfig) -> Result<LossBreakdown> {
    if cfg.lambda.is_nan() || cfg.lambda < 0.0 {
        return Err(Error::Config("lambda must be non-negative".into()));
    }
    let mut cls_loss = 0.0;
    let mut reg_loss = 0.0;
    let mut positives = 0usize;
    for (i, e) in batch.iter().enumerate() {
        cls_loss += cross_entropy(&e.probs, e.label)?;
        if e.is_positive {
            let target = e.target.as_ref().ok_or_else(|| {
                Error::InvalidInput(format!("positive entry {i} has no regression target"))
            })?;
            reg_loss += regression_term(&e.predicted, target, cfg.angle_residual_unit);
            positives += 1;
        }
    }
    let n_cls = cfg.n_cls.unwrap_or(batch.len() as f64).max(1.0);
    let n_reg = cfg.n_reg.unwrap_or(positives as f64).max(1.0);
    let cls_term = cls_loss / n_cls;
    let reg_term = cfg.lambda * (reg_loss / n_reg);
    Ok(LossBreakdown {
        cls_loss,
        reg_loss,
        n_cls,
        n_reg,
        cls_term,
        reg_term,
        total: cls_term + reg_term,
    })
}
