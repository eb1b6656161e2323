//! Rotation anchor lattice over a feature pyramid.
//!
//! Ordering contract: level (ascending) → row → col → ratio → angle. Head
//! outputs are indexed by this order, so it must not change.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::RotatedBox;

/// Pyramid level id, `P2` = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Level(pub u8);

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub level: Level,
    /// Square root of the anchor area, pixels.
    pub scale: f64,
    pub stride: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub levels: Vec<LevelSpec>,
    /// `[p, q]` means `w : h = p : q`.
    pub ratios: Vec<[f64; 2]>,
    /// Degrees.
    pub angles: Vec<f64>,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        let levels = [
            (2, 50.0, 4),
            (3, 150.0, 8),
            (4, 250.0, 16),
            (5, 350.0, 32),
            (6, 500.0, 64),
        ]
        .into_iter()
        .map(|(l, scale, stride)| LevelSpec {
            level: Level(l),
            scale,
            stride,
        })
        .collect();
        Self {
            levels,
            ratios: vec![
                [1.0, 3.0],
                [3.0, 1.0],
                [1.0, 5.0],
                [5.0, 1.0],
                [1.0, 7.0],
                [7.0, 1.0],
                [1.0, 9.0],
                [9.0, 1.0],
            ],
            angles: vec![-15.0, -30.0, -45.0, -60.0, -75.0, -90.0],
        }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for l in &self.levels {
            if !seen.insert(l.level) {
                return Err(Error::Config(format!("level {} configured twice", l.level)));
            }
            if !(l.scale.is_finite() && l.scale > 0.0) || l.stride == 0 {
                return Err(Error::Config(format!(
                    "level {} needs positive scale and stride",
                    l.level
                )));
            }
        }
        if self
            .ratios
            .iter()
            .flatten()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::Config("ratio terms must be positive".into()));
        }
        if self.angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("angles must be finite".into()));
        }
        Ok(())
    }

    pub fn level(&self, level: Level) -> Result<&LevelSpec> {
        self.levels
            .iter()
            .find(|l| l.level == level)
            .ok_or_else(|| Error::Config(format!("level {level} is not configured")))
    }

    /// Anchors at one grid cell (one scale per level).
    pub fn anchors_per_location(&self) -> usize {
        self.ratios.len() * self.angles.len()
    }

    /// Output width of a regression head: five deltas per anchor.
    pub fn regression_outputs(&self) -> usize {
        5 * self.anchors_per_location()
    }

    /// Output width of a two-class classification head.
    pub fn classification_outputs(&self) -> usize {
        2 * self.anchors_per_location()
    }

    /// Feature grid of every level for an `image_h × image_w` input (ceil division).
    pub fn grids_for_image(&self, image_h: u32, image_w: u32) -> Vec<(Level, usize, usize)> {
        self.levels
            .iter()
            .map(|l| {
                (
                    l.level,
                    image_h.div_ceil(l.stride) as usize,
                    image_w.div_ceil(l.stride) as usize,
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    #[serde(rename = "box")]
    pub boxed: RotatedBox,
    pub level: Level,
    pub row: usize,
    pub col: usize,
}

/// Width and height of an area-preserving anchor: `w·h = s²`, `w:h = p:q`.
pub fn anchor_size(scale: f64, ratio: [f64; 2]) -> (f64, f64) {
    let r = (ratio[0] / ratio[1]).sqrt();
    (scale * r, scale / r)
}

pub fn generate_level(
    config: &AnchorConfig,
    level: Level,
    grid_h: usize,
    grid_w: usize,
) -> Result<Vec<Anchor>> {
    let spec = config.level(level)?;
    if grid_h == 0 || grid_w == 0 {
        return Err(Error::Config(format!(
            "grid for {level} must be at least 1x1"
        )));
    }
    let stride = spec.stride as f64;
    let shapes = config
        .ratios
        .iter()
        .flat_map(|&ratio| {
            let (w, h) = anchor_size(spec.scale, ratio);
            config.angles.iter().map(move |&theta| (w, h, theta))
        })
        .collect::<Vec<_>>();

    let mut out = Vec::with_capacity(grid_h * grid_w * shapes.len());
    for row in 0..grid_h {
        let cy = (row as f64 + 0.5) * stride;
        for col in 0..grid_w {
            let cx = (col as f64 + 0.5) * stride;
            for &(w, h, theta) in &shapes {
                out.push(Anchor {
                    boxed: RotatedBox::new(cx, cy, w, h, theta)?,
                    level,
                    row,
                    col,
                });
            }
        }
    }
    Ok(out)
}

/// Anchors of all given grids, in ascending level order.
pub fn generate_pyramid(
    config: &AnchorConfig,
    grids: &[(Level, usize, usize)],
) -> Result<Vec<Anchor>> {
    let mut sorted = grids.to_vec();
    sorted.sort_by_key(|g| g.0);
    if sorted.windows(2).any(|p| p[0].0 == p[1].0) {
        return Err(Error::Config("duplicate level in grid list".into()));
    }
    let mut out = Vec::new();
    for (level, h, w) in sorted {
        out.extend(generate_level(config, level, h, w)?);
    }
    Ok(out)
}
