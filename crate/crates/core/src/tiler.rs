//! Overlapping tile plans for large scenes and the merge back to scene coordinates.
//!
//! Coordinates: x = column, y = row, origin at the top-left corner. Windows
//! are half-open pixel ranges `[xmin, xmax) × [ymin, ymax)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::Detection;
use crate::geom::{HRect, RotatedBox};
use crate::nms::{rotated_nms, ScoredBox};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileSpec {
    pub tile_h: u32,
    pub tile_w: u32,
    pub overlap_fraction: f64,
    pub scene_h: u32,
    pub scene_w: u32,
}

impl TileSpec {
    /// 600×1000 tiles with 0.1 overlap.
    pub fn for_scene(scene_h: u32, scene_w: u32) -> Self {
        Self {
            tile_h: 600,
            tile_w: 1000,
            overlap_fraction: 0.1,
            scene_h,
            scene_w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::Config(format!(
                "overlap fraction {} outside [0, 1)",
                self.overlap_fraction
            )));
        }
        if self.tile_h == 0 || self.tile_w == 0 || self.scene_h == 0 || self.scene_w == 0 {
            return Err(Error::Config(
                "tile and scene sizes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Window origins along one axis.
fn axis_starts(scene: u32, tile: u32, overlap: f64) -> Vec<(u32, u32)> {
    if scene <= tile {
        return vec![(0, scene)];
    }
    let stride = ((tile as f64 * (1.0 - overlap)).round() as u32).max(1);
    let span = scene - tile;
    let n = span.div_ceil(stride) + 1;
    (0..n)
        .map(|i| {
            let start = (i * stride).min(span);
            (start, start + tile)
        })
        .collect()
}

/// Row-major tile windows; the last row and column end flush with the scene edge.
pub fn plan_tiles(spec: &TileSpec) -> Result<Vec<HRect>> {
    spec.validate()?;
    let rows = axis_starts(spec.scene_h, spec.tile_h, spec.overlap_fraction);
    let cols = axis_starts(spec.scene_w, spec.tile_w, spec.overlap_fraction);
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &(y0, y1) in &rows {
        for &(x0, x1) in &cols {
            out.push(HRect::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64)?);
        }
    }
    Ok(out)
}

pub fn to_scene_coords(det: &Detection, window: &HRect) -> Detection {
    Detection {
        boxed: det.boxed.translated(window.xmin, window.ymin),
        score: det.score,
    }
}

pub fn to_tile_coords(det: &Detection, window: &HRect) -> Detection {
    Detection {
        boxed: det.boxed.translated(-window.xmin, -window.ymin),
        score: det.score,
    }
}

/// Translate every tile's detections into the scene and suppress duplicates globally.
pub fn merge_scene(
    per_tile: &[Vec<Detection>],
    windows: &[HRect],
    nms_iou: f64,
) -> Result<Vec<Detection>> {
    if per_tile.len() != windows.len() {
        return Err(Error::InvalidInput(format!(
            "{} detection lists for {} windows",
            per_tile.len(),
            windows.len()
        )));
    }
    let scene: Vec<Detection> = per_tile
        .iter()
        .zip(windows)
        .flat_map(|(dets, w)| dets.iter().map(move |d| to_scene_coords(d, w)))
        .collect();
    let scored: Vec<ScoredBox> = scene
        .iter()
        .enumerate()
        .map(|(i, d)| ScoredBox::new(d.boxed, d.score, i))
        .collect();
    Ok(rotated_nms(&scored, nms_iou)
        .into_iter()
        .map(|i| scene[i])
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    /// Subtracted per channel, in the image's channel order.
    pub channel_means: [f32; 3],
    pub random_flip: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            channel_means: [103.939, 116.779, 123.68],
            random_flip: true,
        }
    }
}

impl PreprocessConfig {
    /// Subtract the channel means from a `(3, H, W)` image in place.
    pub fn subtract_mean(&self, image: &mut Tensor) -> Result<()> {
        let (c, h, w) = image.chw()?;
        if c != 3 {
            return Err(Error::Shape(format!("expected 3 channels, got {c}")));
        }
        for (ch, plane) in image.data_mut().chunks_mut(h * w).enumerate() {
            let m = self.channel_means[ch];
            plane.iter_mut().for_each(|v| *v -= m);
        }
        Ok(())
    }
}

/// Mirror an image of width `width` left to right.
pub fn flip_horizontal(image: &Tensor) -> Result<Tensor> {
    let (c, h, w) = image.chw()?;
    Ok(Tensor::from_fn(vec![c, h, w], |i| {
        let (row, x) = (i / w, i % w);
        image.data()[row * w + (w - 1 - x)]
    }))
}

/// The box that matches `b` after [`flip_horizontal`] of a `width`-wide image.
pub fn flip_box_horizontal(b: &RotatedBox, width: f64) -> RotatedBox {
    RotatedBox::new(width - b.x(), b.y(), b.w(), b.h(), -b.theta())
        .expect("mirroring keeps a valid box valid")
}
