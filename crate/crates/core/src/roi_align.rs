//! Bilinear ROI Align on the circumscribed rectangle of a rotated proposal.
//!
//! Feature cell `(r, c)` sits at continuous coordinate `(x = c, y = r)`;
//! image pixels map to feature coordinates by division by the stride.
//! Reads outside the map contribute zero.

use crate::anchors::{Level, LevelSpec};
use crate::error::{Error, Result};
use crate::geom::{hrect, HRect, RotatedBox};
use crate::tensor::Tensor;

pub const DEFAULT_SAMPLES_PER_BIN: usize = 2;

/// Pool grids as `(rows, cols)`: square, wide, tall.
pub const POOL_SIZES: [(usize, usize); 3] = [(7, 7), (3, 16), (16, 3)];

/// Bilinear value of channel `c` at feature coordinate `(x, y)`.
pub fn bilinear(feature: &Tensor, c: usize, x: f64, y: f64) -> f32 {
    let (_, h, w) = (feature.dims()[0], feature.dims()[1], feature.dims()[2]);
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let read = |yy: f64, xx: f64| -> f64 {
        if yy < 0.0 || xx < 0.0 || yy >= h as f64 || xx >= w as f64 {
            0.0
        } else {
            feature.at3(c, yy as usize, xx as usize) as f64
        }
    };
    let v = (1.0 - fy) * ((1.0 - fx) * read(y0, x0) + fx * read(y0, x0 + 1.0))
        + fy * ((1.0 - fx) * read(y0 + 1.0, x0) + fx * read(y0 + 1.0, x0 + 1.0));
    v as f32
}

/// Feature-space sample positions along one axis: `out` bins, `samples` points each.
pub fn sample_positions(lo: f64, hi: f64, stride: f64, out: usize, samples: usize) -> Vec<f64> {
    let (lo, hi) = (lo / stride, hi / stride);
    let bin = (hi - lo) / out as f64;
    (0..out)
        .flat_map(|i| {
            (0..samples).map(move |s| lo + i as f64 * bin + (s as f64 + 0.5) * bin / samples as f64)
        })
        .collect()
}

pub fn roi_align(
    feature: &Tensor,
    roi: &HRect,
    stride: f64,
    out_h: usize,
    out_w: usize,
    samples_per_bin: usize,
) -> Result<Tensor> {
    let (c, _, _) = feature.chw()?;
    if stride.is_nan() || stride <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "stride must be positive, got {stride}"
        )));
    }
    if out_h == 0 || out_w == 0 || samples_per_bin == 0 {
        return Err(Error::InvalidInput(
            "output size and samples per bin must be positive".into(),
        ));
    }
    let s = samples_per_bin;
    let ys = sample_positions(roi.ymin, roi.ymax, stride, out_h, s);
    let xs = sample_positions(roi.xmin, roi.xmax, stride, out_w, s);
    let norm = 1.0 / (s * s) as f64;
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        for by in 0..out_h {
            for bx in 0..out_w {
                let mut acc = 0.0f64;
                for &y in &ys[by * s..(by + 1) * s] {
                    for &x in &xs[bx * s..(bx + 1) * s] {
                        acc += bilinear(feature, ch, x, y) as f64;
                    }
                }
                out.push((acc * norm) as f32);
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledFeature {
    /// `(C,7,7)`, `(C,3,16)`, `(C,16,3)`.
    pub parts: [Tensor; 3],
}

impl PooledFeature {
    /// Parts concatenated in order, length `145·C`.
    pub fn flattened(&self) -> Vec<f32> {
        self.parts
            .iter()
            .flat_map(|p| p.data().iter().copied())
            .collect()
    }
}

pub fn multiscale_pool(
    feature: &Tensor,
    proposal: &RotatedBox,
    stride: f64,
    samples_per_bin: usize,
) -> Result<PooledFeature> {
    let roi = hrect(proposal);
    let [a, b, c] = POOL_SIZES;
    Ok(PooledFeature {
        parts: [
            roi_align(feature, &roi, stride, a.0, a.1, samples_per_bin)?,
            roi_align(feature, &roi, stride, b.0, b.1, samples_per_bin)?,
            roi_align(feature, &roi, stride, c.0, c.1, samples_per_bin)?,
        ],
    })
}

/// Level whose anchor scale is nearest to `sqrt(w·h)`; ties go to the finer level.
pub fn assign_level(proposal: &RotatedBox, levels: &[LevelSpec]) -> Result<Level> {
    let size = proposal.area().sqrt();
    let mut sorted: Vec<&LevelSpec> = levels.iter().collect();
    sorted.sort_by_key(|l| l.level);
    sorted
        .into_iter()
        .fold(None::<(&LevelSpec, f64)>, |best, l| {
            let d = (l.scale - size).abs();
            match best {
                Some((_, bd)) if bd <= d => best,
                _ => Some((l, d)),
            }
        })
        .map(|(l, _)| l.level)
        .ok_or_else(|| Error::Config("empty scale table".into()))
}
