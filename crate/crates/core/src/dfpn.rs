//! Dense feature pyramid: every level concatenates the upsampled laterals of
//! all coarser levels before a 3×3 smoothing convolution.
//!
//! Weight layout for level `Ci` (i = 2..5):
//! - `lateral`: `(F, Cin_i, 1, 1)` plus `lateral_bias: (F)`
//! - `smooth`: `(F, F·(6 − i), 3, 3)` plus `smooth_bias: (F)`
//!
//! where `F` is the pyramid width (256 by default). The concatenated input
//! of level i is its own lateral first, then the coarser levels in ascending
//! order.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PYRAMID_CHANNELS: usize = 256;

/// Backbone levels in order.
pub const INPUT_LEVELS: [u8; 4] = [2, 3, 4, 5];

/// What coarser levels contribute to a finer level's concatenation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reuse {
    /// 1×1 laterals of the raw backbone maps.
    #[default]
    Lateral,
    /// The already smoothed outputs of the coarser levels.
    Smoothed,
}

/// Same-padded, stride-1 cross-correlation.
///
/// `kernel` is `(out, in, kh, kw)` with odd spatial sizes; `bias` has `out` entries.
pub fn conv2d(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c, h, w) = input.chw()?;
    let (o, ki, kh, kw) = match kernel.dims()[..] {
        [o, i, kh, kw] => (o, i, kh, kw),
        _ => {
            return Err(Error::Shape(format!(
                "kernel must be rank 4, got {:?}",
                kernel.dims()
            )))
        }
    };
    if ki != c {
        return Err(Error::Shape(format!(
            "kernel expects {ki} input channels, map has {c}"
        )));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::Shape(format!(
            "kernel {kh}x{kw} must have odd sides"
        )));
    }
    if bias.dims() != [o] {
        return Err(Error::Shape(format!(
            "bias must be ({o}), got {:?}",
            bias.dims()
        )));
    }
    let (ph, pw) = ((kh / 2) as isize, (kw / 2) as isize);
    let (hi, wi) = (h as isize, w as isize);
    let src = input.data();
    let wts = kernel.data();
    let mut out = vec![0.0f32; o * h * w];
    out.par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(oc, plane)| {
            plane.fill(bias.data()[oc]);
            for ic in 0..c {
                let chan = &src[ic * h * w..(ic + 1) * h * w];
                for ky in 0..kh {
                    let dy = ky as isize - ph;
                    let (y0, y1) = ((-dy).max(0), (hi - dy).min(hi));
                    for kx in 0..kw {
                        let wt = wts[((oc * c + ic) * kh + ky) * kw + kx];
                        if wt == 0.0 {
                            continue;
                        }
                        let dx = kx as isize - pw;
                        let (x0, x1) = ((-dx).max(0), (wi - dx).min(wi));
                        if x0 >= x1 {
                            continue;
                        }
                        for y in y0..y1 {
                            let row_out = (y * wi) as usize;
                            let row_in = ((y + dy) * wi) as usize;
                            let dst = &mut plane[row_out + x0 as usize..row_out + x1 as usize];
                            let s = &chan[(row_in as isize + x0 + dx) as usize
                                ..(row_in as isize + x1 + dx) as usize];
                            for (d, v) in dst.iter_mut().zip(s) {
                                *d += wt * v;
                            }
                        }
                    }
                }
            }
        });
    Tensor::new(vec![o, h, w], out)
}

/// Replicate each value into a `factor × factor` block.
pub fn upsample_nearest(input: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 0 {
        return Err(Error::InvalidInput(
            "upsample factor must be at least 1".into(),
        ));
    }
    let (c, h, w) = input.chw()?;
    let (oh, ow) = (h * factor, w * factor);
    let src = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            let row = &src[(ch * h + y / factor) * w..(ch * h + y / factor + 1) * w];
            out.extend((0..ow).map(|x| row[x / factor]));
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// 2×2 max pooling with stride 2; odd trailing rows and columns form partial windows.
pub fn max_downsample2(input: &Tensor) -> Result<Tensor> {
    let (c, h, w) = input.chw()?;
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    let out = Tensor::from_fn(vec![c, oh, ow], |i| {
        let (ch, rem) = (i / (oh * ow), i % (oh * ow));
        let (y, x) = (2 * (rem / ow), 2 * (rem % ow));
        let mut m = f32::NEG_INFINITY;
        for yy in y..(y + 2).min(h) {
            for xx in x..(x + 2).min(w) {
                m = m.max(input.at3(ch, yy, xx));
            }
        }
        m
    });
    Ok(out)
}

/// Stack maps of equal spatial size along the channel axis.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidInput("nothing to concatenate".into()))?;
    let (_, h, w) = first.chw()?;
    let mut c = 0;
    let mut data = Vec::new();
    for p in parts {
        let (pc, ph, pw) = p.chw()?;
        if (ph, pw) != (h, w) {
            return Err(Error::Shape(format!(
                "cannot concatenate {ph}x{pw} with {h}x{w}"
            )));
        }
        c += pc;
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![c, h, w], data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelWeights {
    pub lateral: Tensor,
    pub lateral_bias: Tensor,
    pub smooth: Tensor,
    pub smooth_bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DfpnWeights {
    /// C2..C5 in order.
    pub levels: Vec<LevelWeights>,
    pub reuse: Reuse,
}

fn uniform(rng: &mut ChaCha8Rng, dims: Vec<usize>, bound: f32) -> Tensor {
    Tensor::from_fn(dims, |_| rng.random_range(-bound..bound))
}

impl DfpnWeights {
    /// Seeded uniform weights scaled by `1/sqrt(fan_in)`.
    pub fn random(seed: u64, in_channels: [usize; 4], width: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let levels = in_channels
            .iter()
            .enumerate()
            .map(|(i, &cin)| {
                let concat = width * (4 - i);
                let lb = 1.0 / (cin as f32).sqrt();
                let sb = 1.0 / ((concat * 9) as f32).sqrt();
                LevelWeights {
                    lateral: uniform(&mut rng, vec![width, cin, 1, 1], lb),
                    lateral_bias: uniform(&mut rng, vec![width], lb),
                    smooth: uniform(&mut rng, vec![width, concat, 3, 3], sb),
                    smooth_bias: uniform(&mut rng, vec![width], sb),
                }
            })
            .collect();
        Self {
            levels,
            reuse: Reuse::Lateral,
        }
    }

    pub fn width(&self) -> usize {
        self.levels.first().map_or(0, |l| l.lateral.dims()[0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.len() != 4 {
            return Err(Error::Shape(format!(
                "need 4 levels of weights, got {}",
                self.levels.len()
            )));
        }
        let f = self.width();
        for (i, l) in self.levels.iter().enumerate() {
            let level = INPUT_LEVELS[i];
            let concat = f * (4 - i);
            let ok = l.lateral.rank() == 4
                && l.lateral.dims()[0] == f
                && l.lateral.dims()[2..] == [1, 1]
                && l.lateral_bias.dims() == [f]
                && l.smooth.dims() == [f, concat, 3, 3]
                && l.smooth_bias.dims() == [f];
            if !ok {
                return Err(Error::Shape(format!(
                    "weights for C{level} do not match width {f} (smooth must be ({f}, {concat}, 3, 3))"
                )));
            }
        }
        Ok(())
    }

    /// Reads `lateral{i}.rbt`, `lateral{i}_bias.rbt`, `smooth{i}.rbt`, `smooth{i}_bias.rbt`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let levels = INPUT_LEVELS
            .iter()
            .map(|i| {
                Ok(LevelWeights {
                    lateral: Tensor::load(dir.join(format!("lateral{i}.rbt")))?,
                    lateral_bias: Tensor::load(dir.join(format!("lateral{i}_bias.rbt")))?,
                    smooth: Tensor::load(dir.join(format!("smooth{i}.rbt")))?,
                    smooth_bias: Tensor::load(dir.join(format!("smooth{i}_bias.rbt")))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let w = Self {
            levels,
            reuse: Reuse::Lateral,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (i, l) in INPUT_LEVELS.iter().zip(&self.levels) {
            l.lateral.save(dir.join(format!("lateral{i}.rbt")))?;
            l.lateral_bias
                .save(dir.join(format!("lateral{i}_bias.rbt")))?;
            l.smooth.save(dir.join(format!("smooth{i}.rbt")))?;
            l.smooth_bias
                .save(dir.join(format!("smooth{i}_bias.rbt")))?;
        }
        Ok(())
    }
}

/// P2..P6.
#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    pub levels: Vec<Tensor>,
}

impl Pyramid {
    /// Level `Pi`, i in 2..=6.
    pub fn get(&self, level: u8) -> Option<&Tensor> {
        self.levels.get((level as usize).checked_sub(2)?)
    }
}

fn check_shapes(features: &[Tensor; 4]) -> Result<()> {
    let (_, mut h, mut w) = features[0].chw()?;
    for (i, f) in features.iter().enumerate().skip(1) {
        let (_, fh, fw) = f.chw()?;
        if h % 2 != 0 || w % 2 != 0 || (fh, fw) != (h / 2, w / 2) {
            return Err(Error::Shape(format!(
                "C{} is {fh}x{fw}; expected half of {h}x{w}",
                INPUT_LEVELS[i]
            )));
        }
        (h, w) = (fh, fw);
    }
    Ok(())
}

pub fn dfpn_forward(features: &[Tensor; 4], weights: &DfpnWeights) -> Result<Pyramid> {
    weights.validate()?;
    check_shapes(features)?;
    let laterals = features
        .iter()
        .zip(&weights.levels)
        .map(|(f, w)| conv2d(f, &w.lateral, &w.lateral_bias))
        .collect::<Result<Vec<_>>>()?;

    // coarse to fine, so smoothed coarser maps exist for Reuse::Smoothed
    let mut smoothed: Vec<Option<Tensor>> = vec![None; 4];
    for i in (0..4).rev() {
        let mut ups = Vec::with_capacity(3 - i);
        for j in i + 1..4 {
            let src = match weights.reuse {
                Reuse::Lateral => &laterals[j],
                Reuse::Smoothed => smoothed[j].as_ref().expect("coarser level computed first"),
            };
            ups.push(upsample_nearest(src, 1 << (j - i))?);
        }
        let mut parts: Vec<&Tensor> = vec![&laterals[i]];
        parts.extend(ups.iter());
        let merged = concat_channels(&parts)?;
        let w = &weights.levels[i];
        smoothed[i] = Some(conv2d(&merged, &w.smooth, &w.smooth_bias)?);
    }
    let mut levels: Vec<Tensor> = smoothed
        .into_iter()
        .map(|t| t.expect("all levels computed"))
        .collect();
    let p6 = max_downsample2(&levels[3])?;
    levels.push(p6);
    Ok(Pyramid { levels })
}
