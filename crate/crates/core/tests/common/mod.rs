//! Reference implementations that share no code path with the library kernels.
#![allow(dead_code)]

use rotbox::coder::DeltaVector;
use rotbox::{LossEntry, RotatedBox, ScoredBox, Tensor};

/// Half-extent test in the box's own frame, straight from the corner convention.
fn row_interval(b: &RotatedBox, y: f64) -> Option<(f64, f64)> {
    let t = b.theta().to_radians();
    let (c, s) = (t.cos(), t.sin());
    // p - center = (dx, dy); |dx c + dy s| <= w/2 and |-dx s + dy c| <= h/2
    let dy = y - b.y();
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (a, off, half) in [(c, dy * s, b.w() / 2.0), (-s, dy * c, b.h() / 2.0)] {
        // -half <= a*dx + off <= half
        if a.abs() < 1e-15 {
            if off.abs() > half {
                return None;
            }
            continue;
        }
        let (l, h) = ((-half - off) / a, (half - off) / a);
        let (l, h) = if l <= h { (l, h) } else { (h, l) };
        lo = lo.max(l);
        hi = hi.min(h);
    }
    (lo <= hi).then_some((lo + b.x(), hi + b.x()))
}

/// Count of sample abscissae x0 + (i + 0.5)·dx, i in 0..n, falling in [lo, hi].
fn count_in(lo: f64, hi: f64, x0: f64, dx: f64, n: usize) -> i64 {
    let first = ((lo - x0) / dx - 0.5).ceil().max(0.0);
    let last = ((hi - x0) / dx - 0.5).floor().min(n as f64 - 1.0);
    if last < first {
        0
    } else {
        (last - first) as i64 + 1
    }
}

/// IoU estimated on an `n × n` grid of sample points over the joint bounding square.
pub fn raster_iou(a: &RotatedBox, b: &RotatedBox, n: usize) -> f64 {
    let ra = a.w().hypot(a.h()) / 2.0;
    let rb = b.w().hypot(b.h()) / 2.0;
    let x0 = (a.x() - ra).min(b.x() - rb);
    let x1 = (a.x() + ra).max(b.x() + rb);
    let y0 = (a.y() - ra).min(b.y() - rb);
    let y1 = (a.y() + ra).max(b.y() + rb);
    let (dx, dy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let (mut na, mut nb, mut nboth) = (0i64, 0i64, 0i64);
    for r in 0..n {
        let y = y0 + (r as f64 + 0.5) * dy;
        let ia = row_interval(a, y);
        let ib = row_interval(b, y);
        if let Some((l, h)) = ia {
            na += count_in(l, h, x0, dx, n);
        }
        if let Some((l, h)) = ib {
            nb += count_in(l, h, x0, dx, n);
        }
        if let (Some((la, ha)), Some((lb, hb))) = (ia, ib) {
            let (l, h) = (la.max(lb), ha.min(hb));
            if l <= h {
                nboth += count_in(l, h, x0, dx, n);
            }
        }
    }
    let union = na + nb - nboth;
    if union == 0 {
        0.0
    } else {
        nboth as f64 / union as f64
    }
}

/// Closed-form IoU of two axis-aligned boxes (theta = -90 puts w along y).
pub fn axis_aligned_iou(a: &RotatedBox, b: &RotatedBox) -> f64 {
    let ext = |r: &RotatedBox| {
        (
            r.x() - r.h() / 2.0,
            r.x() + r.h() / 2.0,
            r.y() - r.w() / 2.0,
            r.y() + r.w() / 2.0,
        )
    };
    let (ax0, ax1, ay0, ay1) = ext(a);
    let (bx0, bx1, by0, by1) = ext(b);
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    inter / (a.w() * a.h() + b.w() * b.h() - inter)
}

/// O(n²): full IoU matrix, then keep a candidate iff it clears every box kept so far.
pub fn brute_force_nms(
    items: &[ScoredBox],
    thr: f64,
    iou: impl Fn(&RotatedBox, &RotatedBox) -> f64,
) -> Vec<usize> {
    let n = items.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = iou(&items[i].boxed, &items[j].boxed);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        items[b]
            .score
            .partial_cmp(&items[a].score)
            .unwrap()
            .then(items[a].index.cmp(&items[b].index))
    });
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        if kept.iter().all(|&k| m[k][i] <= thr) {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| items[i].index).collect()
}

/// Direct six-loop convolution in f64 with explicit zero padding.
pub fn naive_conv(input: &Tensor, kernel: &Tensor, bias: &Tensor) -> Vec<f64> {
    let d = input.dims();
    let (c, h, w) = (d[0], d[1], d[2]);
    let k = kernel.dims();
    let (o, kh, kw) = (k[0], k[2], k[3]);
    let mut out = vec![0.0; o * h * w];
    for oc in 0..o {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias.data()[oc] as f64;
                for ic in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = y as isize + ky as isize - (kh / 2) as isize;
                            let ix = x as isize + kx as isize - (kw / 2) as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let wv = kernel.data()[((oc * c + ic) * kh + ky) * kw + kx] as f64;
                            acc +=
                                wv * input.data()[(ic * h + iy as usize) * w + ix as usize] as f64;
                        }
                    }
                }
                out[(oc * h + y) * w + x] = acc;
            }
        }
    }
    out
}

/// Term-by-term loss with the default normalizers and angle unit.
pub fn scalar_loss(batch: &[LossEntry], lambda: f64) -> (f64, f64, f64) {
    fn sl1(x: f64) -> f64 {
        if x.abs() < 1.0 {
            0.5 * x * x
        } else {
            x.abs() - 0.5
        }
    }
    let mut cls = 0.0;
    let mut reg = 0.0;
    let mut npos = 0.0;
    for e in batch {
        cls += -(e.probs[e.label].max(1e-12)).ln();
        if e.is_positive {
            let t: DeltaVector = e.target.unwrap();
            let p = e.predicted;
            reg += sl1(t.t_x - p.t_x);
            reg += sl1(t.t_y - p.t_y);
            reg += sl1(t.t_w - p.t_w);
            reg += sl1(t.t_h - p.t_h);
            reg += sl1((t.t_theta - p.t_theta) / 90.0);
            npos += 1.0;
        }
    }
    let n_cls = (batch.len() as f64).max(1.0);
    let n_reg = f64::max(npos, 1.0);
    (cls, reg, cls / n_cls + lambda * reg / n_reg)
}
