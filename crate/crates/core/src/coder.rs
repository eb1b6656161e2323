//! Anchor-relative regression deltas for rotated boxes.
//!
//! The angle residual is wrapped by a multiple `k` of 90° chosen to minimize
//! its magnitude; an odd `k` exchanges the target's width and height so the
//! encoded box keeps its point set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::RotatedBox;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeltaVector {
    pub t_x: f64,
    pub t_y: f64,
    pub t_w: f64,
    pub t_h: f64,
    /// Degrees, `|t_theta| <= 45` when produced by [`encode`].
    pub t_theta: f64,
}

impl DeltaVector {
    pub fn new(t_x: f64, t_y: f64, t_w: f64, t_h: f64, t_theta: f64) -> Self {
        Self {
            t_x,
            t_y,
            t_w,
            t_h,
            t_theta,
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.t_x, self.t_y, self.t_w, self.t_h, self.t_theta]
    }
}

/// Default bound on `|t_w|`, `|t_h|` before exponentiation.
pub const DEFAULT_SIZE_CLAMP: f64 = 8.0;

/// Smallest residual `θ_target − θ_anchor + 90k` and the `k` that produces it.
///
/// Ties (exactly ±45°) go to the `k` of smaller magnitude, then the negative one.
pub fn angle_residual(theta_anchor: f64, theta_target: f64) -> (f64, i32) {
    let diff = theta_target - theta_anchor;
    let base = (diff / 90.0).round() as i32;
    let mut best = (f64::INFINITY, 0i32);
    for k in [-base - 1, -base, -base + 1] {
        let t = diff + 90.0 * k as f64;
        let better = match t.abs().total_cmp(&best.0.abs()) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => (k.abs(), k) < (best.1.abs(), best.1),
            std::cmp::Ordering::Greater => false,
        };
        if better {
            best = (t, k);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCoder {
    /// `t_w` and `t_h` are clamped to `[-size_clamp, size_clamp]` at decode.
    pub size_clamp: f64,
}

impl Default for BoxCoder {
    fn default() -> Self {
        Self {
            size_clamp: DEFAULT_SIZE_CLAMP,
        }
    }
}

impl BoxCoder {
    pub fn encode(&self, anchor: &RotatedBox, target: &RotatedBox) -> DeltaVector {
        let (t_theta, k) = angle_residual(anchor.theta(), target.theta());
        let (tw, th) = if k % 2 != 0 {
            (target.h(), target.w())
        } else {
            (target.w(), target.h())
        };
        DeltaVector {
            t_x: (target.x() - anchor.x()) / anchor.w(),
            t_y: (target.y() - anchor.y()) / anchor.h(),
            t_w: (tw / anchor.w()).ln(),
            t_h: (th / anchor.h()).ln(),
            t_theta,
        }
    }

    pub fn decode(&self, anchor: &RotatedBox, delta: &DeltaVector) -> Result<RotatedBox> {
        let names = ["t_x", "t_y", "t_w", "t_h", "t_theta"];
        for (name, v) in names.iter().zip(delta.to_array()) {
            if !v.is_finite() {
                return Err(Error::NonFinite { component: name });
            }
        }
        let c = self.size_clamp;
        let x = delta.t_x * anchor.w() + anchor.x();
        let y = delta.t_y * anchor.h() + anchor.y();
        let w = anchor.w() * delta.t_w.clamp(-c, c).exp();
        let h = anchor.h() * delta.t_h.clamp(-c, c).exp();
        let theta = anchor.theta() + delta.t_theta;
        for (name, v) in [("x", x), ("y", y), ("w", w), ("h", h), ("theta", theta)] {
            if !v.is_finite() {
                return Err(Error::NonFinite { component: name });
            }
        }
        RotatedBox::new(x, y, w, h, theta)
    }
}

pub fn encode(anchor: &RotatedBox, target: &RotatedBox) -> DeltaVector {
    BoxCoder::default().encode(anchor, target)
}

pub fn decode(anchor: &RotatedBox, delta: &DeltaVector) -> Result<RotatedBox> {
    BoxCoder::default().decode(anchor, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64, w: f64, h: f64, t: f64) -> RotatedBox {
        RotatedBox::new(x, y, w, h, t).unwrap()
    }

    #[test]
    fn identity_and_shift() {
        let a = bx(0.0, 0.0, 10.0, 70.0, -90.0);
        assert_eq!(encode(&a, &a), DeltaVector::default());
        let g = bx(5.0, 0.0, 10.0, 70.0, -90.0);
        assert_eq!(encode(&a, &g), DeltaVector::new(0.5, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn wrap_and_swap() {
        let a = bx(0.0, 0.0, 10.0, 70.0, -85.0);
        let g = bx(0.0, 0.0, 12.0, 60.0, -5.0);
        let d = encode(&a, &g);
        assert!((d.t_theta + 10.0).abs() < 1e-12);
        assert!((d.t_w - (60.0f64 / 10.0).ln()).abs() < 1e-12);
        assert!((d.t_h - (12.0f64 / 70.0).ln()).abs() < 1e-12);
        let back = decode(&a, &d).unwrap();
        for (u, v) in [
            (back.x(), g.x()),
            (back.y(), g.y()),
            (back.w(), g.w()),
            (back.h(), g.h()),
            (back.theta(), g.theta()),
        ] {
            assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn decode_examples() {
        let a = bx(3.0, -2.0, 10.0, 70.0, -85.0);
        assert_eq!(decode(&a, &DeltaVector::default()).unwrap(), a);

        let a = bx(0.0, 0.0, 10.0, 70.0, -85.0);
        let b = decode(&a, &DeltaVector::new(0.0, 0.0, 0.0, 0.0, -10.0)).unwrap();
        assert_eq!((b.w(), b.h()), (70.0, 10.0));
        assert!((b.theta() + 5.0).abs() < 1e-12);
    }

    #[test]
    fn decode_rejects_non_finite_and_clamps() {
        let a = bx(0.0, 0.0, 10.0, 10.0, -45.0);
        let err = decode(&a, &DeltaVector::new(0.0, f64::NAN, 0.0, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { component: "t_y" }));
        let big = decode(&a, &DeltaVector::new(0.0, 0.0, 1e6, -1e6, 0.0)).unwrap();
        let hi = 10.0 * 8f64.exp();
        let lo = 10.0 * (-8f64).exp();
        assert!((big.w().max(big.h()) - hi).abs() < 1e-6);
        assert!((big.w().min(big.h()) - lo).abs() < 1e-12);
    }

    #[test]
    fn residual_ties() {
        assert_eq!(angle_residual(-90.0, -45.0), (45.0, 0));
        assert_eq!(angle_residual(-45.0, -90.0), (-45.0, 0));
        assert_eq!(angle_residual(-85.0, -5.0), (-10.0, -1));
        assert_eq!(angle_residual(-5.0, -85.0), (10.0, 1));
    }

    #[test]
    fn equivalent_targets_encode_identically() {
        let a = bx(1.0, 2.0, 20.0, 60.0, -30.0);
        let g1 = bx(4.0, 5.0, 12.0, 40.0, -70.0);
        let g2 = bx(4.0, 5.0, 40.0, 12.0, 20.0);
        let g3 = bx(4.0, 5.0, 12.0, 40.0, 110.0);
        assert_eq!(encode(&a, &g1), encode(&a, &g2));
        assert_eq!(encode(&a, &g1), encode(&a, &g3));
    }
}
