//! Oriented rectangles and the convex-polygon machinery behind skew IoU.
//!
//! A [`RotatedBox`] is `(x, y, w, h, theta)` with `theta` in degrees. The width
//! runs along `u = (cos θ, sin θ)` and the height along `v = (-sin θ, cos θ)`,
//! in image coordinates (x = column, y = row). Every constructed box is
//! canonical: `theta ∈ [-90, 0)`.
//!
//! Polygons are ordered so that their signed shoelace area is positive.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points closer than this to a clipping line count as on the line.
pub const CLIP_EPS: f64 = 1e-9;

/// Intersections smaller than this fraction of the smaller box are contact, not overlap.
const CONTACT_AREA_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    fn dist2(self, o: Point) -> f64 {
        let d = self.sub(o);
        d.x * d.x + d.y * d.y
    }
}

/// Wire form of a box: any angle, any representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

/// Canonical five-parameter oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct RotatedBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    theta: f64,
}

impl TryFrom<RawBox> for RotatedBox {
    type Error = Error;

    fn try_from(r: RawBox) -> Result<Self> {
        canonicalize(r.x, r.y, r.w, r.h, r.theta)
    }
}

impl From<RotatedBox> for RawBox {
    fn from(b: RotatedBox) -> Self {
        RawBox {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            theta: b.theta,
        }
    }
}

/// Bring any `(x, y, w, h, theta)` description to the canonical box with the same point set.
///
/// Adding 180° never changes the point set; adding 90° does when `w` and `h`
/// are exchanged. Boxes already in `[-90, 0)` are returned untouched, which
/// makes the operation idempotent bit for bit.
pub fn canonicalize(x: f64, y: f64, w: f64, h: f64, theta: f64) -> Result<RotatedBox> {
    if ![x, y, w, h, theta].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidBox(format!(
            "non-finite parameter in ({x}, {y}, {w}, {h}, {theta})"
        )));
    }
    if w <= 0.0 || h <= 0.0 {
        return Err(Error::InvalidBox(format!(
            "w and h must be positive, got {w} x {h}"
        )));
    }
    let (w, h, theta) = if (-90.0..0.0).contains(&theta) {
        (w, h, theta)
    } else {
        // rem_euclid may round up to exactly 180 for tiny negative inputs.
        let mut r = theta.rem_euclid(180.0);
        if r >= 180.0 {
            r = 0.0;
        }
        if r >= 90.0 {
            (w, h, r - 180.0)
        } else {
            (h, w, r - 90.0)
        }
    };
    Ok(RotatedBox { x, y, w, h, theta })
}

impl RotatedBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        canonicalize(x, y, w, h, theta)
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    /// Degrees, in `[-90, 0)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Same box moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> RotatedBox {
        RotatedBox {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    /// `(cos θ, sin θ)`, exact for the axis-aligned angle.
    fn direction(&self) -> (f64, f64) {
        if self.theta == -90.0 {
            (0.0, -1.0)
        } else {
            let r = self.theta.to_radians();
            (r.cos(), r.sin())
        }
    }

    fn corner_points(&self) -> [Point; 4] {
        let (c, s) = self.direction();
        let (hw, hh) = (0.5 * self.w, 0.5 * self.h);
        let (ux, uy) = (hw * c, hw * s);
        let (vx, vy) = (-hh * s, hh * c);
        [
            Point::new(self.x - ux - vx, self.y - uy - vy),
            Point::new(self.x + ux - vx, self.y + uy - vy),
            Point::new(self.x + ux + vx, self.y + uy + vy),
            Point::new(self.x - ux + vx, self.y - uy + vy),
        ]
    }

    /// Total order on the five parameters; fixes argument order inside [`skew_iou`].
    pub(crate) fn key_cmp(&self, o: &RotatedBox) -> Ordering {
        self.x
            .total_cmp(&o.x)
            .then(self.y.total_cmp(&o.y))
            .then(self.w.total_cmp(&o.w))
            .then(self.h.total_cmp(&o.h))
            .then(self.theta.total_cmp(&o.theta))
    }
}

/// Axis-aligned rectangle `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HRect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl HRect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) {
            return Err(Error::InvalidBox(format!(
                "rect ({xmin}, {ymin}, {xmax}, {ymax}) is empty"
            )));
        }
        Ok(Self {
            xmin,
            ymin,
            xmax,
            ymax,
        })
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// False only when the closed rectangles are disjoint.
    pub fn touches(&self, o: &HRect) -> bool {
        self.xmin <= o.xmax && o.xmin <= self.xmax && self.ymin <= o.ymax && o.ymin <= self.ymax
    }

    pub fn intersection_area(&self, o: &HRect) -> f64 {
        let iw = self.xmax.min(o.xmax) - self.xmin.max(o.xmin);
        let ih = self.ymax.min(o.ymax) - self.ymin.max(o.ymin);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }
}

/// Convex polygon with positively oriented vertices. May be empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates convexity; clockwise input is reversed.
    pub fn from_vertices(mut vertices: Vec<Point>) -> Result<Self> {
        if vertices
            .iter()
            .any(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        if vertices.len() < 3 {
            return Ok(Self::empty());
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            let turn = b.sub(a).cross(c.sub(b));
            let scale = b.dist2(a).sqrt() * c.dist2(b).sqrt();
            if turn < -CLIP_EPS * scale.max(1.0) {
                return Err(Error::InvalidPolygon(format!(
                    "reflex vertex at index {}",
                    (i + 1) % n
                )));
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            signed_area(&self.vertices).max(0.0)
        }
    }
}

fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let mut acc = 0.0;
    for i in 0..n {
        acc += pts[i].cross(pts[(i + 1) % n]);
    }
    0.5 * acc
}

/// The four corners, positively oriented.
pub fn corners(b: &RotatedBox) -> ConvexPolygon {
    ConvexPolygon {
        vertices: b.corner_points().to_vec(),
    }
}

/// Tight axis-aligned bounds of the corners.
pub fn hrect(b: &RotatedBox) -> HRect {
    bounds(&b.corner_points())
}

fn bounds(pts: &[Point; 4]) -> HRect {
    let mut r = HRect {
        xmin: f64::INFINITY,
        ymin: f64::INFINITY,
        xmax: f64::NEG_INFINITY,
        ymax: f64::NEG_INFINITY,
    };
    for p in pts {
        r.xmin = r.xmin.min(p.x);
        r.ymin = r.ymin.min(p.y);
        r.xmax = r.xmax.max(p.x);
        r.ymax = r.ymax.max(p.y);
    }
    r
}

/// Clip `subject` by every edge half-plane of `clip`.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = subject.to_vec();
    let mut scratch: Vec<Point> = Vec::with_capacity(subject.len() + clip.len());
    let n = clip.len();
    for i in 0..n {
        if out.len() < 3 {
            out.clear();
            return out;
        }
        let p = clip[i];
        let edge = clip[(i + 1) % n].sub(p);
        let len = (edge.x * edge.x + edge.y * edge.y).sqrt();
        if len == 0.0 {
            continue;
        }
        // negative distance = outside (right of the edge)
        let dist = |q: Point| edge.cross(q.sub(p)) / len;
        scratch.clear();
        let m = out.len();
        let mut prev = out[m - 1];
        let mut d_prev = dist(prev);
        for &cur in out.iter() {
            let d_cur = dist(cur);
            let cur_in = d_cur >= -CLIP_EPS;
            let prev_in = d_prev >= -CLIP_EPS;
            if cur_in != prev_in {
                let t = d_prev / (d_prev - d_cur);
                scratch.push(Point::new(
                    prev.x + t * (cur.x - prev.x),
                    prev.y + t * (cur.y - prev.y),
                ));
            }
            if cur_in {
                scratch.push(cur);
            }
            prev = cur;
            d_prev = d_cur;
        }
        std::mem::swap(&mut out, &mut scratch);
    }
    dedup_ring(&mut out);
    if out.len() < 3 {
        out.clear();
    }
    out
}

fn dedup_ring(pts: &mut Vec<Point>) {
    let eps2 = CLIP_EPS * CLIP_EPS;
    pts.dedup_by(|b, a| a.dist2(*b) <= eps2);
    while pts.len() > 1 && pts[0].dist2(pts[pts.len() - 1]) <= eps2 {
        pts.pop();
    }
}

/// Intersection of two convex polygons; empty when they share no area.
pub fn intersect_convex(a: &ConvexPolygon, b: &ConvexPolygon) -> ConvexPolygon {
    if a.is_empty() || b.is_empty() {
        return ConvexPolygon::empty();
    }
    let vertices = clip_convex(&a.vertices, &b.vertices);
    ConvexPolygon { vertices }
}

/// Box with its corners and bounds computed once, for repeated IoU queries.
#[derive(Debug, Clone, Copy)]
pub struct PreparedBox {
    pub boxed: RotatedBox,
    corners: [Point; 4],
    bounds: HRect,
}

impl PreparedBox {
    pub fn new(b: RotatedBox) -> Self {
        let corners = b.corner_points();
        Self {
            boxed: b,
            corners,
            bounds: bounds(&corners),
        }
    }

    pub fn hrect(&self) -> HRect {
        self.bounds
    }
}

/// Skew IoU of two prepared boxes. Argument order never affects the result.
pub fn skew_iou_prepared(a: &PreparedBox, b: &PreparedBox) -> f64 {
    if !a.bounds.touches(&b.bounds) {
        return 0.0;
    }
    let (p, q) = if a.boxed.key_cmp(&b.boxed) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    // Work relative to one center so large scene coordinates do not cost precision.
    let o = p.boxed.center();
    let pa: [Point; 4] = p.corners.map(|c| c.sub(o));
    let qa: [Point; 4] = q.corners.map(|c| c.sub(o));
    let area_p = signed_area(&pa);
    let area_q = signed_area(&qa);
    let inter_poly = clip_convex(&pa, &qa);
    if inter_poly.is_empty() {
        return 0.0;
    }
    let inter = signed_area(&inter_poly);
    if inter <= CONTACT_AREA_REL * area_p.min(area_q) {
        return 0.0;
    }
    let union = area_p + area_q - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Intersection over union of the true rotated rectangles.
pub fn skew_iou(a: &RotatedBox, b: &RotatedBox) -> f64 {
    skew_iou_prepared(&PreparedBox::new(*a), &PreparedBox::new(*b))
}

/// Plain axis-aligned IoU.
pub fn hrect_iou(a: &HRect, b: &HRect) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    (inter / (a.area() + b.area() - inter)).clamp(0.0, 1.0)
}
