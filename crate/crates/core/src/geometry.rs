//! Rotated-rectangle primitives.
//!
//! Angles are radians measured counter-clockwise from the x axis and kept in
//! `[-π/2, π/2)`. The `w` side of an [`OrientedBox`] lies along the angle axis;
//! nothing forces `w >= h`.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Rotated by +π/2.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Maps any finite angle onto `[-π/2, π/2)` modulo π.
pub fn normalize_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(invalid(format!("angle must be finite, got {theta}")));
    }
    let mut r = theta - PI * ((theta + FRAC_PI_2) / PI).floor();
    if r >= FRAC_PI_2 {
        r -= PI;
    }
    if r < -FRAC_PI_2 {
        r += PI;
    }
    Ok(r)
}

/// A rotated rectangle in image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub angle: f64,
}

impl OrientedBox {
    /// Validates the extents and normalizes the angle.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, angle: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(invalid("box center must be finite"));
        }
        if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
            return Err(invalid(format!("box sides must be positive, got w={w} h={h}")));
        }
        Ok(Self {
            cx,
            cy,
            w,
            h,
            angle: normalize_angle(angle)?,
        })
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Unit vector along the `w` side.
    pub fn axis(&self) -> Point {
        Point::new(self.angle.cos(), self.angle.sin())
    }

    /// Box-frame coordinates of an image point.
    pub fn to_local(&self, p: Point) -> Point {
        let d = p - self.center();
        let u = self.axis();
        Point::new(d.dot(u), d.dot(u.perp()))
    }

    pub fn contains(&self, p: Point) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.w / 2.0 && l.y.abs() <= self.h / 2.0
    }

    pub fn corners(&self) -> Corners {
        obb_to_corners(self)
    }

    /// Axis-aligned bounds as `(min, max)`.
    pub fn bounds(&self) -> (Point, Point) {
        let c = self.corners().0;
        let mut lo = c[0];
        let mut hi = c[0];
        for p in &c[1..] {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.cx
            .total_cmp(&other.cx)
            .then(self.cy.total_cmp(&other.cy))
            .then(self.w.total_cmp(&other.w))
            .then(self.h.total_cmp(&other.h))
            .then(self.angle.total_cmp(&other.angle))
    }
}

/// Four rectangle vertices, counter-clockwise, starting at the image of the
/// box-frame corner `(+w/2, +h/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corners(pub [Point; 4]);

impl Corners {
    pub fn centroid(&self) -> Point {
        let s = self.0.iter().fold(Point::default(), |acc, &p| acc + p);
        s * 0.25
    }
}

pub fn obb_to_corners(b: &OrientedBox) -> Corners {
    let (s, c) = b.angle.sin_cos();
    let (hw, hh) = (b.w / 2.0, b.h / 2.0);
    let place = |a: f64, d: f64| Point::new(b.cx + a * c - d * s, b.cy + a * s + d * c);
    Corners([place(hw, hh), place(-hw, hh), place(-hw, -hh), place(hw, -hh)])
}

/// Least-squares rectangle fit to four cyclically ordered vertices.
///
/// The angle follows the longer of the two mean edge directions, so the fitted
/// `w` is always the longer side.
pub fn corners_to_obb(c: &Corners) -> Result<OrientedBox> {
    let v = &c.0;
    if !v.iter().all(|p| p.is_finite()) {
        return Err(invalid("corner coordinates must be finite"));
    }
    let center = c.centroid();
    let a = ((v[0] - v[1]) + (v[3] - v[2])) * 0.5;
    let b = ((v[1] - v[2]) + (v[0] - v[3])) * 0.5;
    let scale = a.dot(a) + b.dot(b);
    if scale == 0.0 || a.cross(b).abs() <= 1e-12 * scale {
        return Err(Error::DegenerateGeometry(
            "quadrilateral has zero area".to_string(),
        ));
    }
    let (long, short) = if a.norm() >= b.norm() { (a, b) } else { (b, a) };
    let angle = normalize_angle(long.y.atan2(long.x))?;
    let dir = Point::new(angle.cos(), angle.sin());
    // The short edge is measured perpendicular to the fitted axis, which
    // drops any skew of a non-rectangular parallelogram.
    let w = long.norm();
    let h = short.dot(dir.perp()).abs();
    OrientedBox::new(center.x, center.y, w, h, angle)
}

/// Signed shoelace area; positive for counter-clockwise polygons.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n).map(|i| poly[i].cross(poly[(i + 1) % n])).sum();
    twice / 2.0
}

/// Clips a convex polygon against the left half-plane of each edge of a
/// counter-clockwise convex clip polygon (Sutherland–Hodgman).
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut output: Vec<Point> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let e0 = clip[i];
        let e1 = clip[(i + 1) % n];
        let edge = e1 - e0;
        let side = |p: Point| edge.cross(p - e0);
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(intersect(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(p: Point, q: Point, sp: f64, sq: f64) -> Point {
    let t = sp / (sp - sq);
    p + (q - p) * t
}

/// Area of the intersection of two oriented boxes.
pub fn intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let poly = clip_convex(&a.corners().0, &b.corners().0);
    let area = signed_area(&poly);
    let cap = a.area().min(b.area());
    if area <= cap * 1e-14 {
        0.0
    } else {
        area.min(cap)
    }
}

/// Intersection over union of two oriented boxes.
///
/// The arguments are put in a canonical order first so the result is
/// bit-identical under swapping.
pub fn rotated_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let (a, b) = if a.total_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let inter = intersection_area(a, b);
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Unsigned angle between the long axes of two boxes, in `[0, π/2]`.
pub fn orientation_error(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let major = |x: &OrientedBox| {
        if x.w >= x.h {
            x.angle
        } else {
            x.angle + FRAC_PI_2
        }
    };
    let d = (major(a) - major(b)).rem_euclid(PI);
    d.min(PI - d)
}
