//! Planar geometry used by the evaluator and the candidate pre-checks:
//! angle wrapping, simple polygons, point containment, intersection and
//! distance queries, and convex hulls.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum absolute area for a polygon to count as non-degenerate.
pub const MIN_POLYGON_AREA: f64 = 1e-12;

/// Wraps an angle into `(-π, π]`.
///
/// Values that land within a few ulps of `±π` snap to `π`, so
/// `wrap_angle(3π) == π` despite the rounding in `3π mod 2π`.
pub fn wrap_angle(rad: f64) -> f64 {
    if !rad.is_finite() {
        return rad;
    }
    let r = rad.rem_euclid(TAU);
    let tol = 4.0 * f64::EPSILON * rad.abs().max(1.0);
    if (r - PI).abs() <= tol {
        PI
    } else if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn from_angle(rad: f64) -> Self {
        Self::new(rad.cos(), rad.sin())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Orientation of the triple `(a, b, c)`: positive for a left turn.
fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) - 1e-12
        && p.x <= a.x.max(b.x) + 1e-12
        && p.y >= a.y.min(b.y) - 1e-12
        && p.y <= a.y.max(b.y) + 1e-12
}

/// Closed-segment intersection test, touching endpoints included.
pub fn segments_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(b1, b2, a1))
        || (d2 == 0.0 && on_segment(b1, b2, a2))
        || (d3 == 0.0 && on_segment(a1, a2, b1))
        || (d4 == 0.0 && on_segment(a1, a2, b2))
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

pub fn segment_distance(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> f64 {
    if segments_intersect(a1, a2, b1, b2) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

/// A simple polygon with non-zero area. Vertex order may be either
/// orientation; the closing edge is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl TryFrom<Vec<Vec2>> for Polygon {
    type Error = Error;
    fn try_from(v: Vec<Vec2>) -> Result<Self> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<Vec2> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("polygon has non-finite vertex"));
        }
        let poly = Self { vertices };
        if poly.area() <= MIN_POLYGON_AREA {
            return Err(Error::invalid("degenerate polygon (zero area)"));
        }
        Ok(poly)
    }

    pub fn from_points(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(points.iter().map(|&p| Vec2::from(p)).collect())
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let mut sign = 0.0f64;
        for i in 0..n {
            let o = orient(
                self.vertices[i],
                self.vertices[(i + 1) % n],
                self.vertices[(i + 2) % n],
            );
            if o != 0.0 {
                if sign != 0.0 && o.signum() != sign {
                    return false;
                }
                sign = o.signum();
            }
        }
        true
    }

    /// Point containment; points on the boundary count as inside.
    pub fn contains(&self, p: Vec2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if orient(a, b, p).abs() <= 1e-12 * (1.0 + (b - a).norm()) && on_segment(a, b, p) {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Overlap test for closed polygons (touching counts). Convex pairs use
    /// the separating-axis theorem; otherwise edge crossings plus mutual
    /// containment.
    pub fn intersects(&self, other: &Polygon) -> bool {
        if self.is_convex() && other.is_convex() {
            return !self.has_separating_axis(other) && !other.has_separating_axis(self);
        }
        for (a1, a2) in self.edges() {
            for (b1, b2) in other.edges() {
                if segments_intersect(a1, a2, b1, b2) {
                    return true;
                }
            }
        }
        other.contains(self.vertices[0]) || self.contains(other.vertices[0])
    }

    fn has_separating_axis(&self, other: &Polygon) -> bool {
        self.edges().any(|(a, b)| {
            let e = b - a;
            let axis = Vec2::new(-e.y, e.x);
            let (min_a, max_a) = project(&self.vertices, axis);
            let (min_b, max_b) = project(&other.vertices, axis);
            max_a < min_b || max_b < min_a
        })
    }

    /// Minimum Euclidean distance between the two closed polygons.
    pub fn distance(&self, other: &Polygon) -> f64 {
        if self.intersects(other) {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for (a1, a2) in self.edges() {
            for (b1, b2) in other.edges() {
                best = best.min(segment_distance(a1, a2, b1, b2));
            }
        }
        best
    }

    pub fn translated(&self, d: Vec2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&v| v + d).collect(),
        }
    }
}

fn project(points: &[Vec2], axis: Vec2) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let d = p.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Convenience wrapper over [`Polygon::intersects`].
pub fn polygons_intersect(a: &Polygon, b: &Polygon) -> bool {
    a.intersects(b)
}

/// Convex hull by monotone chain, counter-clockwise, without collinear
/// points. Fewer than three distinct non-collinear points yield a
/// degenerate hull (returned as-is).
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Shoelace area of a (possibly degenerate) vertex ring; 0 for fewer than
/// three points.
pub fn ring_area(ring: &[Vec2]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let n = ring.len();
    0.5 * (0..n)
        .map(|i| ring[i].cross(ring[(i + 1) % n]))
        .sum::<f64>()
        .abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Polygon {
        Polygon::rect(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn wrap_angle_edges() {
        assert_eq!(wrap_angle(0.0), 0.0);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(3.0 * PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(-PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_angle(2.5 * PI) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let a = rng.gen_range(-100.0..100.0);
            let w = wrap_angle(a);
            assert!(w > -PI && w <= PI, "{a} -> {w}");
            assert!(((a - w) / TAU - ((a - w) / TAU).round()).abs() < 1e-9);
        }
    }

    #[test]
    fn disjoint_and_overlapping_squares() {
        let a = unit_square();
        assert!(!a.intersects(&a.translated(Vec2::new(2.0, 0.0))));
        assert!(a.intersects(&a.translated(Vec2::new(0.5, 0.0))));
        // touching edges count as contact
        assert!(a.intersects(&a.translated(Vec2::new(1.0, 0.0))));
    }

    #[test]
    fn degenerate_polygon_rejected() {
        let r = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(2.0, 2.0),
        ]);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
        assert!(Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn concave_containment_and_intersection() {
        // U shape opening upward
        let u = Polygon::from_points(&[
            [0.0, 0.0],
            [3.0, 0.0],
            [3.0, 3.0],
            [2.0, 3.0],
            [2.0, 1.0],
            [1.0, 1.0],
            [1.0, 3.0],
            [0.0, 3.0],
        ])
        .unwrap();
        assert!(!u.is_convex());
        assert!(u.contains(Vec2::new(0.5, 2.0)));
        assert!(!u.contains(Vec2::new(1.5, 2.0)));
        let notch = Polygon::rect(1.2, 1.5, 1.8, 2.5).unwrap();
        assert!(!u.intersects(&notch));
        let inner = Polygon::rect(0.2, 0.2, 0.4, 0.4).unwrap();
        assert!(u.intersects(&inner));
        assert!(inner.intersects(&u));
    }

    #[test]
    fn distance_between_boxes() {
        let a = unit_square();
        let b = a.translated(Vec2::new(3.0, 0.0));
        assert!((a.distance(&b) - 2.0).abs() < 1e-12);
        let c = a.translated(Vec2::new(2.0, 2.0));
        assert!((a.distance(&c) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.5, 0.5),
            Vec2::new(0.5, 0.0),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((ring_area(&hull) - 1.0).abs() < 1e-12);
        let line = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)];
        assert_eq!(ring_area(&convex_hull(&line)), 0.0);
    }

    fn random_convex(rng: &mut ChaCha8Rng) -> Polygon {
        let cx = rng.gen_range(-2.0..2.0);
        let cy = rng.gen_range(-2.0..2.0);
        let n = rng.gen_range(3..8);
        let mut angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let r = rng.gen_range(0.3..1.5);
        let pts: Vec<Vec2> = angles
            .iter()
            .map(|&a| Vec2::new(cx + r * a.cos(), cy + r * a.sin()))
            .collect();
        let hull = convex_hull(&pts);
        Polygon::new(hull).unwrap_or_else(|_| random_convex(rng))
    }

    /// Dense sampling oracle: boundary points of each polygon tested for
    /// containment in the other, plus an interior grid over the shared box.
    fn sampled_overlap(a: &Polygon, b: &Polygon) -> bool {
        let boundary_hit = |p: &Polygon, q: &Polygon| {
            p.edges().any(|(u, v)| {
                (0..=400).any(|k| q.contains(u + (v - u) * (k as f64 / 400.0)))
            })
        };
        if boundary_hit(a, b) || boundary_hit(b, a) {
            return true;
        }
        let bbox = |p: &Polygon| {
            p.vertices().iter().fold(
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
                |(x0, y0, x1, y1), v| (x0.min(v.x), y0.min(v.y), x1.max(v.x), y1.max(v.y)),
            )
        };
        let (ax0, ay0, ax1, ay1) = bbox(a);
        let (bx0, by0, bx1, by1) = bbox(b);
        let (x0, y0, x1, y1) = (ax0.max(bx0), ay0.max(by0), ax1.min(bx1), ay1.min(by1));
        if x0 > x1 || y0 > y1 {
            return false;
        }
        let n = 200;
        (0..=n).any(|i| {
            (0..=n).any(|j| {
                let p = Vec2::new(
                    x0 + (x1 - x0) * i as f64 / n as f64,
                    y0 + (y1 - y0) * j as f64 / n as f64,
                );
                a.contains(p) && b.contains(p)
            })
        })
    }

    #[test]
    fn intersection_matches_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(20240611);
        let mut hits = 0;
        for _ in 0..200 {
            let a = random_convex(&mut rng);
            let b = random_convex(&mut rng);
            let fast = a.intersects(&b);
            assert_eq!(fast, sampled_overlap(&a, &b), "{a:?} vs {b:?}");
            // the general path must agree with SAT on convex input
            let general = a.edges().any(|(a1, a2)| b.edges().any(|(b1, b2)| segments_intersect(a1, a2, b1, b2)))
                || a.contains(b.vertices()[0])
                || b.contains(a.vertices()[0]);
            assert_eq!(fast, general);
            hits += fast as usize;
        }
        assert!(hits > 20 && hits < 180, "unbalanced sample: {hits}");
    }
}
