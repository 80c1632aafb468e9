//! Assignment-boundary geometry.
//!
//! The boundary is an oriented piecewise-linear curve. One side of the
//! oriented curve is the treatment region `A1`; the other is the control
//! region `A0`; points on the curve itself belong to `A1`. This module owns
//! closest-point projection, side classification, signed distances, segment
//! partitions with nearest-piece assignment, even-arclength discretization,
//! and arclength line integrals.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point in score space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
}

impl Point {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Point { x1, x2 }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    /// 2-D cross product (signed parallelogram area).
    pub fn cross(self, other: Point) -> f64 {
        self.x1 * other.x2 - self.x2 * other.x1
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x1 * s, self.x2 * s)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x1, self.x2)
    }
}

/// Which side of the oriented curve is treated, relative to the direction of
/// travel along the vertex list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Region label: `A0` control, `A1` treated. Points on the boundary are `A1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    A0,
    A1,
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("boundary needs at least {0} vertices")]
    TooFewVertices(usize),

    #[error("consecutive boundary vertices {0} and {1} coincide")]
    DegenerateSegment(usize, usize),

    #[error("boundary polyline is self-intersecting (segments {0} and {1})")]
    SelfIntersecting(usize, usize),

    #[error("non-finite vertex coordinate at index {0}")]
    NonFiniteVertex(usize),

    #[error("invalid grid size {j}: need at least {min} points")]
    InvalidGrid { j: usize, min: usize },

    #[error("anchor point is not on the boundary (distance {0})")]
    AnchorOffBoundary(f64),

    #[error("partition breakpoints must be strictly increasing inside (0, total length)")]
    BadPartition,

    #[error("boundary file, line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Oriented piecewise-linear assignment boundary.
///
/// Invariants enforced at construction: at least two vertices (three for a
/// closed loop), consecutive vertices distinct, simple (non-self-intersecting),
/// cumulative arclength strictly increasing with last entry equal to the total
/// length.
///
/// ```
/// use bdd::geometry::{Boundary, Point, Side};
///
/// // L-shaped boundary with the first quadrant treated
/// let b = Boundary::new(
///     vec![Point::new(1.0, 0.0), Point::new(0.0, 0.0), Point::new(0.0, 1.0)],
///     false,
///     Side::Right,
/// )?;
/// assert_eq!(b.total_length(), 2.0);
/// assert_eq!(b.signed_distance(Point::new(0.3, 0.4)), 0.3);
/// assert_eq!(b.signed_distance(Point::new(-0.2, 0.5)), -0.2);
/// # Ok::<(), bdd::geometry::GeometryError>(())
/// ```
#[derive(Debug, Clone)]
pub struct Boundary {
    vertices: Vec<Point>,
    closed: bool,
    treated_side: Side,
    /// Running arclength; entry `i` is the position of vertex `i`, plus a
    /// final entry equal to the total length for closed curves.
    cum_len: Vec<f64>,
}

/// Result of projecting a query point onto the boundary.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Projection {
    /// Nearest point on the boundary.
    pub point: Point,
    /// Arclength position of that point in `[0, |B|]`.
    pub arclength: f64,
    /// Euclidean distance from the query to `point`.
    pub distance: f64,
}

/// Internal projection detail: which segment, and where along it.
#[derive(Debug, Clone, Copy)]
struct Hit {
    seg: usize,
    t: f64,
    point: Point,
    arclength: f64,
    distance: f64,
}

impl Boundary {
    pub fn new(vertices: Vec<Point>, closed: bool, treated_side: Side) -> Result<Self, GeometryError> {
        let min = if closed { 3 } else { 2 };
        if vertices.len() < min {
            return Err(GeometryError::TooFewVertices(min));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(GeometryError::NonFiniteVertex(i));
            }
        }
        let n_seg = if closed { vertices.len() } else { vertices.len() - 1 };
        let mut cum_len = Vec::with_capacity(n_seg + 1);
        cum_len.push(0.0);
        for i in 0..n_seg {
            let a = vertices[i];
            let b = vertices[(i + 1) % vertices.len()];
            let len = a.dist(b);
            if len == 0.0 {
                return Err(GeometryError::DegenerateSegment(i, (i + 1) % vertices.len()));
            }
            cum_len.push(cum_len[i] + len);
        }
        let boundary = Boundary { vertices, closed, treated_side, cum_len };
        boundary.check_simple()?;
        Ok(boundary)
    }

    fn check_simple(&self) -> Result<(), GeometryError> {
        let m = self.n_segments();
        for i in 0..m {
            let (a1, b1) = self.segment(i);
            for j in (i + 1)..m {
                let adjacent = j == i + 1 || (self.closed && i == 0 && j == m - 1);
                let (a2, b2) = self.segment(j);
                if adjacent {
                    // shared vertex is fine; a 180-degree fold is not
                    let (d1, d2) = if j == i + 1 {
                        (b1 - a1, b2 - a2)
                    } else {
                        (b2 - a2, b1 - a1) // wrap: segment m-1 flows into 0
                    };
                    if d1.cross(d2) == 0.0 && d1.dot(d2) < 0.0 {
                        return Err(GeometryError::SelfIntersecting(i, j));
                    }
                } else if segments_touch(a1, b1, a2, b2) {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn treated_side(&self) -> Side {
        self.treated_side
    }

    /// Flip which side of the curve is treated.
    pub fn with_treated_side(&self, side: Side) -> Boundary {
        let mut b = self.clone();
        b.treated_side = side;
        b
    }

    pub fn cumulative_arclength(&self) -> &[f64] {
        &self.cum_len
    }

    pub fn total_length(&self) -> f64 {
        *self.cum_len.last().unwrap()
    }

    pub fn n_segments(&self) -> usize {
        if self.closed { self.vertices.len() } else { self.vertices.len() - 1 }
    }

    pub fn segment(&self, i: usize) -> (Point, Point) {
        let a = self.vertices[i];
        let b = self.vertices[(i + 1) % self.vertices.len()];
        (a, b)
    }

    fn segment_len(&self, i: usize) -> f64 {
        self.cum_len[i + 1] - self.cum_len[i]
    }

    /// Relative tolerance used to decide whether a point lies on the boundary.
    pub fn on_tolerance(&self) -> f64 {
        1e-9 * self.total_length()
    }

    /// Point at a given arclength position (clamped to `[0, |B|]`).
    pub fn point_at(&self, s: f64) -> Point {
        let total = self.total_length();
        let s = s.clamp(0.0, total);
        if self.closed && s == total {
            return self.vertices[0];
        }
        // index of the segment containing s
        let mut seg = match self.cum_len.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if seg >= self.n_segments() {
            seg = self.n_segments() - 1;
        }
        let (a, b) = self.segment(seg);
        let len = self.segment_len(seg);
        let t = (s - self.cum_len[seg]) / len;
        if t <= 0.0 {
            a
        } else if t >= 1.0 {
            b
        } else {
            a + (b - a) * t
        }
    }

    fn project_detail(&self, q: Point) -> Hit {
        let mut best: Option<Hit> = None;
        for i in 0..self.n_segments() {
            let (a, b) = self.segment(i);
            let d = b - a;
            let len = self.segment_len(i);
            let t = ((q - a).dot(d) / (len * len)).clamp(0.0, 1.0);
            // keep vertex projections exact so ties across segments are exact
            let p = if t == 0.0 {
                a
            } else if t == 1.0 {
                b
            } else {
                a + d * t
            };
            let dist = q.dist(p);
            let arclength = self.cum_len[i] + t * len;
            let better = match &best {
                None => true,
                Some(h) => dist < h.distance || (dist == h.distance && arclength < h.arclength),
            };
            if better {
                best = Some(Hit { seg: i, t, point: p, arclength, distance: dist });
            }
        }
        best.unwrap()
    }

    /// Global closest-point projection; ties across segments resolve to the
    /// smallest arclength.
    pub fn closest_point(&self, q: Point) -> Projection {
        let h = self.project_detail(q);
        Projection { point: h.point, arclength: h.arclength, distance: h.distance }
    }

    /// Classify a query point as treated (`A1`) or control (`A0`).
    ///
    /// Points within the on-boundary tolerance are treated. Elsewhere the
    /// side is the sign of the cross product against the nearest segment's
    /// direction; at corners an angular-sector rule applies (a left turn
    /// requires the query to be left of both adjacent segments, a right turn
    /// left of either).
    pub fn region_of(&self, q: Point) -> Region {
        let h = self.project_detail(q);
        if h.distance <= self.on_tolerance() {
            return Region::A1;
        }
        let left = self.is_left_of(&h, q);
        match (left, self.treated_side) {
            (true, Side::Left) | (false, Side::Right) => Region::A1,
            _ => Region::A0,
        }
    }

    fn direction(&self, seg: usize) -> Point {
        let (a, b) = self.segment(seg);
        let d = b - a;
        d * (1.0 / d.norm())
    }

    fn is_left_of(&self, h: &Hit, q: Point) -> bool {
        let m = self.n_segments();
        // corner (or terminal) cases arise from clamped projections
        let corner: Option<(Point, Option<usize>, Option<usize>)> = if h.t == 0.0 {
            let (a, _) = self.segment(h.seg);
            let prev = if h.seg > 0 {
                Some(h.seg - 1)
            } else if self.closed {
                Some(m - 1)
            } else {
                None
            };
            Some((a, prev, Some(h.seg)))
        } else if h.t == 1.0 {
            let (_, b) = self.segment(h.seg);
            let next = if h.seg + 1 < m {
                Some(h.seg + 1)
            } else if self.closed {
                Some(0)
            } else {
                None
            };
            Some((b, Some(h.seg), next))
        } else {
            None
        };
        match corner {
            None => self.direction(h.seg).cross(q - h.point) > 0.0,
            Some((v, prev, next)) => match (prev, next) {
                (Some(i), Some(j)) => {
                    let din = self.direction(i);
                    let dout = self.direction(j);
                    let left_in = din.cross(q - v) > 0.0;
                    let left_out = dout.cross(q - v) > 0.0;
                    let turn = din.cross(dout);
                    if turn > 0.0 {
                        left_in && left_out
                    } else if turn < 0.0 {
                        left_in || left_out
                    } else {
                        left_in
                    }
                }
                // open-curve terminal vertex: classify by the terminal segment
                (Some(i), None) => self.direction(i).cross(q - v) > 0.0,
                (None, Some(j)) => self.direction(j).cross(q - v) > 0.0,
                (None, None) => unreachable!(),
            },
        }
    }

    /// Signed distance to the boundary: positive in `A1`, negative in `A0`,
    /// `+0` on the boundary itself.
    pub fn signed_distance(&self, q: Point) -> f64 {
        let h = self.project_detail(q);
        if h.distance <= self.on_tolerance() {
            return h.distance; // +0 side by convention
        }
        if self.is_left_of(&h, q) == (self.treated_side == Side::Left) {
            h.distance
        } else {
            -h.distance
        }
    }

    /// Signed distance to a pre-specified anchor point on the boundary; the
    /// sign still comes from the query's region.
    pub fn signed_distance_to_point(&self, anchor: Point, q: Point) -> Result<f64, GeometryError> {
        let anchor_dist = self.project_detail(anchor).distance;
        if anchor_dist > self.on_tolerance() {
            return Err(GeometryError::AnchorOffBoundary(anchor_dist));
        }
        let d = q.dist(anchor);
        Ok(match self.region_of(q) {
            Region::A1 => d,
            Region::A0 => -d,
        })
    }

    /// Evenly spaced points along the boundary. Open curves include both
    /// endpoints (`j * |B| / (J-1)`); closed curves wrap (`j * |B| / J`).
    pub fn discretize(&self, j: usize) -> Result<Vec<Point>, GeometryError> {
        Ok(self.discretize_arclengths(j)?.into_iter().map(|s| self.point_at(s)).collect())
    }

    /// Arclength positions used by [`Boundary::discretize`].
    pub fn discretize_arclengths(&self, j: usize) -> Result<Vec<f64>, GeometryError> {
        let total = self.total_length();
        if self.closed {
            if j < 1 {
                return Err(GeometryError::InvalidGrid { j, min: 1 });
            }
            Ok((0..j).map(|k| total * k as f64 / j as f64).collect())
        } else {
            if j < 2 {
                return Err(GeometryError::InvalidGrid { j, min: 2 });
            }
            Ok((0..j).map(|k| total * k as f64 / (j - 1) as f64).collect())
        }
    }

    /// Arclength line integral of `m` over the boundary, by per-segment
    /// composite Gauss-Legendre quadrature with roughly `n_per_unit`
    /// quadrature points per unit of length.
    pub fn line_integral<F: Fn(Point) -> f64>(&self, m: F, n_per_unit: f64) -> f64 {
        self.integral_between(0.0, self.total_length(), m, n_per_unit)
    }

    /// Line integral restricted to the arclength range `[s_lo, s_hi]`.
    pub fn integral_between<F: Fn(Point) -> f64>(&self, s_lo: f64, s_hi: f64, m: F, n_per_unit: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_segments() {
            let lo = s_lo.max(self.cum_len[i]);
            let hi = s_hi.min(self.cum_len[i + 1]);
            if hi <= lo {
                continue;
            }
            let (a, b) = self.segment(i);
            let d = b - a;
            let len = self.segment_len(i);
            let panels = ((hi - lo) * n_per_unit / 8.0).ceil().max(1.0) as usize;
            let width = (hi - lo) / panels as f64;
            for k in 0..panels {
                let p_lo = lo + k as f64 * width;
                let mid = p_lo + 0.5 * width;
                let half = 0.5 * width;
                for (x, w) in GL8.iter() {
                    let s = mid + half * x;
                    let t = (s - self.cum_len[i]) / len;
                    total += w * half * m(a + d * t);
                }
            }
        }
        total
    }
}

/// 8-point Gauss-Legendre rule on [-1, 1].
#[allow(clippy::excessive_precision)]
const GL8: [(f64, f64); 8] = [
    (-0.9602898564975363, 0.1012285362903763),
    (-0.7966664774136267, 0.2223810344533745),
    (-0.5255324099163290, 0.3137066458778873),
    (-0.1834346424956498, 0.3626837833783620),
    (0.1834346424956498, 0.3626837833783620),
    (0.5255324099163290, 0.3137066458778873),
    (0.7966664774136267, 0.2223810344533745),
    (0.9602898564975363, 0.1012285362903763),
];

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x1 >= a.x1.min(b.x1) && p.x1 <= a.x1.max(b.x1) && p.x2 >= a.x2.min(b.x2) && p.x2 <= a.x2.max(b.x2)
}

/// Whether two segments share any point (proper crossing or touching).
fn segments_touch(a1: Point, b1: Point, a2: Point, b2: Point) -> bool {
    let o1 = orient(a1, b1, a2);
    let o2 = orient(a1, b1, b2);
    let o3 = orient(a2, b2, a1);
    let o4 = orient(a2, b2, b1);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a1, b1, a2))
        || (o2 == 0.0 && on_segment(a1, b1, b2))
        || (o3 == 0.0 && on_segment(a2, b2, a1))
        || (o4 == 0.0 && on_segment(a2, b2, b1))
}

/// Disjoint arclength pieces partitioning the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPartition {
    /// `L + 1` strictly increasing breakpoints from 0 to `|B|`.
    breakpoints: Vec<f64>,
}

impl SegmentPartition {
    /// Build from interior breakpoints `0 < s_1 < ... < s_{L-1} < |B|`.
    pub fn new(boundary: &Boundary, interior: &[f64]) -> Result<Self, GeometryError> {
        let total = boundary.total_length();
        let mut breakpoints = Vec::with_capacity(interior.len() + 2);
        breakpoints.push(0.0);
        for &s in interior {
            if !(s.is_finite() && s > *breakpoints.last().unwrap() && s < total) {
                return Err(GeometryError::BadPartition);
            }
            breakpoints.push(s);
        }
        breakpoints.push(total);
        Ok(SegmentPartition { breakpoints })
    }

    /// The whole boundary as a single piece.
    pub fn whole(boundary: &Boundary) -> Self {
        SegmentPartition { breakpoints: vec![0.0, boundary.total_length()] }
    }

    /// `L` pieces of equal arclength.
    pub fn uniform(boundary: &Boundary, l: usize) -> Result<Self, GeometryError> {
        if l == 0 {
            return Err(GeometryError::BadPartition);
        }
        let total = boundary.total_length();
        let interior: Vec<f64> = (1..l).map(|k| total * k as f64 / l as f64).collect();
        SegmentPartition::new(boundary, &interior)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n_pieces(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Distance from a query point to one piece of the partitioned boundary.
    pub fn distance_to_piece(&self, boundary: &Boundary, piece: usize, q: Point) -> f64 {
        let lo = self.breakpoints[piece];
        let hi = self.breakpoints[piece + 1];
        let mut best = f64::INFINITY;
        for i in 0..boundary.n_segments() {
            let c_lo = boundary.cum_len[i];
            let c_hi = boundary.cum_len[i + 1];
            let a_lo = lo.max(c_lo);
            let a_hi = hi.min(c_hi);
            if a_hi < a_lo {
                continue;
            }
            let (a, b) = boundary.segment(i);
            let d = b - a;
            let len = c_hi - c_lo;
            let ta = (a_lo - c_lo) / len;
            let tb = (a_hi - c_lo) / len;
            let pa = if ta <= 0.0 { a } else { a + d * ta };
            let pb = if tb >= 1.0 { b } else { a + d * tb };
            let dist = if a_hi == a_lo {
                q.dist(pa)
            } else {
                let dd = pb - pa;
                let t = ((q - pa).dot(dd) / dd.dot(dd)).clamp(0.0, 1.0);
                let p = if t == 0.0 {
                    pa
                } else if t == 1.0 {
                    pb
                } else {
                    pa + dd * t
                };
                q.dist(p)
            };
            if dist < best {
                best = dist;
            }
        }
        best
    }

    /// Index (1-based) of the nearest piece; exact ties return the smallest.
    pub fn assign(&self, boundary: &Boundary, q: Point) -> usize {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for piece in 0..self.n_pieces() {
            let d = self.distance_to_piece(boundary, piece, q);
            if d < best_dist {
                best_dist = d;
                best = piece;
            }
        }
        best + 1
    }
}

/// Minimum interior angle over the polyline's interior vertices, in radians.
/// Returns `None` when there are no interior corners.
pub fn min_interior_angle(boundary: &Boundary) -> Option<f64> {
    let m = boundary.n_segments();
    let mut min: Option<f64> = None;
    let corners: Vec<(usize, usize)> = if boundary.closed {
        (0..m).map(|i| (if i == 0 { m - 1 } else { i - 1 }, i)).collect()
    } else {
        (1..m).map(|i| (i - 1, i)).collect()
    };
    for (i, j) in corners {
        let din = boundary.direction(i);
        let dout = boundary.direction(j);
        // interior angle between the two segment rays meeting at the vertex
        let angle = std::f64::consts::PI - din.cross(dout).atan2(din.dot(dout)).abs();
        min = Some(min.map_or(angle, |m: f64| m.min(angle)));
    }
    min
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

/// Parse the line-oriented boundary format.
///
/// ```text
/// # comment
/// boundary open treated_side=left
/// x1 x2
/// ...
/// partition s1 s2 ...   (optional interior arclength breakpoints)
/// ```
pub fn parse_boundary(text: &str) -> Result<(Boundary, Option<SegmentPartition>), GeometryError> {
    let mut header: Option<(bool, Side)> = None;
    let mut vertices = Vec::new();
    let mut partition_raw: Option<(usize, Vec<f64>)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let first = tokens.next().unwrap();
        if header.is_none() {
            if first != "boundary" {
                return Err(GeometryError::Format {
                    line: line_no,
                    msg: "expected header `boundary open|closed treated_side=left|right`".into(),
                });
            }
            let closed = match tokens.next() {
                Some("open") => false,
                Some("closed") => true,
                other => {
                    return Err(GeometryError::Format {
                        line: line_no,
                        msg: format!("expected `open` or `closed`, got {:?}", other),
                    })
                }
            };
            let side = match tokens.next() {
                Some("treated_side=left") => Side::Left,
                Some("treated_side=right") => Side::Right,
                other => {
                    return Err(GeometryError::Format {
                        line: line_no,
                        msg: format!("expected `treated_side=left|right`, got {:?}", other),
                    })
                }
            };
            header = Some((closed, side));
            continue;
        }
        if first == "partition" {
            let mut vals = Vec::new();
            for tok in tokens {
                let v: f64 = tok.parse().map_err(|_| GeometryError::Format {
                    line: line_no,
                    msg: format!("bad partition breakpoint `{tok}`"),
                })?;
                vals.push(v);
            }
            partition_raw = Some((line_no, vals));
            continue;
        }
        let x1: f64 = first.parse().map_err(|_| GeometryError::Format {
            line: line_no,
            msg: format!("bad coordinate `{first}`"),
        })?;
        let x2: f64 = match tokens.next() {
            Some(tok) => tok.parse().map_err(|_| GeometryError::Format {
                line: line_no,
                msg: format!("bad coordinate `{tok}`"),
            })?,
            None => {
                return Err(GeometryError::Format { line: line_no, msg: "expected `x1 x2`".into() })
            }
        };
        if tokens.next().is_some() {
            return Err(GeometryError::Format { line: line_no, msg: "expected exactly two coordinates".into() });
        }
        vertices.push(Point::new(x1, x2));
    }
    let (closed, side) = header.ok_or(GeometryError::Format { line: 0, msg: "missing header".into() })?;
    let boundary = Boundary::new(vertices, closed, side)?;
    let partition = match partition_raw {
        None => None,
        Some((line, vals)) => Some(SegmentPartition::new(&boundary, &vals).map_err(|_| {
            GeometryError::Format { line, msg: "partition breakpoints not strictly increasing inside (0, |B|)".into() }
        })?),
    };
    Ok((boundary, partition))
}

pub fn read_boundary_file(path: &std::path::Path) -> Result<(Boundary, Option<SegmentPartition>), crate::Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_boundary(&text)?)
}
