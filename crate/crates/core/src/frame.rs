//! The estimation sample: outcomes, bivariate scores, and the derived
//! signed distance, treatment indicator, and nearest-segment index.

use crate::data::Dataset;
use crate::error::Error;
use crate::geometry::{Boundary, Point, Region, SegmentPartition};

/// Immutable columns `(Y, X1, X2)` plus derived `(D, T, S)`.
///
/// `D` is the signed distance to the boundary (positive in the treated
/// region, `+0` on the boundary), `T = 1(D >= 0)`, and `S` is the 1-based
/// index of the nearest partition piece.
#[derive(Debug, Clone)]
pub struct SampleFrame {
    pub y: Vec<f64>,
    pub x: Vec<Point>,
    pub d: Vec<f64>,
    pub t: Vec<bool>,
    pub s: Vec<usize>,
    n_segments: usize,
}

impl SampleFrame {
    /// Derive `D`, `T`, `S` for every observation. With no partition the
    /// whole boundary is a single piece and `S = 1` everywhere.
    pub fn derive(
        dataset: &Dataset,
        boundary: &Boundary,
        partition: Option<&SegmentPartition>,
    ) -> Result<SampleFrame, Error> {
        let whole;
        let part = match partition {
            Some(p) => p,
            None => {
                whole = SegmentPartition::whole(boundary);
                &whole
            }
        };
        let n = dataset.len();
        let mut d = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        for &xi in &dataset.x {
            let di = boundary.signed_distance(xi);
            d.push(di);
            t.push(di >= 0.0);
            s.push(if part.n_pieces() == 1 { 1 } else { part.assign(boundary, xi) });
        }
        Ok(SampleFrame { y: dataset.y.clone(), x: dataset.x.clone(), d, t, s, n_segments: part.n_pieces() })
    }

    /// Assemble a frame directly from already-derived columns.
    pub fn from_columns(
        y: Vec<f64>,
        x: Vec<Point>,
        d: Vec<f64>,
        t: Vec<bool>,
        s: Vec<usize>,
        n_segments: usize,
    ) -> Result<SampleFrame, Error> {
        let n = y.len();
        if x.len() != n || d.len() != n || t.len() != n || s.len() != n {
            return Err(Error::invalid("frame columns have mismatched lengths"));
        }
        if s.iter().any(|&si| si == 0 || si > n_segments) {
            return Err(Error::invalid("segment index out of range"));
        }
        Ok(SampleFrame { y, x, d, t, s, n_segments })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    /// Largest pairwise distance between observed scores (diameter of the
    /// observed support), computed on the convex hull.
    pub fn score_diameter(&self) -> f64 {
        let hull = convex_hull(&self.x);
        let mut best = 0.0f64;
        for i in 0..hull.len() {
            for j in (i + 1)..hull.len() {
                best = best.max(hull[i].dist(hull[j]));
            }
        }
        best
    }
}

/// Andrew's monotone chain; returns the input when fewer than three points.
fn convex_hull(points: &[Point]) -> Vec<Point> {
    if points.len() < 3 {
        return points.to_vec();
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| (a.x1, a.x2).partial_cmp(&(b.x1, b.x2)).unwrap());
    pts.dedup_by(|a, b| a == b);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 {
            let m = hull.len();
            if (hull[m - 1] - hull[m - 2]).cross(p - hull[m - 2]) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Convenience constructor used by tests and the simulation harness.
pub fn region_indicator(boundary: &Boundary, x: Point) -> bool {
    boundary.region_of(x) == Region::A1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Side;

    fn l_boundary() -> Boundary {
        Boundary::new(
            vec![Point::new(1.0, 0.0), Point::new(0.0, 0.0), Point::new(0.0, 1.0)],
            false,
            Side::Right,
        )
        .unwrap()
    }

    #[test]
    fn derive_matches_geometry() {
        let b = l_boundary();
        let part = SegmentPartition::new(&b, &[1.0]).unwrap();
        let ds = Dataset {
            y: vec![1.0, 2.0, 3.0],
            x: vec![Point::new(0.3, 0.4), Point::new(-0.2, 0.5), Point::new(0.5, 0.0)],
        };
        let f = SampleFrame::derive(&ds, &b, Some(&part)).unwrap();
        assert_eq!(f.d[0], 0.3);
        assert!(f.t[0]);
        // (0.3, 0.4) is 0.3 from the vertical arm, 0.4 from the horizontal one
        assert_eq!(f.s[0], 2);
        assert_eq!(f.d[1], -0.2);
        assert!(!f.t[1]);
        // boundary points are treated
        assert!(f.t[2]);
        assert_eq!(f.d[2], 0.0);
    }

    #[test]
    fn boundary_points_are_treated() {
        let b = l_boundary();
        let pts = b.discretize(9).unwrap();
        let ds = Dataset { y: vec![0.0; 9], x: pts };
        let f = SampleFrame::derive(&ds, &b, None).unwrap();
        assert!(f.t.iter().all(|&t| t));
        assert!(f.d.iter().all(|&d| d == 0.0 && d.is_sign_positive()));
    }

    #[test]
    fn diameter_on_hull() {
        let f = SampleFrame::from_columns(
            vec![0.0; 4],
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
                Point::new(1.0, 1.0),
            ],
            vec![0.0; 4],
            vec![true; 4],
            vec![1; 4],
            1,
        )
        .unwrap();
        assert!((f.score_diameter() - 2f64.sqrt()).abs() < 1e-12);
    }
}
