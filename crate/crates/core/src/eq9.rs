//! Numerical check that tubular-neighborhood integrals converge to the
//! boundary line integral:
//!
//! ```text
//! (1/h) int_{T(h)} g(d(x,B)/h) m(x) dx  ->  2 * int_0^1 g(s) ds * int_B m dH
//! ```
//!
//! as `h -> 0`, where `T(h)` is the set of points within distance `h` of
//! the boundary. The left side is evaluated by an independent 2-D
//! quadrature: a uniform grid of cells with side `h/50`, with cells that
//! straddle the tubular frontier clipped against its local supporting line
//! and the integrand evaluated at the clipped cell's centroid. For an open
//! boundary the tubular is cut at the perpendiculars through the endpoints,
//! so that the curve splits its slab the way an assignment boundary splits
//! the score support; end caps past the endpoints are outside the support.
//!
//! On a straight boundary every frontier is a line, the clipping is exact,
//! and centroid evaluation integrates affine `m` exactly; corners contribute
//! an `O(h)` area mismatch that vanishes as `h` shrinks.

use serde::Serialize;

use crate::geometry::{Boundary, Point};

#[derive(Debug, Clone, Serialize)]
pub struct Eq9Row {
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

/// Pooling constant for two-sided tubulars.
const C_B: f64 = 2.0;
/// Cells per bandwidth.
const CELLS_PER_H: f64 = 50.0;

/// Tabulate the tubular integral against its boundary-integral limit for a
/// sequence of bandwidths.
pub fn verify_eq9<M, G>(boundary: &Boundary, m: M, g: G, hs: &[f64]) -> Vec<Eq9Row>
where
    M: Fn(Point) -> f64,
    G: Fn(f64) -> f64,
{
    let g_int = integral_01(&g);
    let line = boundary.line_integral(&m, 400.0);
    let rhs = C_B * g_int * line;
    hs.iter()
        .map(|&h| {
            let lhs = tubular_integral(boundary, &m, &g, h);
            let rel_err = if rhs != 0.0 { ((lhs - rhs) / rhs).abs() } else { lhs.abs() };
            Eq9Row { h, lhs, rhs, rel_err }
        })
        .collect()
}

/// Composite Gauss-Legendre integral of `g` on `[0, 1]`; 64 panels keep
/// profile kinks harmless.
fn integral_01<G: Fn(f64) -> f64>(g: &G) -> f64 {
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
    let panels = 64;
    let mut total = 0.0;
    for k in 0..panels {
        let a = k as f64 / panels as f64;
        let b = (k + 1) as f64 / panels as f64;
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (x, w) in GL8 {
            total += w * half * g(mid + half * x);
        }
    }
    total
}

/// `(1/h) int g(d/h) m` over the clipped tubular, by cell quadrature.
fn tubular_integral<M, G>(boundary: &Boundary, m: &M, g: &G, h: f64) -> f64
where
    M: Fn(Point) -> f64,
    G: Fn(f64) -> f64,
{
    assert!(h > 0.0, "bandwidth must be positive");
    let cell = h / CELLS_PER_H;
    let diag = cell * std::f64::consts::SQRT_2;

    let vs = boundary.vertices();
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in vs {
        min_x = min_x.min(v.x1);
        min_y = min_y.min(v.x2);
        max_x = max_x.max(v.x1);
        max_y = max_y.max(v.x2);
    }
    let x0 = min_x - h;
    let y0 = min_y - h;
    let nx = ((max_x + h - x0) / cell).ceil() as i64 + 1;

    // open-boundary slab planes at the terminal vertices
    let open = !boundary.is_closed();
    let (v_first, d_first, v_last, d_last) = {
        let n = vs.len();
        let d0 = vs[1] - vs[0];
        let d0 = d0 * (1.0 / d0.norm());
        let dl = vs[n - 1] - vs[n - 2];
        let dl = dl * (1.0 / dl.norm());
        (vs[0], d0, vs[n - 1], dl)
    };

    let margin = h + 2.0 * cell;
    let mut total = 0.0;
    for ix in 0..nx {
        let cx_lo = x0 + ix as f64 * cell;
        let cx_hi = cx_lo + cell;
        // candidate cell rows near any segment
        let mut ranges: Vec<(i64, i64)> = Vec::new();
        for si in 0..boundary.n_segments() {
            let (a, b) = boundary.segment(si);
            let (sx_lo, sx_hi) = (a.x1.min(b.x1) - margin, a.x1.max(b.x1) + margin);
            if cx_hi < sx_lo || cx_lo > sx_hi {
                continue;
            }
            let (sy_lo, sy_hi) = (a.x2.min(b.x2) - margin, a.x2.max(b.x2) + margin);
            let iy_lo = ((sy_lo - y0) / cell).floor() as i64;
            let iy_hi = ((sy_hi - y0) / cell).ceil() as i64;
            ranges.push((iy_lo.max(0), iy_hi));
        }
        if ranges.is_empty() {
            continue;
        }
        ranges.sort_unstable();
        let mut merged: Vec<(i64, i64)> = Vec::new();
        for r in ranges {
            match merged.last_mut() {
                Some(last) if r.0 <= last.1 + 1 => last.1 = last.1.max(r.1),
                _ => merged.push(r),
            }
        }

        for (iy_lo, iy_hi) in merged {
            for iy in iy_lo..=iy_hi {
                let cy_lo = y0 + iy as f64 * cell;
                let center = Point::new(cx_lo + 0.5 * cell, cy_lo + 0.5 * cell);
                let proj = boundary.closest_point(center);
                if proj.distance >= h + diag {
                    continue;
                }

                let mut poly = vec![
                    Point::new(cx_lo, cy_lo),
                    Point::new(cx_hi, cy_lo),
                    Point::new(cx_hi, cy_lo + cell),
                    Point::new(cx_lo, cy_lo + cell),
                ];

                if open {
                    // cut at the perpendicular through each endpoint
                    if center.dist(v_first) <= h + diag {
                        let e = (center - v_first).dot(d_first);
                        if e < -diag {
                            continue;
                        }
                        if e <= diag {
                            // keep the side along the curve: d_first . (x - v_first) >= 0
                            poly = clip_halfplane(&poly, d_first * -1.0, -(d_first.dot(v_first)));
                        }
                    }
                    if !poly.is_empty() && center.dist(v_last) <= h + diag {
                        let e = (center - v_last).dot(d_last);
                        if e > diag {
                            continue;
                        }
                        if e >= -diag {
                            // keep d_last . (x - v_last) <= 0
                            poly = clip_halfplane(&poly, d_last, d_last.dot(v_last));
                        }
                    }
                    if poly.is_empty() {
                        continue;
                    }
                }

                if proj.distance > h - diag {
                    // straddling the offset frontier: clip against its local
                    // supporting line through proj + h * u
                    if proj.distance > 0.0 {
                        let u = (center - proj.point) * (1.0 / proj.distance);
                        poly = clip_halfplane(&poly, u, u.dot(proj.point) + h);
                        if poly.is_empty() {
                            continue;
                        }
                    }
                }

                let (area, centroid) = polygon_area_centroid(&poly);
                if area <= 0.0 {
                    continue;
                }
                let d_c = boundary.closest_point(centroid).distance;
                total += area * g(d_c / h) * m(centroid);
            }
        }
    }
    total / h
}

/// Sutherland-Hodgman clip of a convex polygon against `n . x <= b`.
fn clip_halfplane(poly: &[Point], n: Point, b: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let k = poly.len();
    for i in 0..k {
        let cur = poly[i];
        let next = poly[(i + 1) % k];
        let d_cur = n.dot(cur) - b;
        let d_next = n.dot(next) - b;
        if d_cur <= 0.0 {
            out.push(cur);
        }
        if (d_cur < 0.0 && d_next > 0.0) || (d_cur > 0.0 && d_next < 0.0) {
            let t = d_cur / (d_cur - d_next);
            out.push(cur + (next - cur) * t);
        }
    }
    out
}

fn polygon_area_centroid(poly: &[Point]) -> (f64, Point) {
    if poly.len() < 3 {
        return (0.0, Point::new(0.0, 0.0));
    }
    let mut area2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let cross = a.cross(b);
        area2 += cross;
        cx += (a.x1 + b.x1) * cross;
        cy += (a.x2 + b.x2) * cross;
    }
    if area2 == 0.0 {
        return (0.0, poly[0]);
    }
    let area = 0.5 * area2;
    (area.abs(), Point::new(cx / (6.0 * area), cy / (6.0 * area)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Side;
    use approx::assert_relative_eq;

    fn unit_segment() -> Boundary {
        Boundary::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)], false, Side::Left).unwrap()
    }

    fn l_boundary() -> Boundary {
        Boundary::new(
            vec![Point::new(1.0, 0.0), Point::new(0.0, 0.0), Point::new(0.0, 1.0)],
            false,
            Side::Right,
        )
        .unwrap()
    }

    fn step(u: f64) -> f64 {
        if (0.0..1.0).contains(&u) {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn straight_boundary_exact() {
        let b = unit_segment();
        let rows = verify_eq9(&b, |_| 1.0, step, &[0.1, 0.03, 0.007]);
        for row in &rows {
            assert_relative_eq!(row.rhs, 2.0, max_relative = 1e-13);
            assert!(row.rel_err < 1e-10, "h = {}: rel_err = {}", row.h, row.rel_err);
        }
    }

    #[test]
    fn straight_boundary_linear_integrand() {
        let b = unit_segment();
        let rows = verify_eq9(&b, |p| p.x1, step, &[0.05, 0.01]);
        for row in &rows {
            assert_relative_eq!(row.rhs, 1.0, max_relative = 1e-13);
            assert!(row.rel_err < 1e-10, "h = {}: rel_err = {}", row.h, row.rel_err);
        }
    }

    #[test]
    fn l_boundary_corner_error_shrinks() {
        let b = l_boundary();
        let rows = verify_eq9(&b, |_| 1.0, step, &[0.1, 0.03, 0.01]);
        assert_relative_eq!(rows[0].rhs, 4.0, max_relative = 1e-12);
        for w in rows.windows(2) {
            assert!(
                w[1].rel_err < w[0].rel_err,
                "errors should shrink: {} -> {}",
                w[0].rel_err,
                w[1].rel_err
            );
        }
        assert!(rows.last().unwrap().rel_err < 0.01);
    }
}
