//! Plug-in MSE-optimal bandwidth selection.
//!
//! The selectors minimize the usual squared-bias-plus-variance proxy. For
//! estimators driven by the univariate signed distance the proxy is
//! `B^2 h^(2(p+1)) + V/(n h)` with optimum `h = (V / (2(p+1) B^2 n))^(1/(2p+3))`;
//! for boundary-point (bivariate) estimators the variance term is
//! `V/(n h^2)` and the exponent becomes `1/(2p+4)`. The bias and variance
//! constants come from global (pooled) or neighborhood (boundary-point)
//! pilot fits of order `p + 2`, combined with equivalent-kernel constants
//! computed numerically from kernel moments on the one-sided interval or
//! half-disk. Degenerate pilots fall back to a rule of thumb and are always
//! flagged.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::Error;
use crate::frame::SampleFrame;
use crate::geometry::{min_interior_angle, Boundary, Point, Region};
use crate::regress::{basis_biv, wls, KernelKind, Vce};

/// Warn about the plug-in's boundary-regularity assumption when the polyline
/// has an interior angle sharper than this (radians).
pub const ANGLE_WARN_THRESHOLD: f64 = std::f64::consts::FRAC_PI_4;

#[derive(Debug, Clone, Serialize)]
pub struct BandwidthResult {
    pub h: f64,
    /// Estimated leading bias coefficient; `None` under the fallback rule.
    pub bias_constant: Option<f64>,
    /// Estimated variance coefficient; `None` under the fallback rule.
    pub variance_constant: Option<f64>,
    /// Rate exponent: `1/(2p+3)` univariate, `1/(2p+4)` bivariate.
    pub exponent: f64,
    pub pilot_order: usize,
    /// True when the rule-of-thumb fallback replaced the plug-in.
    pub fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// `h = (v / (2(p+1) b2 n))^(1/(2p+3))` for distance-driven estimators.
pub fn plugin_h_univariate(b2: f64, v: f64, n: usize, p: usize) -> f64 {
    (v / (2.0 * (p as f64 + 1.0) * b2 * n as f64)).powf(1.0 / (2.0 * p as f64 + 3.0))
}

/// `h = (2v / (2(p+1) b2 n))^(1/(2p+4))` for boundary-point estimators.
pub fn plugin_h_bivariate(b2: f64, v: f64, n: usize, p: usize) -> f64 {
    (2.0 * v / (2.0 * (p as f64 + 1.0) * b2 * n as f64)).powf(1.0 / (2.0 * p as f64 + 4.0))
}

// ---------------------------------------------------------------------------
// Equivalent-kernel constants
// ---------------------------------------------------------------------------

#[allow(clippy::excessive_precision)]
const GL16_X: [f64; 16] = [
    -0.9894009349916499,
    -0.9445750230732326,
    -0.8656312023878318,
    -0.7554044083550030,
    -0.6178762444026438,
    -0.4580167776572274,
    -0.2816035507792589,
    -0.0950125098376374,
    0.0950125098376374,
    0.2816035507792589,
    0.4580167776572274,
    0.6178762444026438,
    0.7554044083550030,
    0.8656312023878318,
    0.9445750230732326,
    0.9894009349916499,
];
#[allow(clippy::excessive_precision)]
const GL16_W: [f64; 16] = [
    0.0271524594117541,
    0.0622535239386479,
    0.0951585116824928,
    0.1246289712555339,
    0.1495959888165767,
    0.1691565193950025,
    0.1826034150449236,
    0.1894506104550685,
    0.1894506104550685,
    0.1826034150449236,
    0.1691565193950025,
    0.1495959888165767,
    0.1246289712555339,
    0.0951585116824928,
    0.0622535239386479,
    0.0271524594117541,
];

fn gl16(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GL16_X.iter().zip(&GL16_W).map(|(&x, &w)| w * half * f(mid + half * x)).sum()
}

/// One-sided equivalent-kernel constants on `[0, 1]`:
/// `b_p = (S^-1 c)[0]` and `v_p = (S^-1 Gamma S^-1)[0,0]` with
/// `S = [m_{j+k}]`, `c = [m_{j+p+1}]`, `Gamma = [pi_{j+k}]` built from the
/// kernel moments `m_j = int u^j K`, `pi_j = int u^j K^2`.
pub fn one_sided_constants(kernel: KernelKind, p: usize) -> (f64, f64) {
    let n_mom = 2 * p + 2;
    let nu: Vec<f64> = (0..=n_mom).map(|j| gl16(0.0, 1.0, |u| u.powi(j as i32) * kernel.profile(u))).collect();
    let pi: Vec<f64> = (0..=n_mom)
        .map(|j| gl16(0.0, 1.0, |u| u.powi(j as i32) * kernel.profile(u).powi(2)))
        .collect();
    let dim = p + 1;
    let s = DMatrix::from_fn(dim, dim, |j, k| nu[j + k]);
    let c = DVector::from_fn(dim, |j, _| nu[j + p + 1]);
    let g = DMatrix::from_fn(dim, dim, |j, k| pi[j + k]);
    let s_inv = s.try_inverse().expect("one-sided moment matrix is nonsingular");
    let b_p = (&s_inv * c)[0];
    let v_p = (&s_inv * g * &s_inv)[(0, 0)];
    (b_p, v_p)
}

/// Number of bivariate monomials of total degree `<= p` (constant included).
fn n_biv_full(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Full bivariate basis including the constant term.
fn biv_full(u: Point, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_biv_full(p));
    out.push(1.0);
    out.extend(basis_biv(u, p));
    out
}

/// Half-disk equivalent-kernel constants for boundary-point fits. Returns
/// the per-monomial bias weights for the degree-(p+1) terms (graded order)
/// and the variance constant, for the upper (`treated = true`) or lower half
/// of the unit disk.
fn half_disk_constants(kernel: KernelKind, p: usize, upper: bool) -> (Vec<f64>, f64) {
    let dim = n_biv_full(p);
    let n_extra = p + 2; // degree p+1 monomials
    let (th_lo, th_hi) = if upper { (0.0, std::f64::consts::PI) } else { (std::f64::consts::PI, 2.0 * std::f64::consts::PI) };

    let mut s = DMatrix::zeros(dim, dim);
    let mut gam = DMatrix::zeros(dim, dim);
    let mut c = DMatrix::zeros(dim, n_extra);
    // polar product rule; integrands are polynomial in r and low-order trig
    let n_theta = 48;
    for it in 0..n_theta {
        let t_mid = th_lo + (th_hi - th_lo) * (it as f64 + 0.5) / n_theta as f64;
        let t_half = 0.5 * (th_hi - th_lo) / n_theta as f64;
        for (&xt, &wt) in GL16_X.iter().zip(&GL16_W) {
            let theta = t_mid + t_half * xt;
            let w_theta = wt * t_half;
            for (&xr, &wr) in GL16_X.iter().zip(&GL16_W) {
                let r = 0.5 + 0.5 * xr;
                let w_r = wr * 0.5;
                let z = Point::new(r * theta.cos(), r * theta.sin());
                let k1 = kernel.profile(r);
                if k1 == 0.0 {
                    continue;
                }
                let basis = biv_full(z, p);
                let weight = w_theta * w_r * r;
                for a in 0..dim {
                    for b in 0..dim {
                        s[(a, b)] += weight * k1 * basis[a] * basis[b];
                        gam[(a, b)] += weight * k1 * k1 * basis[a] * basis[b];
                    }
                    for (m, cm) in monomials_of_degree(z, p + 1).into_iter().enumerate() {
                        c[(a, m)] += weight * k1 * basis[a] * cm;
                    }
                }
            }
        }
    }
    let s_inv = s.try_inverse().expect("half-disk moment matrix is nonsingular");
    let first_row = s_inv.row(0);
    let bias_weights: Vec<f64> = (0..n_extra).map(|m| (first_row * c.column(m))[0]).collect();
    let v = (&s_inv * gam * &s_inv)[(0, 0)];
    (bias_weights, v)
}

/// `z1^(g-k) z2^k` for `k = 0..=g`.
fn monomials_of_degree(z: Point, g: usize) -> Vec<f64> {
    (0..=g).map(|k| z.x1.powi((g - k) as i32) * z.x2.powi(k as i32)).collect()
}

// ---------------------------------------------------------------------------
// Pooled (distance-driven) selector
// ---------------------------------------------------------------------------

pub const MIN_PILOT_SIZE: usize = 50;

fn sd(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = xs.clone().sum::<f64>() / n;
    (xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn boundary_warning(boundary: Option<&Boundary>) -> Option<String> {
    let b = boundary?;
    let angle = min_interior_angle(b)?;
    (angle < ANGLE_WARN_THRESHOLD).then(|| {
        format!(
            "boundary has an interior angle of {:.3} rad; the plug-in bias expansion assumes a regular boundary",
            angle
        )
    })
}

/// Global polynomial pilot of order `degree` of `y` on powers of `d`,
/// restricted to the rows in `idx`. Returns coefficients and the residual
/// variance.
fn pilot_poly_d(frame: &SampleFrame, idx: &[usize], degree: usize) -> Result<(DVector<f64>, f64), Error> {
    let n = idx.len();
    let k = degree + 1;
    if n < k + 1 {
        return Err(Error::PilotDegenerate(format!("side has {n} observations, pilot needs {}", k + 1)));
    }
    let mut z = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for (r, &i) in idx.iter().enumerate() {
        let mut acc = 1.0;
        for c in 0..k {
            z[(r, c)] = acc;
            acc *= frame.d[i];
        }
        y[r] = frame.y[i];
    }
    let w = DVector::from_element(n, 1.0);
    let fit = wls(&z, &y, &w, Vce::Hc0).map_err(|e| Error::PilotDegenerate(e.to_string()))?;
    if !fit.dropped_columns.is_empty() {
        return Err(Error::PilotDegenerate("pilot design is collinear".into()));
    }
    let rss: f64 = fit.residuals.iter().map(|e| e * e).sum();
    let dof = (n - k).max(1) as f64;
    Ok((fit.coefficients, rss / dof))
}

/// MSE-optimal bandwidth for pooled estimators on the signed distance.
pub fn h_mse_pooled(
    frame: &SampleFrame,
    p: usize,
    kernel: KernelKind,
    boundary: Option<&Boundary>,
) -> Result<BandwidthResult, Error> {
    let n = frame.len();
    if n < MIN_PILOT_SIZE {
        return Err(Error::invalid(format!("bandwidth selection needs at least {MIN_PILOT_SIZE} observations")));
    }
    let exponent = 1.0 / (2.0 * p as f64 + 3.0);
    let pilot_order = p + 2;
    let warning = boundary_warning(boundary);
    let diameter = frame.score_diameter();
    let sd_d = sd(frame.d.iter().copied());
    let fallback = |why: String| BandwidthResult {
        h: (sd_d * (n as f64).powf(-exponent)).max(f64::MIN_POSITIVE),
        bias_constant: None,
        variance_constant: None,
        exponent,
        pilot_order,
        fallback: true,
        warning: Some(match &warning {
            Some(w) => format!("{why}; {w}"),
            None => why,
        }),
    };

    if sd(frame.y.iter().copied()) == 0.0 {
        return Ok(fallback("outcome is constant".into()));
    }
    let treated: Vec<usize> = (0..n).filter(|&i| frame.t[i]).collect();
    let control: Vec<usize> = (0..n).filter(|&i| !frame.t[i]).collect();
    let pilots = (
        pilot_poly_d(frame, &treated, pilot_order),
        pilot_poly_d(frame, &control, pilot_order),
    );
    let ((beta1, sig1), (beta0, sig0)) = match pilots {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Ok(fallback(e.to_string())),
    };

    // leading coefficient difference at degree p+1 (signed-distance scale)
    let sign0 = if (p + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    let delta = beta1[p + 1] - sign0 * beta0[p + 1];
    if delta.abs() <= 1e-10 * (beta1[p + 1].abs() + beta0[p + 1].abs()) {
        return Ok(fallback("leading pilot coefficients cancel".into()));
    }
    let (b_p, v_p) = one_sided_constants(kernel, p);
    let b_hat = b_p * delta;

    // one-sided densities of D at zero, by counting in a pilot window
    let h_f = (1.06 * sd_d * (n as f64).powf(-0.2)).min(frame.d.iter().fold(0.0f64, |m, d| m.max(d.abs())));
    if !(h_f > 0.0) {
        return Ok(fallback("zero pilot window for the distance density".into()));
    }
    let n1 = frame.d.iter().filter(|&&d| (0.0..=h_f).contains(&d)).count();
    let n0 = frame.d.iter().filter(|&&d| (-h_f..0.0).contains(&d)).count();
    if n1 == 0 || n0 == 0 {
        return Ok(fallback("no observations in the density pilot window".into()));
    }
    let f1 = n1 as f64 / (n as f64 * h_f);
    let f0 = n0 as f64 / (n as f64 * h_f);
    let v_hat = v_p * (sig1 / f1 + sig0 / f0);

    if !(b_hat.is_finite() && v_hat.is_finite() && v_hat > 0.0) || b_hat == 0.0 {
        return Ok(fallback("pilot produced a degenerate bias or variance constant".into()));
    }
    let h = plugin_h_univariate(b_hat * b_hat, v_hat, n, p).min(diameter);
    Ok(BandwidthResult {
        h,
        bias_constant: Some(b_hat),
        variance_constant: Some(v_hat),
        exponent,
        pilot_order,
        fallback: false,
        warning,
    })
}

// ---------------------------------------------------------------------------
// Boundary-point (bivariate) selector
// ---------------------------------------------------------------------------

/// Tangent direction of the boundary at an arclength position; at interior
/// vertices the adjacent directions are averaged.
fn tangent_at(boundary: &Boundary, s: f64) -> Point {
    let eps = 1e-9 * boundary.total_length();
    let ahead = boundary.point_at((s + eps).min(boundary.total_length()));
    let behind = boundary.point_at((s - eps).max(0.0));
    let d = ahead - behind;
    let norm = d.norm();
    if norm == 0.0 {
        Point::new(1.0, 0.0)
    } else {
        d * (1.0 / norm)
    }
}

/// Per-point bias-squared and variance constants for the location-based
/// estimator at boundary point `b`.
fn location_constants(
    frame: &SampleFrame,
    boundary: &Boundary,
    b: Point,
    p: usize,
    kernel: KernelKind,
) -> Result<(f64, f64), Error> {
    let n = frame.len();
    let pilot_order = p + 2;
    let n_terms = n_biv_full(pilot_order);
    if sd(frame.y.iter().copied()) == 0.0 {
        return Err(Error::PilotDegenerate("outcome is constant".into()));
    }

    // rotate into (tangent, treated-normal) coordinates
    let s_pos = boundary.closest_point(b).arclength;
    let tan = tangent_at(boundary, s_pos);
    let left = Point::new(-tan.x2, tan.x1);
    let probe = b + left * (1e-6 * boundary.total_length().max(1.0));
    let normal = if boundary.region_of(probe) == Region::A1 { left } else { left * -1.0 };

    // 50% nearest neighborhood
    let mut dist_idx: Vec<(f64, usize)> = (0..n).map(|i| (frame.x[i].dist(b), i)).collect();
    dist_idx.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k_nb = (n as f64 * 0.5).ceil() as usize;
    let nb = &dist_idx[..k_nb.max(n_terms + 2).min(n)];

    let mut rows1 = Vec::new();
    let mut rows0 = Vec::new();
    for &(_, i) in nb {
        if frame.t[i] {
            rows1.push(i);
        } else {
            rows0.push(i);
        }
    }
    let fit_side = |rows: &[usize]| -> Result<(DVector<f64>, f64), Error> {
        if rows.len() < n_terms + 1 {
            return Err(Error::PilotDegenerate(format!(
                "side has {} neighbors, pilot needs {}",
                rows.len(),
                n_terms + 1
            )));
        }
        let mut z = DMatrix::zeros(rows.len(), n_terms);
        let mut y = DVector::zeros(rows.len());
        for (r, &i) in rows.iter().enumerate() {
            let rel = frame.x[i] - b;
            let zloc = Point::new(rel.dot(tan), rel.dot(normal));
            for (c, v) in biv_full(zloc, pilot_order).into_iter().enumerate() {
                z[(r, c)] = v;
            }
            y[r] = frame.y[i];
        }
        let w = DVector::from_element(rows.len(), 1.0);
        let fit = wls(&z, &y, &w, Vce::Hc0).map_err(|e| Error::PilotDegenerate(e.to_string()))?;
        if !fit.dropped_columns.is_empty() {
            return Err(Error::PilotDegenerate("pilot design is collinear".into()));
        }
        let rss: f64 = fit.residuals.iter().map(|e| e * e).sum();
        Ok((fit.coefficients, rss / (rows.len() - n_terms).max(1) as f64))
    };
    let (alpha1, sig1) = fit_side(&rows1)?;
    let (alpha0, sig0) = fit_side(&rows0)?;

    // equivalent-kernel constants on the two half-disks
    let (bias_w_up, v_up) = half_disk_constants(kernel, p, true);
    let (bias_w_lo, v_lo) = half_disk_constants(kernel, p, false);
    let base = n_biv_full(p + 1) - (p + 2); // first degree-(p+1) coefficient
    let mut bias = 0.0;
    for m in 0..=(p + 1) {
        bias += bias_w_up[m] * alpha1[base + m] - bias_w_lo[m] * alpha0[base + m];
    }

    // local density from a small nearest-neighbor ball
    let k_f = ((n as f64 * 0.1).ceil() as usize).clamp(20.min(n), n);
    let r_f = dist_idx[k_f - 1].0;
    if !(r_f > 0.0) {
        return Err(Error::PilotDegenerate("repeated scores at the evaluation point".into()));
    }
    let f_hat = k_f as f64 / (n as f64 * std::f64::consts::PI * r_f * r_f);
    let v_hat = (v_up * sig1 + v_lo * sig0) / f_hat;
    if !(bias.is_finite() && v_hat.is_finite() && v_hat > 0.0) || bias == 0.0 {
        return Err(Error::PilotDegenerate("degenerate bias or variance constant".into()));
    }
    Ok((bias * bias, v_hat))
}

/// MSE-optimal bandwidth for the location-based estimator at one boundary
/// point.
pub fn h_mse_location(
    frame: &SampleFrame,
    boundary: &Boundary,
    b: Point,
    p: usize,
    kernel: KernelKind,
) -> Result<BandwidthResult, Error> {
    let n = frame.len();
    if n < MIN_PILOT_SIZE {
        return Err(Error::invalid(format!("bandwidth selection needs at least {MIN_PILOT_SIZE} observations")));
    }
    let exponent = 1.0 / (2.0 * p as f64 + 4.0);
    let pilot_order = p + 2;
    let warning = boundary_warning(Some(boundary));
    let diameter = frame.score_diameter();
    match location_constants(frame, boundary, b, p, kernel) {
        Ok((b2, v)) => Ok(BandwidthResult {
            h: plugin_h_bivariate(b2, v, n, p).min(diameter),
            bias_constant: Some(b2.sqrt()),
            variance_constant: Some(v),
            exponent,
            pilot_order,
            fallback: false,
            warning,
        }),
        Err(e) => {
            let sd_dist = sd(frame.x.iter().map(|&x| x.dist(b)));
            Ok(BandwidthResult {
                h: (sd_dist * (n as f64).powf(-exponent)).max(f64::MIN_POSITIVE),
                bias_constant: None,
                variance_constant: None,
                exponent,
                pilot_order,
                fallback: true,
                warning: Some(match &warning {
                    Some(w) => format!("{e}; {w}"),
                    None => e.to_string(),
                }),
            })
        }
    }
}

/// Single bandwidth minimizing the summed per-point MSE proxies over a grid.
pub fn h_mse_integrated(
    frame: &SampleFrame,
    boundary: &Boundary,
    grid: &[Point],
    p: usize,
    kernel: KernelKind,
) -> Result<BandwidthResult, Error> {
    let n = frame.len();
    if grid.is_empty() {
        return Err(Error::invalid("empty evaluation grid"));
    }
    if n < MIN_PILOT_SIZE {
        return Err(Error::invalid(format!("bandwidth selection needs at least {MIN_PILOT_SIZE} observations")));
    }
    let exponent = 1.0 / (2.0 * p as f64 + 4.0);
    let pilot_order = p + 2;
    let warning = boundary_warning(Some(boundary));
    let mut sum_b2 = 0.0;
    let mut sum_v = 0.0;
    let mut used = 0usize;
    for &b in grid {
        if let Ok((b2, v)) = location_constants(frame, boundary, b, p, kernel) {
            sum_b2 += b2;
            sum_v += v;
            used += 1;
        }
    }
    if used == 0 {
        let sd_dist = sd(frame.x.iter().map(|&x| x.dist(grid[0])));
        return Ok(BandwidthResult {
            h: (sd_dist * (n as f64).powf(-exponent)).max(f64::MIN_POSITIVE),
            bias_constant: None,
            variance_constant: None,
            exponent,
            pilot_order,
            fallback: true,
            warning: Some(match &warning {
                Some(w) => format!("all grid points degenerate; {w}"),
                None => "all grid points degenerate".into(),
            }),
        });
    }
    let h = plugin_h_bivariate(sum_b2, sum_v, n, p).min(frame.score_diameter());
    Ok(BandwidthResult {
        h,
        bias_constant: Some((sum_b2 / used as f64).sqrt()),
        variance_constant: Some(sum_v / used as f64),
        exponent,
        pilot_order,
        fallback: false,
        warning,
    })
}
