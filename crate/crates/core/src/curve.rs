//! Boundary-point-specific treatment effects.
//!
//! For each grid point `b_j` on the boundary, a local interacted regression
//! estimates the average effect at that point. The distance-based method
//! regresses on powers of the point-specific signed distance; the
//! location-based method regresses on the bivariate score centered at `b_j`
//! with a radial kernel. Per-point failures (empty window, collinear local
//! design) become gaps, not global errors.
//!
//! The joint covariance across grid points comes from shared-observation
//! influence functions: two points whose windows overlap are correlated
//! through the observations they share. That covariance drives the sup-t
//! uniform band (seeded Gaussian max draws) and the delta-method standard
//! error of the weighted aggregate.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::frame::SampleFrame;
use crate::geometry::{Boundary, Point};
use crate::regress::{basis_biv, basis_uni, wls, z_crit, KernelKind, Vce};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurveMethod {
    Distance,
    Location,
}

/// Evaluation grid on the boundary.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub points: Vec<Point>,
    pub arclengths: Vec<f64>,
}

impl GridSpec {
    pub fn new(boundary: &Boundary, j: usize) -> Result<Self, Error> {
        let points = boundary.discretize(j)?;
        let arclengths = boundary.discretize_arclengths(j)?;
        Ok(GridSpec { points, arclengths })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One grid point of a fitted curve; estimation fields are `None` on gaps.
#[derive(Debug, Clone)]
pub struct CurvePoint {
    pub arclength: f64,
    pub location: Point,
    /// Bandwidth used at this point.
    pub h: f64,
    pub tau: Option<f64>,
    /// Recentered estimate from the order-q fit (robust bias correction).
    pub tau_rbc: Option<f64>,
    pub se: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub band: Option<(f64, f64)>,
    pub n_eff: usize,
    pub gap_reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CurveResult {
    pub method: CurveMethod,
    pub p_used: usize,
    pub q_used: Option<usize>,
    pub alpha: f64,
    pub points: Vec<CurvePoint>,
    /// Indices of points with estimates, in grid order.
    pub valid: Vec<usize>,
    /// Joint covariance over the valid points (inference-order fit).
    pub cov: DMatrix<f64>,
    pub band_crit: Option<f64>,
    pub band_seed: Option<u64>,
    pub n_gaps: usize,
}

/// Field-array view of a fitted curve, the JSON output format.
#[derive(Debug, Clone, Serialize)]
pub struct CurveReport {
    pub method: CurveMethod,
    pub p_used: usize,
    pub q_used: Option<usize>,
    pub alpha: f64,
    pub band_crit: Option<f64>,
    pub seed: Option<u64>,
    pub n_gaps: usize,
    pub h_per_point: Vec<f64>,
    pub arclength: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub tau_hat: Vec<Option<f64>>,
    pub tau_rbc: Vec<Option<f64>>,
    pub se: Vec<Option<f64>>,
    pub ci_lo: Vec<Option<f64>>,
    pub ci_hi: Vec<Option<f64>>,
    pub band_lo: Vec<Option<f64>>,
    pub band_hi: Vec<Option<f64>>,
    pub n_eff: Vec<usize>,
}

impl CurveResult {
    /// Interval centers: the order-q estimates under robust bias correction,
    /// otherwise the point estimates.
    fn centers(&self) -> Vec<f64> {
        self.valid
            .iter()
            .map(|&j| self.points[j].tau_rbc.unwrap_or_else(|| self.points[j].tau.unwrap()))
            .collect()
    }

    pub fn report(&self) -> CurveReport {
        CurveReport {
            method: self.method,
            p_used: self.p_used,
            q_used: self.q_used,
            alpha: self.alpha,
            band_crit: self.band_crit,
            seed: self.band_seed,
            n_gaps: self.n_gaps,
            h_per_point: self.points.iter().map(|p| p.h).collect(),
            arclength: self.points.iter().map(|p| p.arclength).collect(),
            b1: self.points.iter().map(|p| p.location.x1).collect(),
            b2: self.points.iter().map(|p| p.location.x2).collect(),
            tau_hat: self.points.iter().map(|p| p.tau).collect(),
            tau_rbc: self.points.iter().map(|p| p.tau_rbc).collect(),
            se: self.points.iter().map(|p| p.se).collect(),
            ci_lo: self.points.iter().map(|p| p.ci.map(|c| c.0)).collect(),
            ci_hi: self.points.iter().map(|p| p.ci.map(|c| c.1)).collect(),
            band_lo: self.points.iter().map(|p| p.band.map(|b| b.0)).collect(),
            band_hi: self.points.iter().map(|p| p.band.map(|b| b.1)).collect(),
            n_eff: self.points.iter().map(|p| p.n_eff).collect(),
        }
    }
}

/// Base and (optional) bias-correction fit for one grid point.
type FitPair = (Result<PointFit, Error>, Option<Result<PointFit, Error>>);

struct PointFit {
    tau: f64,
    se: f64,
    n_eff: usize,
    /// (frame row, influence value) pairs for the treatment coefficient.
    influence: Vec<(usize, f64)>,
}

/// Interacted local fit at one boundary point. Both methods share the same
/// radial window: the location-based kernel profile of `|X - b|/h` equals
/// the distance-based profile of `|D(b)|/h`.
fn fit_point(
    method: CurveMethod,
    frame: &SampleFrame,
    b: Point,
    p: usize,
    kernel: KernelKind,
    h: f64,
    vce: Vce,
) -> Result<PointFit, Error> {
    if !(h > 0.0) {
        return Err(Error::NonpositiveBandwidth);
    }
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    let (mut n1, mut n0) = (0usize, 0usize);
    for i in 0..frame.len() {
        let dist = frame.x[i].dist(b);
        let w = kernel.profile(dist / h);
        if w > 0.0 {
            rows.push(i);
            weights.push(w);
            if frame.t[i] {
                n1 += 1;
            } else {
                n0 += 1;
            }
        }
    }
    if n1 == 0 || n0 == 0 {
        return Err(Error::EmptyWindow);
    }
    let n_basis = match method {
        CurveMethod::Distance => p,
        CurveMethod::Location => p * (p + 3) / 2,
    };
    let n_cols = 2 + 2 * n_basis;
    let mut z = DMatrix::zeros(rows.len(), n_cols);
    let mut y = DVector::zeros(rows.len());
    for (r, &i) in rows.iter().enumerate() {
        let t = if frame.t[i] { 1.0 } else { 0.0 };
        z[(r, 0)] = 1.0;
        z[(r, 1)] = t;
        let basis = match method {
            CurveMethod::Distance => {
                let sign = if frame.t[i] { 1.0 } else { -1.0 };
                basis_uni(sign * frame.x[i].dist(b), p)
            }
            CurveMethod::Location => basis_biv(frame.x[i] - b, p),
        };
        for (k, &v) in basis.iter().enumerate() {
            z[(r, 2 + k)] = v;
            z[(r, 2 + n_basis + k)] = t * v;
        }
        y[r] = frame.y[i];
    }
    let w = DVector::from_vec(weights);
    let fit = wls(&z, &y, &w, vce)?;
    if !fit.dropped_columns.is_empty() {
        return Err(Error::degenerate(format!(
            "local design rank-deficient ({} of {} columns dropped)",
            fit.dropped_columns.len(),
            n_cols
        )));
    }
    let influence_local = fit.influence(&z, &w, 1);
    let influence = influence_local.into_iter().map(|(r, v)| (rows[r], v)).collect();
    Ok(PointFit { tau: fit.coefficients[1], se: fit.se(1), n_eff: fit.effective_n, influence })
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    method: CurveMethod,
    frame: &SampleFrame,
    grid: &GridSpec,
    p: usize,
    q: Option<usize>,
    kernel: KernelKind,
    hs: &[f64],
    alpha: f64,
    vce: Vce,
) -> Result<CurveResult, Error> {
    if let Some(q) = q {
        if q <= p {
            return Err(Error::OrderNotGreater { p, q });
        }
    }
    if hs.len() != grid.len() {
        return Err(Error::invalid("one bandwidth per grid point required"));
    }
    if hs.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::NonpositiveBandwidth);
    }
    // every grid point fits independently over the immutable frame
    let fits: Vec<FitPair> = grid
        .points
        .par_iter()
        .zip(hs.par_iter())
        .map(|(&b, &h)| {
            let base = fit_point(method, frame, b, p, kernel, h, vce);
            let high = q.map(|q| fit_point(method, frame, b, q, kernel, h, vce));
            (base, high)
        })
        .collect();

    let z = z_crit(alpha);
    let mut points = Vec::with_capacity(grid.len());
    let mut valid = Vec::new();
    let mut inference_influences: Vec<Vec<(usize, f64)>> = Vec::new();
    for (j, (base, high)) in fits.into_iter().enumerate() {
        let arclength = grid.arclengths[j];
        let location = grid.points[j];
        let h = hs[j];
        match (base, high) {
            (Ok(bf), None) => {
                let ci = (bf.tau - z * bf.se, bf.tau + z * bf.se);
                points.push(CurvePoint {
                    arclength,
                    location,
                    h,
                    tau: Some(bf.tau),
                    tau_rbc: None,
                    se: Some(bf.se),
                    ci: Some(ci),
                    band: None,
                    n_eff: bf.n_eff,
                    gap_reason: None,
                });
                valid.push(j);
                inference_influences.push(bf.influence);
            }
            (Ok(bf), Some(Ok(hf))) => {
                let ci = (hf.tau - z * hf.se, hf.tau + z * hf.se);
                points.push(CurvePoint {
                    arclength,
                    location,
                    h,
                    tau: Some(bf.tau),
                    tau_rbc: Some(hf.tau),
                    se: Some(hf.se),
                    ci: Some(ci),
                    band: None,
                    n_eff: bf.n_eff,
                    gap_reason: None,
                });
                valid.push(j);
                inference_influences.push(hf.influence);
            }
            (Err(e), _) | (_, Some(Err(e))) => {
                points.push(CurvePoint {
                    arclength,
                    location,
                    h,
                    tau: None,
                    tau_rbc: None,
                    se: None,
                    ci: None,
                    band: None,
                    n_eff: 0,
                    gap_reason: Some(e.to_string()),
                });
            }
        }
    }
    if valid.is_empty() {
        return Err(Error::EmptyWindow);
    }

    // joint covariance from shared-observation influences
    let nv = valid.len();
    let mut q_mat = DMatrix::zeros(frame.len(), nv);
    for (c, infl) in inference_influences.iter().enumerate() {
        for &(row, v) in infl {
            q_mat[(row, c)] = v;
        }
    }
    let cov = q_mat.transpose() * &q_mat;

    let n_gaps = grid.len() - nv;
    Ok(CurveResult {
        method,
        p_used: p,
        q_used: q,
        alpha,
        points,
        valid,
        cov,
        band_crit: None,
        band_seed: None,
        n_gaps,
    })
}

/// Distance-based curve: per grid point, an interacted local polynomial in
/// the point-specific signed distance.
pub fn estimate_distance(
    frame: &SampleFrame,
    grid: &GridSpec,
    p: usize,
    kernel: KernelKind,
    h: f64,
    alpha: f64,
) -> Result<CurveResult, Error> {
    assemble(CurveMethod::Distance, frame, grid, p, None, kernel, &vec![h; grid.len()], alpha, Vce::default())
}

/// Location-based curve: per grid point, an interacted local polynomial in
/// the centered bivariate score with a radial kernel.
pub fn estimate_location(
    frame: &SampleFrame,
    grid: &GridSpec,
    p: usize,
    kernel: KernelKind,
    h: f64,
    alpha: f64,
) -> Result<CurveResult, Error> {
    assemble(CurveMethod::Location, frame, grid, p, None, kernel, &vec![h; grid.len()], alpha, Vce::default())
}

/// Robust bias-corrected curve: point estimates from the order-p fits,
/// intervals, covariance, and the sup-t band from the order-q fits at the
/// same bandwidth. The band uses `n_draws` seeded Gaussian draws.
#[allow(clippy::too_many_arguments)]
pub fn estimate_curve_rbc(
    method: CurveMethod,
    frame: &SampleFrame,
    grid: &GridSpec,
    p: usize,
    q: usize,
    kernel: KernelKind,
    h: f64,
    alpha: f64,
    n_draws: usize,
    seed: u64,
) -> Result<CurveResult, Error> {
    estimate_curve_rbc_per_point(method, frame, grid, p, q, kernel, &vec![h; grid.len()], alpha, n_draws, seed)
}

/// [`estimate_curve_rbc`] with an explicit bandwidth for each grid point.
#[allow(clippy::too_many_arguments)]
pub fn estimate_curve_rbc_per_point(
    method: CurveMethod,
    frame: &SampleFrame,
    grid: &GridSpec,
    p: usize,
    q: usize,
    kernel: KernelKind,
    hs: &[f64],
    alpha: f64,
    n_draws: usize,
    seed: u64,
) -> Result<CurveResult, Error> {
    let mut curve = assemble(method, frame, grid, p, Some(q), kernel, hs, alpha, Vce::default())?;
    apply_band(&mut curve, alpha, n_draws, seed)?;
    Ok(curve)
}

/// Sup-t critical value: the `1 - alpha` quantile of `max_j |G_j|` over
/// draws of a centered Gaussian vector with the curve's correlation
/// structure. Rank-deficient correlation matrices are handled by clipping
/// eigenvalues at `1e-12`.
pub fn uniform_band(
    curve: &CurveResult,
    alpha: f64,
    n_draws: usize,
    seed: u64,
) -> Result<(f64, Vec<Option<(f64, f64)>>), Error> {
    #![allow(clippy::type_complexity)]
    let nv = curve.valid.len();
    if nv == 0 {
        return Err(Error::EmptyWindow);
    }
    if n_draws == 0 {
        return Err(Error::invalid("need at least one draw"));
    }
    let sds: Vec<f64> = (0..nv).map(|a| curve.cov[(a, a)].max(0.0).sqrt()).collect();
    if sds.contains(&0.0) {
        return Err(Error::degenerate("zero variance at a grid point"));
    }
    let mut corr = DMatrix::zeros(nv, nv);
    for a in 0..nv {
        for b in 0..nv {
            corr[(a, b)] = curve.cov[(a, b)] / (sds[a] * sds[b]);
        }
    }
    let eig = nalgebra::SymmetricEigen::new(corr);
    let clipped = DVector::from_iterator(nv, eig.eigenvalues.iter().map(|&l| l.max(1e-12)));
    let mut factor = eig.eigenvectors.clone();
    for c in 0..nv {
        let s = clipped[c].sqrt();
        for r in 0..nv {
            factor[(r, c)] *= s;
        }
    }
    // per-coordinate standard deviations of the clipped correlation
    let row_sd: Vec<f64> = (0..nv).map(|r| factor.row(r).norm()).collect();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut maxima = Vec::with_capacity(n_draws);
    let mut xi = DVector::zeros(nv);
    for _ in 0..n_draws {
        for k in 0..nv {
            xi[k] = StandardNormal.sample(&mut rng);
        }
        let g = &factor * &xi;
        let m = (0..nv).map(|r| (g[r] / row_sd[r]).abs()).fold(0.0f64, f64::max);
        maxima.push(m);
    }
    maxima.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ((1.0 - alpha) * n_draws as f64).ceil() as usize;
    // a sup-t quantile can never fall below the pointwise one
    let crit = maxima[k.clamp(1, n_draws) - 1].max(z_crit(alpha));

    let centers = curve.centers();
    let mut bands: Vec<Option<(f64, f64)>> = vec![None; curve.points.len()];
    for (a, &j) in curve.valid.iter().enumerate() {
        bands[j] = Some((centers[a] - crit * sds[a], centers[a] + crit * sds[a]));
    }
    Ok((crit, bands))
}

/// Compute the band and store it on the curve.
pub fn apply_band(curve: &mut CurveResult, alpha: f64, n_draws: usize, seed: u64) -> Result<(), Error> {
    let (crit, bands) = uniform_band(curve, alpha, n_draws, seed)?;
    for (j, band) in bands.into_iter().enumerate() {
        curve.points[j].band = band;
    }
    curve.band_crit = Some(crit);
    curve.band_seed = Some(seed);
    Ok(())
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Weighting scheme for the weighted boundary average.
pub enum Weighting<'a> {
    Uniform,
    /// Boundary-local density weights: observation counts in the tubular
    /// slice around each grid point (nearest-arclength interval, distance
    /// within the curve's own bandwidth), normalized by slice width.
    Density { frame: &'a SampleFrame, h: f64 },
    User(&'a dyn Fn(Point) -> f64),
}

impl Weighting<'_> {
    fn label(&self) -> &'static str {
        match self {
            Weighting::Uniform => "uniform",
            Weighting::Density { .. } => "density",
            Weighting::User(_) => "user",
        }
    }
}

/// Tubular-slice density weights at the given arclength positions: count
/// the observations whose nearest boundary point falls in each slice and
/// whose distance is within `h`, then divide by the slice's arclength
/// width. Points projecting exactly onto an open curve's endpoints (the
/// caps past the ends) are left out.
fn density_slice_weights(
    frame: &SampleFrame,
    boundary: &Boundary,
    s: &[f64],
    h: f64,
) -> Result<Vec<f64>, Error> {
    if !(h > 0.0) {
        return Err(Error::NonpositiveBandwidth);
    }
    let nv = s.len();
    let total = boundary.total_length();
    // slice edges at midpoints between consecutive grid arclengths
    let mut edges = Vec::with_capacity(nv + 1);
    if boundary.is_closed() {
        let wrap_lo = 0.5 * (s[0] + (s[nv - 1] - total));
        edges.push(wrap_lo);
        for k in 0..nv - 1 {
            edges.push(0.5 * (s[k] + s[k + 1]));
        }
        edges.push(wrap_lo + total);
    } else {
        edges.push(0.0);
        for k in 0..nv - 1 {
            edges.push(0.5 * (s[k] + s[k + 1]));
        }
        edges.push(total);
    }
    let mut counts = vec![0.0f64; nv];
    for &x in &frame.x {
        let proj = boundary.closest_point(x);
        if proj.distance > h {
            continue;
        }
        let mut pos = proj.arclength;
        if !boundary.is_closed() && (pos == 0.0 || pos == total) {
            continue; // end caps lie outside the slab the boundary splits
        }
        if boundary.is_closed() && pos >= *edges.last().unwrap() {
            pos -= total; // tail of the loop belongs to the wrap slice
        }
        let k = edges.partition_point(|&e| e <= pos).saturating_sub(1).min(nv - 1);
        counts[k] += 1.0;
    }
    Ok((0..nv).map(|k| counts[k] / (edges[k + 1] - edges[k]).max(f64::MIN_POSITIVE)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateResult {
    pub wbate: f64,
    pub wbate_se: f64,
    pub lbate: f64,
    pub lbate_point: Point,
    pub lbate_arclength: f64,
    pub weights_used: &'static str,
    pub n_valid: usize,
    pub n_gaps: usize,
}

/// Plug-in aggregates: trapezoidal arclength quadrature of the curve for
/// the weighted average, the maximum for the largest effect. Gaps are
/// skipped; the standard error is the quadrature quadratic form against the
/// joint covariance.
pub fn aggregate(
    curve: &CurveResult,
    boundary: &Boundary,
    weighting: &Weighting<'_>,
) -> Result<AggregateResult, Error> {
    let nv = curve.valid.len();
    if nv < 2 {
        return Err(Error::invalid("aggregation needs at least 2 valid grid points"));
    }
    let s: Vec<f64> = curve.valid.iter().map(|&j| curve.points[j].arclength).collect();
    let taus: Vec<f64> = curve.valid.iter().map(|&j| curve.points[j].tau.unwrap()).collect();
    let locs: Vec<Point> = curve.valid.iter().map(|&j| curve.points[j].location).collect();

    let weights: Vec<f64> = match weighting {
        Weighting::Uniform => vec![1.0; nv],
        Weighting::Density { frame, h } => density_slice_weights(frame, boundary, &s, *h)?,
        Weighting::User(f) => locs.iter().map(|&b| f(b)).collect(),
    };
    if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
        return Err(Error::invalid("aggregation weights must be finite and nonnegative"));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::AllWeightsZero);
    }

    // trapezoid coefficients over the (possibly gappy) arclengths; closed
    // boundaries wrap around
    let total = boundary.total_length();
    let mut trap = vec![0.0; nv];
    for a in 0..nv.saturating_sub(1) {
        let width = s[a + 1] - s[a];
        trap[a] += 0.5 * width;
        trap[a + 1] += 0.5 * width;
    }
    if boundary.is_closed() {
        let wrap = total - s[nv - 1] + s[0];
        trap[nv - 1] += 0.5 * wrap;
        trap[0] += 0.5 * wrap;
    }

    let denom: f64 = trap.iter().zip(&weights).map(|(&c, &w)| c * w).sum();
    if denom <= 0.0 {
        return Err(Error::AllWeightsZero);
    }
    let coeffs: Vec<f64> = trap.iter().zip(&weights).map(|(&c, &w)| c * w / denom).collect();
    let wbate: f64 = coeffs.iter().zip(&taus).map(|(&a, &t)| a * t).sum();
    let mut wbate_var = 0.0;
    for a in 0..nv {
        for b in 0..nv {
            wbate_var += coeffs[a] * coeffs[b] * curve.cov[(a, b)];
        }
    }

    let (arg, _) = taus
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .unwrap();
    Ok(AggregateResult {
        wbate,
        wbate_se: wbate_var.max(0.0).sqrt(),
        lbate: taus[arg],
        lbate_point: locs[arg],
        lbate_arclength: s[arg],
        weights_used: weighting.label(),
        n_valid: nv,
        n_gaps: curve.n_gaps,
    })
}
