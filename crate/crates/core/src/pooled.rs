//! Pooled treatment-effect estimation over the whole boundary.
//!
//! Eight regression specifications cover the designs found in applied work,
//! from the local difference-in-means through fully interacted local
//! polynomials with segment fixed effects and per-segment effects:
//!
//! 1. `[1, T]`
//! 2. `[i_L(S), T]`
//! 3. `[i_L(S), T, r_p(X)]`
//! 4. `[1, T, r_p(D)]`
//! 5. `[i_L(S), T, r_p(D)]`
//! 6. `[i_L(S), T, r_p(D), T*r_p(D)]`
//! 7. `[i_L(S), T, r_p(X), T*r_p(X)]`
//! 8. `[i_L(S), T*i_L(S), i_L(S)⊗r_p(D), T*i_L(S)⊗r_p(D)]`
//!
//! Specs 1-3 carry the plain window indicator; the kernel choice applies to
//! specs 4-8 only. The treatment effect is the coefficient on `T` (the
//! coefficients on `T*i_L(S)` for spec 8). Robust bias correction re-runs
//! the fit at a higher order `q` with the same bandwidth and takes both the
//! recentered estimate and its variance from that fit.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bandwidth::BandwidthResult;
use crate::error::Error;
use crate::frame::SampleFrame;
use crate::regress::{basis_biv, basis_uni, wls, z_crit, KernelKind, Vce, WlsFit};

/// Configuration of one pooled specification.
#[derive(Debug, Clone, Copy)]
pub struct PooledSpec {
    id: u8,
    p: usize,
    l: usize,
    pub kernel: KernelKind,
    pub h: f64,
}

impl PooledSpec {
    /// Specs 1 and 2 are local-constant; any requested order is forced to 0.
    /// Spec 8 needs at least one segment.
    pub fn new(id: u8, p: usize, l: usize, kernel: KernelKind, h: f64) -> Result<Self, Error> {
        if !(1..=8).contains(&id) {
            return Err(Error::invalid(format!("specification id {id} outside 1..8")));
        }
        if l == 0 {
            return Err(Error::invalid("segment count L must be at least 1"));
        }
        if !(h > 0.0) {
            return Err(Error::NonpositiveBandwidth);
        }
        let p = if id <= 2 { 0 } else { p };
        Ok(PooledSpec { id, p, l, kernel, h })
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn segments(&self) -> usize {
        self.l
    }

    pub fn with_order(&self, p: usize) -> PooledSpec {
        PooledSpec { p, ..*self }
    }

    pub fn with_bandwidth(&self, h: f64) -> PooledSpec {
        PooledSpec { h, ..*self }
    }

    fn uses_uniform_weights(&self) -> bool {
        self.id <= 3
    }
}

/// Design triple plus bookkeeping for coefficient extraction.
pub struct Design {
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
    pub w: DVector<f64>,
    /// Columns holding the treatment coefficient(s).
    pub t_cols: Vec<usize>,
    pub n_treated: usize,
    pub n_control: usize,
    /// Frame row behind each design row.
    pub rows: Vec<usize>,
}

/// Point estimate(s) with conventional and robust bias-corrected intervals.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub tau_hat: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_conventional: Vec<(f64, f64)>,
    /// Present after robust bias correction.
    pub tau_rbc: Option<Vec<f64>>,
    pub se_rbc: Option<Vec<f64>>,
    pub ci_rbc: Option<Vec<(f64, f64)>>,
    pub n_treated: usize,
    pub n_control: usize,
    pub h_used: f64,
    pub p_used: usize,
    pub q_used: Option<usize>,
    pub alpha: f64,
    pub spec_id: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<BandwidthResult>,
}

impl EstimateResult {
    /// Scalar accessor for single-coefficient specs.
    pub fn tau(&self) -> f64 {
        self.tau_hat[0]
    }
}

/// Assemble the design matrix, outcome, and weights for a specification.
///
/// Rows are restricted to the tubular window (positive weight). Errors with
/// `EmptyWindow` when either side of the boundary has no weighted
/// observation.
pub fn build_design(spec: &PooledSpec, frame: &SampleFrame) -> Result<Design, Error> {
    if spec.l > 1 && frame.n_segments() != spec.l {
        return Err(Error::invalid(format!(
            "spec expects L={} segments but the frame was derived with {}",
            spec.l,
            frame.n_segments()
        )));
    }
    let kernel = if spec.uses_uniform_weights() { KernelKind::Uniform } else { spec.kernel };
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    let (mut n_treated, mut n_control) = (0usize, 0usize);
    for i in 0..frame.len() {
        let w = kernel.profile(frame.d[i].abs() / spec.h);
        if w > 0.0 {
            rows.push(i);
            weights.push(w);
            if frame.t[i] {
                n_treated += 1;
            } else {
                n_control += 1;
            }
        }
    }
    if n_treated == 0 || n_control == 0 {
        return Err(Error::EmptyWindow);
    }

    let l = spec.l;
    let p = spec.p;
    let uni_terms = p;
    let biv_terms = p * (p + 3) / 2;
    let (n_cols, t_cols): (usize, Vec<usize>) = match spec.id {
        1 => (2, vec![1]),
        2 => (l + 1, vec![l]),
        3 => (l + 1 + biv_terms, vec![l]),
        4 => (2 + uni_terms, vec![1]),
        5 => (l + 1 + uni_terms, vec![l]),
        6 => (l + 1 + 2 * uni_terms, vec![l]),
        7 => (l + 1 + 2 * biv_terms, vec![l]),
        8 => (2 * l + 2 * l * uni_terms, (l..2 * l).collect()),
        _ => unreachable!(),
    };

    let mut z = DMatrix::zeros(rows.len(), n_cols);
    for (r, &i) in rows.iter().enumerate() {
        let t = if frame.t[i] { 1.0 } else { 0.0 };
        let seg = frame.s[i] - 1; // 1-based to 0-based
        let seg = if l == 1 { 0 } else { seg };
        let mut c = 0;
        let push = |z: &mut DMatrix<f64>, c: &mut usize, v: f64| {
            z[(r, *c)] = v;
            *c += 1;
        };
        match spec.id {
            1 => {
                push(&mut z, &mut c, 1.0);
                push(&mut z, &mut c, t);
            }
            2 => {
                for k in 0..l {
                    push(&mut z, &mut c, if k == seg { 1.0 } else { 0.0 });
                }
                push(&mut z, &mut c, t);
            }
            3 | 7 => {
                for k in 0..l {
                    push(&mut z, &mut c, if k == seg { 1.0 } else { 0.0 });
                }
                push(&mut z, &mut c, t);
                let basis = basis_biv(frame.x[i], p);
                for &v in &basis {
                    push(&mut z, &mut c, v);
                }
                if spec.id == 7 {
                    for &v in &basis {
                        push(&mut z, &mut c, t * v);
                    }
                }
            }
            4 => {
                push(&mut z, &mut c, 1.0);
                push(&mut z, &mut c, t);
                for v in basis_uni(frame.d[i], p) {
                    push(&mut z, &mut c, v);
                }
            }
            5 | 6 => {
                for k in 0..l {
                    push(&mut z, &mut c, if k == seg { 1.0 } else { 0.0 });
                }
                push(&mut z, &mut c, t);
                let basis = basis_uni(frame.d[i], p);
                for &v in &basis {
                    push(&mut z, &mut c, v);
                }
                if spec.id == 6 {
                    for &v in &basis {
                        push(&mut z, &mut c, t * v);
                    }
                }
            }
            8 => {
                // [i_L(S), T*i_L(S), i_L(S)⊗r_p(D), T*i_L(S)⊗r_p(D)]
                for k in 0..l {
                    push(&mut z, &mut c, if k == seg { 1.0 } else { 0.0 });
                }
                for k in 0..l {
                    push(&mut z, &mut c, if k == seg { t } else { 0.0 });
                }
                let basis = basis_uni(frame.d[i], p);
                for k in 0..l {
                    for &v in &basis {
                        push(&mut z, &mut c, if k == seg { v } else { 0.0 });
                    }
                }
                for k in 0..l {
                    for &v in &basis {
                        push(&mut z, &mut c, if k == seg { t * v } else { 0.0 });
                    }
                }
            }
            _ => unreachable!(),
        }
        debug_assert_eq!(c, n_cols);
    }

    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| frame.y[i]));
    let w = DVector::from_vec(weights);
    Ok(Design { z, y, w, t_cols, n_treated, n_control, rows })
}

fn fit_design(design: &Design, vce: Vce) -> Result<(WlsFit, Vec<f64>, Vec<f64>), Error> {
    let fit = wls(&design.z, &design.y, &design.w, vce)?;
    for &c in &design.t_cols {
        if fit.is_dropped(c) {
            return Err(Error::degenerate("treatment coefficient not identified in the window"));
        }
    }
    let tau: Vec<f64> = design.t_cols.iter().map(|&c| fit.coefficients[c]).collect();
    let se: Vec<f64> = design.t_cols.iter().map(|&c| fit.se(c)).collect();
    Ok((fit, tau, se))
}

/// Point estimation with conventional (order-p) inference.
pub fn estimate(spec: &PooledSpec, frame: &SampleFrame, alpha: f64) -> Result<EstimateResult, Error> {
    estimate_vce(spec, frame, alpha, Vce::default())
}

pub fn estimate_vce(
    spec: &PooledSpec,
    frame: &SampleFrame,
    alpha: f64,
    vce: Vce,
) -> Result<EstimateResult, Error> {
    let design = build_design(spec, frame)?;
    let (_, tau, se) = fit_design(&design, vce)?;
    let z = z_crit(alpha);
    let ci = tau.iter().zip(&se).map(|(&t, &s)| (t - z * s, t + z * s)).collect();
    Ok(EstimateResult {
        tau_hat: tau,
        se,
        ci_conventional: ci,
        tau_rbc: None,
        se_rbc: None,
        ci_rbc: None,
        n_treated: design.n_treated,
        n_control: design.n_control,
        h_used: spec.h,
        p_used: spec.p,
        q_used: None,
        alpha,
        spec_id: spec.id,
        bandwidth: None,
    })
}

/// The specification used for the order-q bias-correction fit.
///
/// Specs with a polynomial (4-8) are re-run as themselves at order `q`.
/// Specs 1 and 2 map to the interacted distance spec 6, spec 3 to the
/// interacted location spec 7; all three keep their indicator weights.
pub fn rbc_spec(spec: &PooledSpec, q: usize) -> PooledSpec {
    let (id, l) = match spec.id {
        1 => (6, 1),
        2 => (6, spec.l),
        3 => (7, spec.l),
        id => (id, spec.l),
    };
    PooledSpec { id, p: q, l, kernel: spec.kernel, h: spec.h }
}

/// Robust bias-corrected estimation: point estimate from the order-p fit,
/// interval from the order-q fit at the same bandwidth.
pub fn estimate_rbc(
    spec: &PooledSpec,
    frame: &SampleFrame,
    q: usize,
    alpha: f64,
) -> Result<EstimateResult, Error> {
    estimate_rbc_vce(spec, frame, q, alpha, Vce::default())
}

pub fn estimate_rbc_vce(
    spec: &PooledSpec,
    frame: &SampleFrame,
    q: usize,
    alpha: f64,
    vce: Vce,
) -> Result<EstimateResult, Error> {
    if q <= spec.p {
        return Err(Error::OrderNotGreater { p: spec.p, q });
    }
    let mut result = estimate_vce(spec, frame, alpha, vce)?;
    let high = rbc_spec(spec, q);
    let design_q = build_design(&high, frame)?;
    let (_, tau_q, se_q) = fit_design(&design_q, vce)?;
    if tau_q.len() != result.tau_hat.len() {
        return Err(Error::degenerate("bias-correction fit has a different number of effects"));
    }
    let z = z_crit(alpha);
    result.ci_rbc = Some(tau_q.iter().zip(&se_q).map(|(&t, &s)| (t - z * s, t + z * s)).collect());
    result.tau_rbc = Some(tau_q);
    result.se_rbc = Some(se_q);
    result.q_used = Some(q);
    Ok(result)
}

// ---------------------------------------------------------------------------
// RD plot bins
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinScheme {
    EvenlySpaced,
    Quantile,
}

#[derive(Debug, Clone, Serialize)]
pub struct RdBin {
    /// -1 control, +1 treated.
    pub side: i8,
    pub center: f64,
    /// `None` marks an empty bin.
    pub mean_y: Option<f64>,
    pub count: usize,
}

/// Binned outcome means against the signed distance, for RD plots. Bins
/// partition `[-h, 0)` and `[0, h]`, or the observed support when `h` is
/// unset. Empty bins are emitted with a count of zero.
pub fn rd_plot_bins(
    frame: &SampleFrame,
    n_bins_per_side: usize,
    scheme: BinScheme,
    h: Option<f64>,
) -> Result<Vec<RdBin>, Error> {
    if n_bins_per_side == 0 {
        return Err(Error::invalid("need at least one bin per side"));
    }
    if let Some(h) = h {
        if !(h > 0.0) {
            return Err(Error::NonpositiveBandwidth);
        }
    }
    let mut out = Vec::with_capacity(2 * n_bins_per_side);
    for side in [-1i8, 1i8] {
        let treated = side > 0;
        let ds: Vec<(f64, f64)> = frame
            .d
            .iter()
            .zip(&frame.y)
            .filter(|(&d, _)| (d >= 0.0) == treated && h.is_none_or(|h| d.abs() <= h))
            .map(|(&d, &y)| (d, y))
            .collect();
        let (lo, hi) = match h {
            Some(h) => {
                if treated {
                    (0.0, h)
                } else {
                    (-h, 0.0)
                }
            }
            None => {
                let min = ds.iter().map(|&(d, _)| d).fold(f64::INFINITY, f64::min);
                let max = ds.iter().map(|&(d, _)| d).fold(f64::NEG_INFINITY, f64::max);
                if treated {
                    (0.0, if max.is_finite() { max } else { 1.0 })
                } else {
                    (if min.is_finite() { min } else { -1.0 }, 0.0)
                }
            }
        };
        let edges: Vec<f64> = match scheme {
            BinScheme::EvenlySpaced => (0..=n_bins_per_side)
                .map(|k| lo + (hi - lo) * k as f64 / n_bins_per_side as f64)
                .collect(),
            BinScheme::Quantile => {
                let mut vals: Vec<f64> = ds.iter().map(|&(d, _)| d).collect();
                vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if vals.is_empty() {
                    (0..=n_bins_per_side)
                        .map(|k| lo + (hi - lo) * k as f64 / n_bins_per_side as f64)
                        .collect()
                } else {
                    (0..=n_bins_per_side)
                        .map(|k| quantile_linear(&vals, k as f64 / n_bins_per_side as f64))
                        .collect()
                }
            }
        };
        let mut sums = vec![0.0; n_bins_per_side];
        let mut counts = vec![0usize; n_bins_per_side];
        for &(d, y) in &ds {
            let mut bin = n_bins_per_side - 1;
            for k in 0..n_bins_per_side {
                // right-open bins, last bin closed
                if d < edges[k + 1] || (k == n_bins_per_side - 1 && d <= edges[k + 1]) {
                    bin = k;
                    break;
                }
            }
            sums[bin] += y;
            counts[bin] += 1;
        }
        for k in 0..n_bins_per_side {
            out.push(RdBin {
                side,
                center: 0.5 * (edges[k] + edges[k + 1]),
                mean_y: (counts[k] > 0).then(|| sums[k] / counts[k] as f64),
                count: counts[k],
            });
        }
    }
    Ok(out)
}

/// Linear-interpolation quantile of a sorted slice.
fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Closed-form local difference in means; the brute-force counterpart of
/// spec 1 used by tests and the acceptance suite.
pub fn dim_closed_form(frame: &SampleFrame, h: f64) -> Option<f64> {
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..frame.len() {
        let d = frame.d[i];
        if d >= 0.0 && d <= h {
            s1 += frame.y[i];
            n1 += 1;
        } else if d >= -h && d < 0.0 {
            s0 += frame.y[i];
            n0 += 1;
        }
    }
    if n1 == 0 || n0 == 0 {
        return None;
    }
    Some(s1 / n1 as f64 - s0 / n0 as f64)
}
