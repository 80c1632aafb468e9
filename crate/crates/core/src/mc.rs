//! Monte Carlo driver for coverage, bias, and rate experiments.
//!
//! Replications are independent jobs with per-rep seeds derived from a
//! single master seed through a counter-based splitter, so runs are
//! reproducible and safe to execute concurrently; aggregation follows rep
//! index order.

use rayon::prelude::*;
use serde::Serialize;

use crate::bandwidth;
use crate::curve::{self, CurveMethod, GridSpec};
use crate::dgp::DgpSpec;
use crate::error::Error;
use crate::frame::SampleFrame;
use crate::pooled::{self, PooledSpec};
use crate::regress::KernelKind;

/// Counter-based seed stream: `splitmix64(master ^ (stream * golden))`.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Bandwidth source for a Monte Carlo estimator.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum HSource {
    Fixed(f64),
    Mse,
}

/// What to estimate on each replication.
#[derive(Debug, Clone, Serialize)]
pub enum McEstimator {
    /// A pooled specification targeting the boundary average effect.
    Pooled { spec_id: u8, p: usize, q: Option<usize>, kernel: KernelKind, h: HSource },
    /// A boundary-point curve with robust bias correction and a sup-t band,
    /// targeting the effect at every grid point jointly.
    Curve {
        method: CurveMethod,
        p: usize,
        q: usize,
        grid_j: usize,
        kernel: KernelKind,
        h: HSource,
        band_draws: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub n_reps: usize,
    pub n_failures: usize,
    /// Quadrature truth of the target (boundary average for pooled runs).
    pub estimand: f64,
    pub mean_estimate: f64,
    pub mean_bias: f64,
    pub mse: f64,
    /// Empirical variance of the point estimates across replications.
    pub variance: f64,
    pub mean_h: f64,
    pub coverage_conventional: Option<f64>,
    pub coverage_rbc: Option<f64>,
    /// Curve runs: share of reps whose band covers the whole truth curve,
    /// and the same for the pointwise intervals used simultaneously.
    pub band_simultaneous_coverage: Option<f64>,
    pub pointwise_simultaneous_coverage: Option<f64>,
    pub master_seed: u64,
    pub rep_seeds: Vec<u64>,
}

struct RepOutcome {
    estimate: f64,
    h: f64,
    cover_conv: Option<bool>,
    cover_rbc: Option<bool>,
    band_covers: Option<bool>,
    pointwise_covers: Option<bool>,
}

/// Interval containment with rounding slack, so that noiseless runs where
/// the interval collapses onto the truth still count as covered.
fn covers(lo: f64, hi: f64, truth: f64) -> bool {
    let eps = 1e-12 * (1.0 + truth.abs());
    lo - eps <= truth && truth <= hi + eps
}

#[allow(clippy::too_many_arguments)]
fn run_pooled_rep(
    dgp: &DgpSpec,
    spec_id: u8,
    p: usize,
    q: Option<usize>,
    kernel: KernelKind,
    h: HSource,
    truth: f64,
    seed: u64,
) -> Result<RepOutcome, Error> {
    let (ds, _) = dgp.with_seed(seed).simulate();
    let boundary = dgp.boundary();
    let frame = SampleFrame::derive(&ds, &boundary, None)?;
    let h_val = match h {
        HSource::Fixed(v) => v,
        HSource::Mse => {
            let proxy_p = if spec_id <= 3 { p.max(1) } else { p };
            bandwidth::h_mse_pooled(&frame, proxy_p, kernel, Some(&boundary))?.h
        }
    };
    let spec = PooledSpec::new(spec_id, p, 1, kernel, h_val)?;
    let est = match q {
        Some(q) => pooled::estimate_rbc(&spec, &frame, q, 0.05)?,
        None => pooled::estimate(&spec, &frame, 0.05)?,
    };
    let (lo, hi) = est.ci_conventional[0];
    let cover_conv = covers(lo, hi, truth);
    let cover_rbc = est.ci_rbc.as_ref().map(|ci| covers(ci[0].0, ci[0].1, truth));
    Ok(RepOutcome {
        estimate: est.tau(),
        h: h_val,
        cover_conv: Some(cover_conv),
        cover_rbc,
        band_covers: None,
        pointwise_covers: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_curve_rep(
    dgp: &DgpSpec,
    method: CurveMethod,
    p: usize,
    q: usize,
    grid: &GridSpec,
    kernel: KernelKind,
    h: HSource,
    band_draws: usize,
    seed: u64,
) -> Result<RepOutcome, Error> {
    let (ds, _) = dgp.with_seed(seed).simulate();
    let boundary = dgp.boundary();
    let frame = SampleFrame::derive(&ds, &boundary, None)?;
    let h_val = match h {
        HSource::Fixed(v) => v,
        HSource::Mse => bandwidth::h_mse_integrated(&frame, &boundary, &grid.points, p, kernel)?.h,
    };
    let curve = curve::estimate_curve_rbc(
        method,
        &frame,
        grid,
        p,
        q,
        kernel,
        h_val,
        0.05,
        band_draws,
        split_seed(seed, 0xBAD5),
    )?;
    if curve.n_gaps > 0 {
        return Err(Error::degenerate(format!("{} grid points failed", curve.n_gaps)));
    }
    let mut band_covers = true;
    let mut pointwise_covers = true;
    let mut mean_tau = 0.0;
    for &j in &curve.valid {
        let truth_j = dgp.tau(curve.points[j].location);
        let (blo, bhi) = curve.points[j].band.expect("band set by rbc");
        let (clo, chi) = curve.points[j].ci.expect("ci set by rbc");
        if !covers(blo, bhi, truth_j) {
            band_covers = false;
        }
        if !covers(clo, chi, truth_j) {
            pointwise_covers = false;
        }
        mean_tau += curve.points[j].tau.unwrap();
    }
    mean_tau /= curve.valid.len() as f64;
    Ok(RepOutcome {
        estimate: mean_tau,
        h: h_val,
        cover_conv: None,
        cover_rbc: None,
        band_covers: Some(band_covers),
        pointwise_covers: Some(pointwise_covers),
    })
}

/// Run `n_reps` independent replications of the configured estimator on the
/// DGP and aggregate coverage against the quadrature truth.
pub fn monte_carlo(
    dgp: &DgpSpec,
    estimator: &McEstimator,
    n_reps: usize,
    seed: u64,
) -> Result<McReport, Error> {
    if n_reps == 0 {
        return Err(Error::invalid("n_reps must be at least 1"));
    }
    let truth = dgp.truth();
    let grid = match estimator {
        McEstimator::Curve { grid_j, .. } => Some(GridSpec::new(&dgp.boundary(), *grid_j)?),
        _ => None,
    };
    let rep_seeds: Vec<u64> = (0..n_reps).map(|r| split_seed(seed, r as u64)).collect();
    let outcomes: Vec<Result<RepOutcome, Error>> = rep_seeds
        .par_iter()
        .map(|&rep_seed| match estimator {
            McEstimator::Pooled { spec_id, p, q, kernel, h } => {
                run_pooled_rep(dgp, *spec_id, *p, *q, *kernel, *h, truth.bate, rep_seed)
            }
            McEstimator::Curve { method, p, q, kernel, h, band_draws, .. } => run_curve_rep(
                dgp,
                *method,
                *p,
                *q,
                grid.as_ref().unwrap(),
                *kernel,
                *h,
                *band_draws,
                rep_seed,
            ),
        })
        .collect();

    let mut ok = Vec::with_capacity(n_reps);
    let mut n_failures = 0usize;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(_) => n_failures += 1,
        }
    }
    if ok.is_empty() {
        return Err(Error::degenerate("every replication failed"));
    }
    let m = ok.len() as f64;
    let mean_estimate = ok.iter().map(|o| o.estimate).sum::<f64>() / m;
    let mean_bias = mean_estimate - truth.bate;
    let mse = ok.iter().map(|o| (o.estimate - truth.bate).powi(2)).sum::<f64>() / m;
    let variance = ok.iter().map(|o| (o.estimate - mean_estimate).powi(2)).sum::<f64>() / m;
    let mean_h = ok.iter().map(|o| o.h).sum::<f64>() / m;
    let rate = |f: fn(&RepOutcome) -> Option<bool>| -> Option<f64> {
        let vals: Vec<bool> = ok.iter().filter_map(f).collect();
        (!vals.is_empty()).then(|| vals.iter().filter(|&&b| b).count() as f64 / vals.len() as f64)
    };
    Ok(McReport {
        n_reps,
        n_failures,
        estimand: truth.bate,
        mean_estimate,
        mean_bias,
        mse,
        variance,
        mean_h,
        coverage_conventional: rate(|o| o.cover_conv),
        coverage_rbc: rate(|o| o.cover_rbc),
        band_simultaneous_coverage: rate(|o| o.band_covers),
        pointwise_simultaneous_coverage: rate(|o| o.pointwise_covers),
        master_seed: seed,
        rep_seeds,
    })
}
