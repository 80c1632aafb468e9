//! Shared numeric engine: polynomial bases, kernel weights, and weighted
//! least squares with heteroskedasticity-robust sandwich covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::Point;

/// Basis kind: powers of a scalar distance, or the bivariate monomials of a
/// centered score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Univariate,
    Bivariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub order: usize,
}

impl BasisSpec {
    /// Number of basis terms (no constant).
    pub fn n_terms(&self) -> usize {
        match self.kind {
            BasisKind::Univariate => self.order,
            BasisKind::Bivariate => self.order * (self.order + 3) / 2,
        }
    }
}

/// `(d, d^2, ..., d^p)`; empty when `p = 0`.
pub fn basis_uni(d: f64, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p);
    let mut acc = 1.0;
    for _ in 0..p {
        acc *= d;
        out.push(acc);
    }
    out
}

/// Bivariate monomials without the constant, in graded-lexicographic order:
/// `(u1, u2, u1^2, u1 u2, u2^2, ..., u1^p, ..., u2^p)`.
pub fn basis_biv(u: Point, p: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(p * (p + 3) / 2);
    for g in 1..=p {
        for k in 0..=g {
            out.push(u.x1.powi((g - k) as i32) * u.x2.powi(k as i32));
        }
    }
    out
}

/// Kernel shape on the unit interval / unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    Uniform,
    Triangular,
    Epanechnikov,
}

impl KernelKind {
    /// Kernel profile at `u = |t| / h >= 0`; zero outside the unit interval.
    pub fn profile(self, u: f64) -> f64 {
        match self {
            KernelKind::Uniform => {
                if u <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::Triangular => (1.0 - u).max(0.0),
            KernelKind::Epanechnikov => 0.75 * (1.0 - u * u).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelDim {
    Univariate,
    RadialBivariate,
}

/// A kernel profile together with the dimensionality it is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Kernel {
    pub kind: KernelKind,
    pub dim: KernelDim,
}

impl Kernel {
    pub fn univariate(kind: KernelKind) -> Self {
        Kernel { kind, dim: KernelDim::Univariate }
    }

    pub fn radial(kind: KernelKind) -> Self {
        Kernel { kind, dim: KernelDim::RadialBivariate }
    }

    /// Weight for a scalar offset `t` at bandwidth `h`.
    pub fn weight(&self, t: f64, h: f64) -> Result<f64, Error> {
        if !(h > 0.0) {
            return Err(Error::NonpositiveBandwidth);
        }
        Ok(self.kind.profile(t.abs() / h))
    }

    /// Weight for a bivariate offset (radial profile of the norm).
    pub fn weight2(&self, t: Point, h: f64) -> Result<f64, Error> {
        if !(h > 0.0) {
            return Err(Error::NonpositiveBandwidth);
        }
        Ok(self.kind.profile(t.norm() / h))
    }
}

/// Heteroskedasticity-robust variance flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Vce {
    Hc0,
    Hc1,
    #[default]
    Hc3,
}

/// Weighted least squares fit.
///
/// `coefficients` and `covariance` are indexed by the original design
/// columns; entries for dropped (collinear) columns are zero and their
/// indices appear in `dropped_columns`.
#[derive(Debug, Clone)]
pub struct WlsFit {
    pub coefficients: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub effective_n: usize,
    pub dropped_columns: Vec<usize>,
    /// Residuals per input row (zero for rows with zero weight).
    pub residuals: DVector<f64>,
    pub(crate) retained: Vec<usize>,
    /// (Z' W Z)^-1 over retained columns.
    pub(crate) xtwx_inv: DMatrix<f64>,
    pub(crate) vce: Vce,
}

/// Relative pivot tolerance for dropping collinear columns.
const PIVOT_RTOL: f64 = 1e-10;

/// Column-pivoted Householder QR, used only to decide which columns to keep.
/// A column is dropped once its pivot falls to `rtol` times the largest
/// pivot. Returns `(retained, dropped)` original column indices, sorted.
fn pivoted_qr_retention(a: &DMatrix<f64>, rtol: f64) -> (Vec<usize>, Vec<usize>) {
    let n = a.nrows();
    let k = a.ncols();
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..k).collect();
    let steps = k.min(n);
    let mut rank = 0;
    let mut first_pivot = 0.0f64;
    for s in 0..steps {
        let (mut best, mut best_norm) = (s, 0.0f64);
        for j in s..k {
            let nrm = work.view_range(s..n, j..j + 1).norm_squared();
            if nrm > best_norm {
                best_norm = nrm;
                best = j;
            }
        }
        let pivot = best_norm.sqrt();
        if s == 0 {
            first_pivot = pivot;
        }
        if pivot <= rtol * first_pivot || pivot == 0.0 {
            break;
        }
        rank = s + 1;
        work.swap_columns(s, best);
        perm.swap(s, best);
        // Householder reflector annihilating below the diagonal of column s
        let mut v: Vec<f64> = (s..n).map(|i| work[(i, s)]).collect();
        let alpha = if v[0] >= 0.0 { -pivot } else { pivot };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in s..k {
                let mut dot = 0.0;
                for (r, i) in (s..n).enumerate() {
                    dot += v[r] * work[(i, j)];
                }
                let c = 2.0 * dot / vnorm2;
                for (r, i) in (s..n).enumerate() {
                    work[(i, j)] -= c * v[r];
                }
            }
        }
    }
    let mut retained: Vec<usize> = perm[..rank].to_vec();
    retained.sort_unstable();
    let mut dropped: Vec<usize> = perm[rank..].to_vec();
    dropped.sort_unstable();
    (retained, dropped)
}

/// Weighted least squares with robust sandwich covariance.
///
/// Collinear columns are detected with a column-pivoted QR of the weighted
/// design and dropped (tolerance `1e-10` relative to the largest pivot).
pub fn wls(z: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, vce: Vce) -> Result<WlsFit, Error> {
    let n = z.nrows();
    let k = z.ncols();
    if y.len() != n || w.len() != n {
        return Err(Error::invalid("wls: row count mismatch between Z, Y, W"));
    }
    if k == 0 {
        return Err(Error::degenerate("design has no columns"));
    }
    let rows: Vec<usize> = (0..n)
        .filter(|&i| {
            let wi = w[i];
            if wi < 0.0 || !wi.is_finite() {
                return false;
            }
            wi > 0.0
        })
        .collect();
    if w.iter().any(|&wi| wi < 0.0 || !wi.is_finite()) {
        return Err(Error::degenerate("negative or non-finite weight"));
    }
    let n_used = rows.len();
    if n_used == 0 {
        return Err(Error::degenerate("all weights are zero"));
    }

    // weighted design: rows scaled by sqrt(w)
    let mut a = DMatrix::zeros(n_used, k);
    let mut b = DVector::zeros(n_used);
    for (r, &i) in rows.iter().enumerate() {
        let s = w[i].sqrt();
        for c in 0..k {
            a[(r, c)] = s * z[(i, c)];
        }
        b[r] = s * y[i];
    }

    // rank detection via column-pivoted QR
    let (retained, dropped_columns) = pivoted_qr_retention(&a, PIVOT_RTOL);
    let rank = retained.len();
    if rank == 0 {
        return Err(Error::degenerate("no column survives the pivot tolerance"));
    }

    // least squares on the retained columns: R beta = Q' b
    let a_ret = a.select_columns(retained.iter());
    let qr = a_ret.qr();
    let mut qtb = b.clone();
    qr.q_tr_mul(&mut qtb);
    let r_sq = qr.r();
    let beta_ret = r_sq
        .solve_upper_triangular(&qtb.rows(0, rank).into_owned())
        .ok_or_else(|| Error::degenerate("QR solve failed on retained columns"))?;

    // (Z'WZ)^-1 = R^-1 R^-T
    let eye = DMatrix::identity(rank, rank);
    let r_inv = r_sq
        .solve_upper_triangular(&eye)
        .ok_or_else(|| Error::degenerate("singular R in retained design"))?;
    let xtwx_inv = &r_inv * r_inv.transpose();

    // residuals and leverages over used rows
    let mut residuals = DVector::zeros(n);
    let mut meat = DMatrix::zeros(rank, rank);
    let hc1 = if n_used > rank { (n_used as f64 / (n_used - rank) as f64).sqrt() } else { 1.0 };
    for &i in &rows {
        let mut fit = 0.0;
        for (jr, &c) in retained.iter().enumerate() {
            fit += z[(i, c)] * beta_ret[jr];
        }
        let e = y[i] - fit;
        residuals[i] = e;
        let zi = DVector::from_iterator(rank, retained.iter().map(|&c| z[(i, c)]));
        let e_adj = match vce {
            Vce::Hc0 => e,
            Vce::Hc1 => e * hc1,
            Vce::Hc3 => {
                let lev = w[i] * (zi.transpose() * &xtwx_inv * &zi)[(0, 0)];
                e / (1.0 - lev).max(1e-10)
            }
        };
        let scale = w[i] * e_adj;
        meat.ger(scale * scale, &zi, &zi, 1.0);
    }
    let cov_ret = &xtwx_inv * meat * &xtwx_inv;

    // scatter into full-size outputs
    let mut coefficients = DVector::zeros(k);
    let mut covariance = DMatrix::zeros(k, k);
    for (jr, &c) in retained.iter().enumerate() {
        coefficients[c] = beta_ret[jr];
        for (kr, &c2) in retained.iter().enumerate() {
            covariance[(c, c2)] = cov_ret[(jr, kr)];
        }
    }

    Ok(WlsFit {
        coefficients,
        covariance,
        effective_n: n_used,
        dropped_columns,
        residuals,
        retained,
        xtwx_inv,
        vce,
    })
}

impl WlsFit {
    pub fn is_dropped(&self, col: usize) -> bool {
        self.dropped_columns.contains(&col)
    }

    pub fn se(&self, col: usize) -> f64 {
        self.covariance[(col, col)].max(0.0).sqrt()
    }

    /// Per-observation influence on the coefficient `col`:
    /// `w_i * e~_i * z_i' (Z'WZ)^choose-1 e_col`. The sum of squares over
    /// observations reproduces the sandwich variance of that coefficient.
    pub fn influence(&self, z: &DMatrix<f64>, w: &DVector<f64>, col: usize) -> Vec<(usize, f64)> {
        let jr = match self.retained.iter().position(|&c| c == col) {
            Some(j) => j,
            None => return Vec::new(),
        };
        let g: Vec<f64> = (0..self.retained.len()).map(|r| self.xtwx_inv[(r, jr)]).collect();
        let mut out = Vec::new();
        for i in 0..z.nrows() {
            if !(w[i] > 0.0) {
                continue;
            }
            let mut zg = 0.0;
            for (r, &c) in self.retained.iter().enumerate() {
                zg += z[(i, c)] * g[r];
            }
            let e = self.residuals[i];
            let e_adj = match self.vce {
                Vce::Hc0 => e,
                Vce::Hc1 => {
                    let n_used = self.effective_n;
                    let rank = self.retained.len();
                    if n_used > rank {
                        e * (n_used as f64 / (n_used - rank) as f64).sqrt()
                    } else {
                        e
                    }
                }
                Vce::Hc3 => {
                    let mut lev = 0.0;
                    for (r, &c) in self.retained.iter().enumerate() {
                        let mut acc = 0.0;
                        for (r2, &c2) in self.retained.iter().enumerate() {
                            acc += self.xtwx_inv[(r, r2)] * z[(i, c2)];
                        }
                        lev += z[(i, c)] * acc;
                    }
                    e / (1.0 - w[i] * lev).max(1e-10)
                }
            };
            out.push((i, w[i] * e_adj * zg));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Standard normal quantile
// ---------------------------------------------------------------------------

/// Inverse standard normal CDF (rational approximation, ~1e-9 accurate).
#[allow(clippy::excessive_precision)]
pub fn norm_ppf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "norm_ppf domain is (0, 1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -norm_ppf(1.0 - p)
    }
}

/// Two-sided normal critical value for level `alpha`.
pub fn z_crit(alpha: f64) -> f64 {
    norm_ppf(1.0 - alpha / 2.0)
}
