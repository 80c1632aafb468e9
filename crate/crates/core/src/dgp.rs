//! Synthetic data generating processes for the simulation harness.
//!
//! A DGP is a boundary shape, two potential-outcome surfaces given as
//! bivariate polynomials, a noise level, a score density, a sample size,
//! and a seed. Simulation is deterministic given the seed and ships a truth
//! sidecar (the effect curve, its density-weighted average, and its
//! supremum) computed by fine quadrature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::Error;
use crate::geometry::{Boundary, Point, Region, Side};

/// Bivariate polynomial in graded-lexicographic coefficient order including
/// the constant: `1, x1, x2, x1^2, x1 x2, x2^2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly2 {
    pub coeffs: Vec<f64>,
}

impl Poly2 {
    pub fn constant(c: f64) -> Self {
        Poly2 { coeffs: vec![c] }
    }

    pub fn eval(&self, x: Point) -> f64 {
        let mut total = 0.0;
        let mut idx = 0;
        let mut g = 0usize;
        'outer: loop {
            for k in 0..=g {
                if idx >= self.coeffs.len() {
                    break 'outer;
                }
                total += self.coeffs[idx] * x.x1.powi((g - k) as i32) * x.x2.powi(k as i32);
                idx += 1;
            }
            g += 1;
        }
        total
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let coeffs: Result<Vec<f64>, _> = text.split_whitespace().map(str::parse::<f64>).collect();
        let coeffs = coeffs.map_err(|e| Error::invalid(format!("bad polynomial coefficient: {e}")))?;
        if coeffs.is_empty() {
            return Err(Error::invalid("polynomial needs at least one coefficient"));
        }
        Ok(Poly2 { coeffs })
    }

    fn to_text(&self) -> String {
        self.coeffs.iter().map(|c| crate::emit::fmt_f64(*c)).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryShape {
    Line,
    LShape,
    Jagged(usize),
}

impl BoundaryShape {
    /// Canonical boundaries on the `[-1, 1]^2` score box. `Line` runs along
    /// the horizontal axis with the upper half treated; `LShape` has the
    /// first quadrant treated; `Jagged(k)` zig-zags with `k` interior kinks,
    /// upper side treated.
    pub fn boundary(&self) -> Boundary {
        match self {
            BoundaryShape::Line => Boundary::new(
                vec![Point::new(-1.0, 0.0), Point::new(1.0, 0.0)],
                false,
                Side::Left,
            )
            .expect("canonical line boundary"),
            BoundaryShape::LShape => Boundary::new(
                vec![Point::new(1.0, 0.0), Point::new(0.0, 0.0), Point::new(0.0, 1.0)],
                false,
                Side::Right,
            )
            .expect("canonical L boundary"),
            BoundaryShape::Jagged(k) => {
                let k = *k;
                let mut vertices = Vec::with_capacity(k + 2);
                for i in 0..=(k + 1) {
                    let x = -1.0 + 2.0 * i as f64 / (k + 1) as f64;
                    let y = if i % 2 == 0 { 0.0 } else { 0.2 };
                    vertices.push(Point::new(x, y));
                }
                Boundary::new(vertices, false, Side::Left).expect("canonical jagged boundary")
            }
        }
    }

    fn name(&self) -> String {
        match self {
            BoundaryShape::Line => "line".into(),
            BoundaryShape::LShape => "l-shape".into(),
            BoundaryShape::Jagged(k) => format!("jagged({k})"),
        }
    }

    fn parse(text: &str) -> Result<Self, Error> {
        let t = text.trim();
        if t == "line" {
            return Ok(BoundaryShape::Line);
        }
        if t == "l-shape" {
            return Ok(BoundaryShape::LShape);
        }
        if let Some(rest) = t.strip_prefix("jagged(") {
            if let Some(num) = rest.strip_suffix(')') {
                let k: usize = num
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad kink count in `{t}`")))?;
                return Ok(BoundaryShape::Jagged(k));
            }
        }
        Err(Error::invalid(format!("unknown boundary shape `{t}` (line | l-shape | jagged(k))")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DensityKind {
    UniformBox,
    Tilted,
}

impl DensityKind {
    /// Sample a score on `[-1, 1]^2`.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        match self {
            DensityKind::UniformBox => Point::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)),
            DensityKind::Tilted => Point::new(tilted_inverse(rng.gen()), tilted_inverse(rng.gen())),
        }
    }

    /// Density at a point of the box.
    pub fn pdf(&self, x: Point) -> f64 {
        if x.x1.abs() > 1.0 || x.x2.abs() > 1.0 {
            return 0.0;
        }
        match self {
            DensityKind::UniformBox => 0.25,
            DensityKind::Tilted => (1.0 + 0.5 * x.x1) * (1.0 + 0.5 * x.x2) / 4.0,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            DensityKind::UniformBox => "uniform-box",
            DensityKind::Tilted => "tilted",
        }
    }

    fn parse(text: &str) -> Result<Self, Error> {
        match text.trim() {
            "uniform-box" => Ok(DensityKind::UniformBox),
            "tilted" => Ok(DensityKind::Tilted),
            other => Err(Error::invalid(format!("unknown density `{other}`"))),
        }
    }
}

/// Inverse CDF of the marginal density `f(t) = (1 + t/2) / 2` on `[-1, 1]`.
fn tilted_inverse(u: f64) -> f64 {
    2.0 * ((0.25 + 2.0 * u).sqrt() - 1.0)
}

#[derive(Debug, Clone)]
pub struct DgpSpec {
    pub shape: BoundaryShape,
    pub mu0: Poly2,
    pub mu1: Poly2,
    pub noise_sd: f64,
    pub density: DensityKind,
    pub n: usize,
    pub seed: u64,
}

/// Truth sidecar computed by fine quadrature along the boundary.
#[derive(Debug, Clone, Serialize)]
pub struct DgpTruth {
    /// Density-weighted boundary average effect.
    pub bate: f64,
    /// Uniform-weighted boundary average effect.
    pub wbate_uniform: f64,
    /// Supremum of the effect curve and where it occurs.
    pub lbate: f64,
    pub lbate_arclength: f64,
    /// Difference between the quadrature value and a 2x refinement.
    pub quad_error: f64,
    /// Effect curve on a fine arclength grid.
    pub curve: Vec<(f64, f64)>,
}

impl DgpSpec {
    pub fn boundary(&self) -> Boundary {
        self.shape.boundary()
    }

    /// Average treatment effect at a score point.
    pub fn tau(&self, x: Point) -> f64 {
        self.mu1.eval(x) - self.mu0.eval(x)
    }

    pub fn with_seed(&self, seed: u64) -> DgpSpec {
        DgpSpec { seed, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> DgpSpec {
        DgpSpec { n, ..self.clone() }
    }

    /// Deterministic simulation of `(Y, X1, X2)` rows given the seed.
    pub fn simulate(&self) -> (Dataset, DgpTruth) {
        let boundary = self.boundary();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut ds = Dataset { y: Vec::with_capacity(self.n), x: Vec::with_capacity(self.n) };
        for _ in 0..self.n {
            let x = self.density.sample(&mut rng);
            let treated = boundary.region_of(x) == Region::A1;
            let mu = if treated { self.mu1.eval(x) } else { self.mu0.eval(x) };
            let noise: f64 = if self.noise_sd > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                self.noise_sd * z
            } else {
                0.0
            };
            ds.x.push(x);
            ds.y.push(mu + noise);
        }
        (ds, self.truth())
    }

    /// Quadrature truths: `bate = int tau f / int f` along the boundary,
    /// `lbate = sup tau` on a fine grid.
    pub fn truth(&self) -> DgpTruth {
        let boundary = self.boundary();
        let n_quad = 2000.0;
        let bate = self.bate_quadrature(&boundary, n_quad);
        let bate_fine = self.bate_quadrature(&boundary, 2.0 * n_quad);
        let wbate_uniform = boundary.line_integral(|x| self.tau(x), n_quad) / boundary.total_length();
        let fine = boundary.discretize(4001).expect("fine grid");
        let arcs = boundary.discretize_arclengths(4001).expect("fine grid");
        let mut lbate = f64::NEG_INFINITY;
        let mut lbate_arclength = 0.0;
        let mut curve = Vec::with_capacity(fine.len());
        for (b, s) in fine.iter().zip(&arcs) {
            let t = self.tau(*b);
            curve.push((*s, t));
            if t > lbate {
                lbate = t;
                lbate_arclength = *s;
            }
        }
        DgpTruth { bate, wbate_uniform, lbate, lbate_arclength, quad_error: (bate - bate_fine).abs(), curve }
    }

    fn bate_quadrature(&self, boundary: &Boundary, n_quad: f64) -> f64 {
        let num = boundary.line_integral(|x| self.tau(x) * self.density.pdf(x), n_quad);
        let den = boundary.line_integral(|x| self.density.pdf(x), n_quad);
        num / den
    }

    /// Flat key-value format, one `key = value` per line.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut shape = None;
        let mut mu0 = None;
        let mut mu1 = None;
        let mut noise_sd = None;
        let mut density = None;
        let mut n = None;
        let mut seed = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: line_no,
                msg: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |msg: String| Error::Parse { line: line_no, msg };
            match key {
                "boundary" => shape = Some(BoundaryShape::parse(value).map_err(|e| bad(e.to_string()))?),
                "mu0" => mu0 = Some(Poly2::parse(value).map_err(|e| bad(e.to_string()))?),
                "mu1" => mu1 = Some(Poly2::parse(value).map_err(|e| bad(e.to_string()))?),
                "noise_sd" => {
                    noise_sd = Some(value.parse::<f64>().map_err(|e| bad(format!("bad noise_sd: {e}")))?)
                }
                "density" => density = Some(DensityKind::parse(value).map_err(|e| bad(e.to_string()))?),
                "n" => n = Some(value.parse::<usize>().map_err(|e| bad(format!("bad n: {e}")))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(format!("bad seed: {e}")))?),
                other => return Err(bad(format!("unknown key `{other}`"))),
            }
        }
        let missing = |what: &str| Error::invalid(format!("DGP spec is missing `{what}`"));
        let spec = DgpSpec {
            shape: shape.ok_or_else(|| missing("boundary"))?,
            mu0: mu0.ok_or_else(|| missing("mu0"))?,
            mu1: mu1.ok_or_else(|| missing("mu1"))?,
            noise_sd: noise_sd.ok_or_else(|| missing("noise_sd"))?,
            density: density.ok_or_else(|| missing("density"))?,
            n: n.ok_or_else(|| missing("n"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
        };
        if spec.noise_sd < 0.0 {
            return Err(Error::invalid("noise_sd must be nonnegative"));
        }
        if spec.n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        format!(
            "boundary = {}\nmu0 = {}\nmu1 = {}\nnoise_sd = {}\ndensity = {}\nn = {}\nseed = {}\n",
            self.shape.name(),
            self.mu0.to_text(),
            self.mu1.to_text(),
            crate::emit::fmt_f64(self.noise_sd),
            self.density.name(),
            self.n,
            self.seed
        )
    }

    pub fn load(path: &std::path::Path) -> Result<Self, Error> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn poly_eval_graded_order() {
        // 1 + 2 x1 + 3 x2 + 4 x1^2 + 5 x1 x2 + 6 x2^2
        let p = Poly2 { coeffs: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0] };
        assert_relative_eq!(p.eval(Point::new(1.0, 2.0)), 1.0 + 2.0 + 6.0 + 4.0 + 10.0 + 24.0);
        assert_relative_eq!(Poly2::constant(2.5).eval(Point::new(9.0, -3.0)), 2.5);
    }

    #[test]
    fn zero_effect_simulation() {
        let spec = DgpSpec {
            shape: BoundaryShape::Line,
            mu0: Poly2::parse("0.5 1.0 -0.5").unwrap(),
            mu1: Poly2::parse("0.5 1.0 -0.5").unwrap(),
            noise_sd: 0.0,
            density: DensityKind::UniformBox,
            n: 500,
            seed: 4,
        };
        let (ds, truth) = spec.simulate();
        assert_eq!(ds.len(), 500);
        assert_relative_eq!(truth.bate, 0.0, epsilon = 1e-12);
        assert_relative_eq!(truth.lbate, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_effect_truths_match() {
        let spec = DgpSpec {
            shape: BoundaryShape::LShape,
            mu0: Poly2::parse("0.1 0.3 -0.2 0.4").unwrap(),
            mu1: Poly2::parse("0.85 0.3 -0.2 0.4").unwrap(),
            noise_sd: 0.2,
            density: DensityKind::Tilted,
            n: 100,
            seed: 9,
        };
        let truth = spec.truth();
        // constant effect: every aggregate coincides, whatever the weights
        assert_relative_eq!(truth.bate, 0.75, epsilon = 1e-10);
        assert_relative_eq!(truth.wbate_uniform, 0.75, epsilon = 1e-10);
        assert_relative_eq!(truth.lbate, 0.75, epsilon = 1e-10);
        assert!(truth.quad_error < 1e-12);
    }

    #[test]
    fn l_boundary_heterogeneous_bate() {
        // tau(x) = x1 on the horizontal arm, 0 on the vertical arm (tau = x1
        // vanishes at x1 = 0), uniform density: bate = (int_0^1 t dt) / 2
        let spec = DgpSpec {
            shape: BoundaryShape::LShape,
            mu0: Poly2::constant(0.0),
            mu1: Poly2::parse("0 1 0").unwrap(),
            noise_sd: 0.0,
            density: DensityKind::UniformBox,
            n: 100,
            seed: 1,
        };
        let truth = spec.truth();
        assert_relative_eq!(truth.bate, 0.25, epsilon = 1e-10);
        assert_relative_eq!(truth.wbate_uniform, 0.25, epsilon = 1e-10);
        assert_relative_eq!(truth.lbate, 1.0, epsilon = 1e-10);
        // the maximizer is the start of the horizontal arm at arclength 0
        assert_relative_eq!(truth.lbate_arclength, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn seeded_simulation_deterministic() {
        let spec = DgpSpec {
            shape: BoundaryShape::Jagged(3),
            mu0: Poly2::parse("0 1 1").unwrap(),
            mu1: Poly2::parse("1 1 1").unwrap(),
            noise_sd: 0.7,
            density: DensityKind::Tilted,
            n: 200,
            seed: 99,
        };
        let (a, _) = spec.simulate();
        let (b, _) = spec.simulate();
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        let (c, _) = spec.with_seed(100).simulate();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn spec_file_round_trip() {
        let spec = DgpSpec {
            shape: BoundaryShape::LShape,
            mu0: Poly2::parse("0.5 -1 0.25").unwrap(),
            mu1: Poly2::parse("1.5 -1 0.25 0.1 0 0").unwrap(),
            noise_sd: 0.3,
            density: DensityKind::Tilted,
            n: 1234,
            seed: 77,
        };
        let text = spec.to_text();
        let back = DgpSpec::parse(&text).unwrap();
        assert_eq!(back.mu0, spec.mu0);
        assert_eq!(back.mu1, spec.mu1);
        assert_eq!(back.n, spec.n);
        assert_eq!(back.seed, spec.seed);
        assert_eq!(back.shape, spec.shape);
    }

    #[test]
    fn tilted_density_normalized() {
        // marginal inverse CDF hits the endpoints
        assert_relative_eq!(tilted_inverse(0.0), -1.0, epsilon = 1e-12);
        assert_relative_eq!(tilted_inverse(1.0), 1.0, epsilon = 1e-12);
        // pdf integrates to one over the box (product of marginals)
        let b = BoundaryShape::Line.boundary();
        let _ = b;
        let mut total = 0.0;
        let m = 200;
        for i in 0..m {
            for j in 0..m {
                let x = Point::new(
                    -1.0 + 2.0 * (i as f64 + 0.5) / m as f64,
                    -1.0 + 2.0 * (j as f64 + 0.5) / m as f64,
                );
                total += DensityKind::Tilted.pdf(x) * (2.0 / m as f64) * (2.0 / m as f64);
            }
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-9);
    }
}
