//! Property tests for the geometry, regression, pooled, curve, and
//! bandwidth invariants.

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use bdd::curve::{estimate_location, GridSpec, Weighting};
use bdd::data::{parse_dataset, write_dataset_string, Dataset};
use bdd::dgp::{BoundaryShape, DensityKind, DgpSpec, Poly2};
use bdd::frame::SampleFrame;
use bdd::geometry::{Boundary, Point, Region, SegmentPartition, Side};
use bdd::pooled::{build_design, dim_closed_form, estimate, PooledSpec};
use bdd::regress::{basis_biv, basis_uni, wls, KernelKind, Vce};

// ---------------------------------------------------------------------------
// Boundary generators
// ---------------------------------------------------------------------------

/// X-monotone polylines are simple by construction.
fn arb_boundary() -> impl Strategy<Value = Boundary> {
    (2usize..6, any::<bool>(), -1.0f64..1.0)
        .prop_flat_map(|(n_seg, left, y0)| {
            (
                proptest::collection::vec(-0.8f64..0.8, n_seg),
                proptest::collection::vec(0.05f64..0.6, n_seg),
                Just(left),
                Just(y0),
            )
        })
        .prop_map(|(ys, dxs, left, y0)| {
            let mut vertices = vec![Point::new(-1.0, y0)];
            let mut x = -1.0;
            for (y, dx) in ys.iter().zip(&dxs) {
                x += dx;
                vertices.push(Point::new(x, *y));
            }
            Boundary::new(vertices, false, if left { Side::Left } else { Side::Right }).unwrap()
        })
}

fn arb_point() -> impl Strategy<Value = Point> {
    (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| Point::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_idempotent(boundary in arb_boundary(), q in arb_point()) {
        let p = boundary.closest_point(q);
        let again = boundary.closest_point(p.point);
        prop_assert!(again.distance <= 1e-12 * boundary.total_length().max(1.0));
    }

    #[test]
    fn triangle_consistency(boundary in arb_boundary(), q in arb_point(), t in 0.0f64..1.0) {
        // any anchor on the boundary is at least as far as the projection
        let anchor = boundary.point_at(t * boundary.total_length());
        let d_min = boundary.signed_distance(q).abs();
        let d_anchor = boundary.signed_distance_to_point(anchor, q).unwrap().abs();
        prop_assert!(d_min <= d_anchor + 1e-12);
        // equality at the minimizing anchor
        let best = boundary.closest_point(q);
        let d_best = boundary.signed_distance_to_point(best.point, q).unwrap().abs();
        prop_assert!((d_best - d_min).abs() <= 1e-9 * (1.0 + d_min));
    }

    #[test]
    fn sign_matches_region(boundary in arb_boundary(), q in arb_point()) {
        let d = boundary.signed_distance(q);
        let region = boundary.region_of(q);
        prop_assert_eq!(d >= 0.0, region == Region::A1);
    }

    #[test]
    fn isometry_equivariance(
        boundary in arb_boundary(),
        q in arb_point(),
        angle in 0.0f64..std::f64::consts::TAU,
        shift in (-3.0f64..3.0, -3.0f64..3.0),
    ) {
        let rot = |p: Point| {
            let (s, c) = angle.sin_cos();
            Point::new(c * p.x1 - s * p.x2 + shift.0, s * p.x1 + c * p.x2 + shift.1)
        };
        let moved = Boundary::new(
            boundary.vertices().iter().map(|&v| rot(v)).collect(),
            boundary.is_closed(),
            boundary.treated_side(),
        ).unwrap();
        let d1 = boundary.signed_distance(q).abs();
        let d2 = moved.signed_distance(rot(q)).abs();
        prop_assert!((d1 - d2).abs() <= 1e-10 * (1.0 + d1));

        let part1 = SegmentPartition::uniform(&boundary, 3).unwrap();
        let part2 = SegmentPartition::uniform(&moved, 3).unwrap();
        prop_assert_eq!(part1.assign(&boundary, q), part2.assign(&moved, rot(q)));

        // transported integrand: integrals agree
        let i1 = boundary.line_integral(|p| p.x1 * p.x1 + 0.5 * p.x2, 32.0);
        let inv = |p: Point| {
            let (s, c) = angle.sin_cos();
            let q = Point::new(p.x1 - shift.0, p.x2 - shift.1);
            Point::new(c * q.x1 + s * q.x2, -s * q.x1 + c * q.x2)
        };
        let i2 = moved.line_integral(|p| { let u = inv(p); u.x1 * u.x1 + 0.5 * u.x2 }, 32.0);
        prop_assert!((i1 - i2).abs() <= 1e-10 * (1.0 + i1.abs()));
    }

    #[test]
    fn discretize_ordered_and_on_boundary(boundary in arb_boundary(), j in 2usize..40) {
        let arcs = boundary.discretize_arclengths(j).unwrap();
        for w in arcs.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        for p in boundary.discretize(j).unwrap() {
            prop_assert!(boundary.signed_distance(p).abs() <= 1e-9 * boundary.total_length());
        }
    }

    #[test]
    fn line_integral_additive_over_partition(boundary in arb_boundary(), l in 1usize..5) {
        let part = SegmentPartition::uniform(&boundary, l).unwrap();
        let m = |p: Point| 1.0 + p.x1 * p.x2 + p.x2 * p.x2;
        let whole = boundary.line_integral(m, 24.0);
        let mut pieces = 0.0;
        for k in 0..l {
            pieces += boundary.integral_between(part.breakpoints()[k], part.breakpoints()[k + 1], m, 24.0);
        }
        prop_assert!((whole - pieces).abs() <= 1e-12 * whole.abs().max(1.0));
    }

    #[test]
    fn kernel_vanishes_outside_unit_window(t in -5.0f64..5.0, h in 0.01f64..3.0) {
        for kind in [KernelKind::Uniform, KernelKind::Triangular, KernelKind::Epanechnikov] {
            let w = kind.profile((t / h).abs());
            if (t / h).abs() > 1.0 {
                prop_assert_eq!(w, 0.0);
            } else {
                prop_assert!(w >= 0.0);
            }
        }
    }

    #[test]
    fn basis_consistency(d in -3.0f64..3.0, u in arb_point(), p in 1usize..5) {
        let uni = basis_uni(d, p);
        for k in 1..uni.len() {
            prop_assert!((uni[k] - d * uni[k - 1]).abs() <= 1e-12 * uni[k].abs().max(1e-6));
        }
        let biv = basis_biv(u, p);
        prop_assert_eq!(biv.len(), p * (p + 3) / 2);
        prop_assert_eq!(biv[0], u.x1);
        prop_assert_eq!(biv[1], u.x2);
    }
}

// ---------------------------------------------------------------------------
// Independent region-classification oracles
// ---------------------------------------------------------------------------

/// Star-shaped closed polygons around the origin. Comparable angular gaps
/// keep every gap below pi, so each edge stays inside its own convex
/// angular wedge and the polygon is simple by construction.
fn arb_closed_polygon() -> impl Strategy<Value = Boundary> {
    (4usize..9, any::<bool>())
        .prop_flat_map(|(n, left)| {
            (
                proptest::collection::vec(0.3f64..1.5, n),
                proptest::collection::vec(0.5f64..1.0, n),
                Just(left),
            )
        })
        .prop_map(|(radii, gaps, left)| {
            let total: f64 = gaps.iter().sum();
            let mut angle: f64 = 0.0;
            let mut vertices = Vec::with_capacity(radii.len());
            for (r, g) in radii.iter().zip(&gaps) {
                vertices.push(Point::new(r * angle.cos(), r * angle.sin()));
                angle += g / total * std::f64::consts::TAU;
            }
            Boundary::new(vertices, true, if left { Side::Left } else { Side::Right }).unwrap()
        })
}

/// Ray-casting point-in-polygon test, independent of the library's
/// nearest-feature classification.
fn ray_cast_inside(vertices: &[Point], q: Point) -> bool {
    let mut inside = false;
    let n = vertices.len();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        if (a.x2 > q.x2) != (b.x2 > q.x2) {
            let x_cross = a.x1 + (q.x2 - a.x2) / (b.x2 - a.x2) * (b.x1 - a.x1);
            if q.x1 < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn closed_region_matches_ray_casting(boundary in arb_closed_polygon(), q in arb_point()) {
        // vertices are counterclockwise, so the interior is on the left
        prop_assume!(boundary.closest_point(q).distance > 1e-6 * boundary.total_length());
        let inside = ray_cast_inside(boundary.vertices(), q);
        let expected = if boundary.treated_side() == Side::Left { inside } else { !inside };
        prop_assert_eq!(boundary.region_of(q) == Region::A1, expected);
    }

    #[test]
    fn open_region_matches_graph_test(boundary in arb_boundary(), q in arb_point()) {
        // x-monotone polylines: left of travel means above the graph
        let vs = boundary.vertices();
        prop_assume!(q.x1 > vs[0].x1 && q.x1 < vs.last().unwrap().x1);
        prop_assume!(boundary.closest_point(q).distance > 1e-6 * boundary.total_length());
        let k = (0..vs.len() - 1).find(|&k| q.x1 >= vs[k].x1 && q.x1 <= vs[k + 1].x1).unwrap();
        let t = (q.x1 - vs[k].x1) / (vs[k + 1].x1 - vs[k].x1);
        let curve_y = vs[k].x2 + t * (vs[k + 1].x2 - vs[k].x2);
        let above = q.x2 > curve_y;
        let expected = if boundary.treated_side() == Side::Left { above } else { !above };
        prop_assert_eq!(boundary.region_of(q) == Region::A1, expected);
    }
}

// ---------------------------------------------------------------------------
// WLS invariances
// ---------------------------------------------------------------------------

fn random_wls_problem(seed: u64, n: usize, k: usize) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, k, |_, c| if c == 0 { 1.0 } else { rng.gen_range(-1.0..1.0) });
    let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let w = DVector::from_fn(n, |_, _| rng.gen_range(0.1..2.0));
    (z, y, w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weight_scaling_invariance(seed in 0u64..1000, c in 0.01f64..100.0) {
        let (z, y, w) = random_wls_problem(seed, 60, 4);
        let base = wls(&z, &y, &w, Vce::Hc3).unwrap();
        let scaled = wls(&z, &y, &(w * c), Vce::Hc3).unwrap();
        for j in 0..4 {
            prop_assert!((base.coefficients[j] - scaled.coefficients[j]).abs()
                <= 1e-10 * base.coefficients[j].abs().max(1.0));
            prop_assert!((base.covariance[(j, j)] - scaled.covariance[(j, j)]).abs()
                <= 1e-10 * base.covariance[(j, j)].abs().max(1e-12));
        }
    }

    #[test]
    fn permutation_invariance(seed in 0u64..1000) {
        let (z, y, w) = random_wls_problem(seed, 40, 3);
        let base = wls(&z, &y, &w, Vce::Hc1).unwrap();
        let mut order: Vec<usize> = (0..40).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xFFFF);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let z2 = DMatrix::from_fn(40, 3, |r, c| z[(order[r], c)]);
        let y2 = DVector::from_fn(40, |r, _| y[order[r]]);
        let w2 = DVector::from_fn(40, |r, _| w[order[r]]);
        let shuffled = wls(&z2, &y2, &w2, Vce::Hc1).unwrap();
        for j in 0..3 {
            prop_assert!((base.coefficients[j] - shuffled.coefficients[j]).abs() <= 1e-10);
            prop_assert!((base.covariance[(j, j)] - shuffled.covariance[(j, j)]).abs() <= 1e-10);
        }
    }

    #[test]
    fn orthogonal_column_nesting(seed in 0u64..1000) {
        // append a column W-orthogonal to both Y and the existing design:
        // remaining coefficients stay put
        let (z, y, w) = random_wls_problem(seed, 50, 3);
        let base = wls(&z, &y, &w, Vce::Hc0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let raw = DVector::from_fn(50, |_, _| rng.gen_range(-1.0f64..1.0));
        // residualize on [Z, y] jointly so the new column is W-orthogonal
        // to the outcome and the existing design
        let mut targets = DMatrix::zeros(50, 4);
        targets.view_range_mut(0..50, 0..3).copy_from(&z);
        targets.set_column(3, &y);
        let proj = wls(&targets, &raw, &w, Vce::Hc0).unwrap();
        let extra = proj.residuals;
        let mut z2 = DMatrix::zeros(50, 4);
        z2.view_range_mut(0..50, 0..3).copy_from(&z);
        z2.set_column(3, &extra);
        let wider = wls(&z2, &y, &w, Vce::Hc0).unwrap();
        for j in 0..3 {
            prop_assert!((base.coefficients[j] - wider.coefficients[j]).abs()
                <= 1e-8 * base.coefficients[j].abs().max(1.0));
        }
        // the orthogonal column picks up nothing
        prop_assert!(wider.coefficients[3].abs() <= 1e-8);
    }
}

// ---------------------------------------------------------------------------
// Pooled invariants
// ---------------------------------------------------------------------------

fn random_line_frame(seed: u64, n: usize) -> SampleFrame {
    let boundary = BoundaryShape::Line.boundary();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Dataset::default();
    for _ in 0..n {
        let x = Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        ds.x.push(x);
        ds.y.push(0.4 * x.x1 - 0.8 * x.x2 + rng.gen_range(-0.5..0.5) + if x.x2 >= 0.0 { 0.6 } else { 0.0 });
    }
    SampleFrame::derive(&ds, &boundary, None).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dim_equals_group_means(seed in 0u64..10_000, h in 0.05f64..1.5) {
        let frame = random_line_frame(seed, 150);
        let spec = PooledSpec::new(1, 0, 1, KernelKind::Uniform, h).unwrap();
        match (estimate(&spec, &frame, 0.05), dim_closed_form(&frame, h)) {
            (Ok(e), Some(oracle)) => {
                prop_assert!((e.tau() - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
            }
            (Err(_), None) => {}
            (a, b) => prop_assert!(false, "disagreement: {:?} vs {:?}", a.map(|e| e.tau()), b),
        }
    }

    #[test]
    fn window_monotone_in_h(seed in 0u64..10_000, h1 in 0.05f64..0.7, dh in 0.0f64..0.8) {
        let frame = random_line_frame(seed, 120);
        let count = |h: f64| -> Option<usize> {
            let spec = PooledSpec::new(6, 1, 1, KernelKind::Epanechnikov, h).unwrap();
            build_design(&spec, &frame).ok().map(|d| d.rows.len())
        };
        if let (Some(n1), Some(n2)) = (count(h1), count(h1 + dh)) {
            prop_assert!(n2 >= n1);
        }
    }

    #[test]
    fn outcome_translation_invariance(seed in 0u64..10_000, c in -10.0f64..10.0) {
        let frame = random_line_frame(seed, 200);
        let mut shifted = frame.clone();
        shifted.y.iter_mut().for_each(|y| *y += c);
        for id in 1..=8u8 {
            let spec = PooledSpec::new(id, 1, 1, KernelKind::Uniform, 0.5).unwrap();
            let a = estimate(&spec, &frame, 0.05).unwrap();
            let b = estimate(&spec, &shifted, 0.05).unwrap();
            for (ta, tb) in a.tau_hat.iter().zip(&b.tau_hat) {
                prop_assert!((ta - tb).abs() <= 1e-9 * (1.0 + ta.abs()), "spec {}", id);
            }
        }
    }

    #[test]
    fn treatment_label_symmetry(seed in 0u64..10_000) {
        let frame = random_line_frame(seed, 200);
        // flipping the treated side negates D and swaps labels
        let flipped = SampleFrame::from_columns(
            frame.y.clone(),
            frame.x.clone(),
            frame.d.iter().map(|&d| -d).collect(),
            frame.t.iter().map(|&t| !t).collect(),
            frame.s.clone(),
            frame.n_segments(),
        ).unwrap();
        for id in [1u8, 4, 6] {
            let spec = PooledSpec::new(id, 1, 1, KernelKind::Triangular, 0.45).unwrap();
            let a = estimate(&spec, &frame, 0.05).unwrap();
            let b = estimate(&spec, &flipped, 0.05).unwrap();
            prop_assert!((a.tau() + b.tau()).abs() <= 1e-10 * (1.0 + a.tau().abs()), "spec {}", id);
        }
    }
}

// ---------------------------------------------------------------------------
// Curve invariants
// ---------------------------------------------------------------------------

#[test]
fn isotropic_scaling_equivariance() {
    let dgp = DgpSpec {
        shape: BoundaryShape::Line,
        mu0: Poly2::parse("0.3 0.4 -0.6 0.5 0.2 -0.4").unwrap(),
        mu1: Poly2::parse("0.9 0.1 0.3 -0.2 0.1 0.6").unwrap(),
        noise_sd: 0.3,
        density: DensityKind::UniformBox,
        n: 1500,
        seed: 61,
    };
    let boundary = dgp.boundary();
    let (ds, _) = dgp.simulate();
    let frame = SampleFrame::derive(&ds, &boundary, None).unwrap();
    let grid = GridSpec::new(&boundary, 9).unwrap();
    let base = estimate_location(&frame, &grid, 1, KernelKind::Triangular, 0.4, 0.05).unwrap();

    let c = 3.7;
    let scaled_frame = SampleFrame::from_columns(
        frame.y.clone(),
        frame.x.iter().map(|&x| x * c).collect(),
        frame.d.iter().map(|&d| d * c).collect(),
        frame.t.clone(),
        frame.s.clone(),
        frame.n_segments(),
    )
    .unwrap();
    let scaled_grid = GridSpec {
        points: grid.points.iter().map(|&p| p * c).collect(),
        arclengths: grid.arclengths.iter().map(|&s| s * c).collect(),
    };
    let scaled = estimate_location(&scaled_frame, &scaled_grid, 1, KernelKind::Triangular, 0.4 * c, 0.05).unwrap();
    assert_eq!(base.valid, scaled.valid);
    for &j in &base.valid {
        assert_relative_eq!(
            base.points[j].tau.unwrap(),
            scaled.points[j].tau.unwrap(),
            max_relative = 1e-10
        );
    }
}

#[test]
fn grid_refinement_stability() {
    // noiseless lattice: |wbate_J - wbate_2J| shrinks at least like J^-1.5
    let boundary = BoundaryShape::Line.boundary();
    let mu0 = |x: Point| 0.2 + 0.5 * x.x1 - 0.4 * x.x2 + 0.3 * x.x1 * x.x1;
    let mu1 = |x: Point| 0.7 + 0.9 * x.x1 + 0.2 * x.x2 - 0.2 * x.x1 * x.x1;
    let mut ds = Dataset::default();
    let m = 180;
    for i in 0..m {
        for j in 0..m {
            let x = Point::new(
                -1.0 + 2.0 * (i as f64 + 0.5) / m as f64,
                -1.0 + 2.0 * (j as f64 + 0.5) / m as f64,
            );
            ds.x.push(x);
            ds.y.push(if x.x2 >= 0.0 { mu1(x) } else { mu0(x) });
        }
    }
    let frame = SampleFrame::derive(&ds, &boundary, None).unwrap();
    let wbate = |j: usize| -> f64 {
        let grid = GridSpec::new(&boundary, j).unwrap();
        let c = estimate_location(&frame, &grid, 2, KernelKind::Triangular, 0.35, 0.05).unwrap();
        bdd::curve::aggregate(&c, &boundary, &Weighting::Uniform).unwrap().wbate
    };
    let js = [10usize, 20, 40];
    let deltas: Vec<f64> = js.iter().map(|&j| (wbate(j) - wbate(2 * j)).abs().max(1e-14)).collect();
    let slope = {
        let lx: Vec<f64> = js.iter().map(|&j| (j as f64).ln()).collect();
        let ly: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
        let n = lx.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        sxy / sxx
    };
    assert!(slope <= -1.5, "refinement slope {slope}, deltas {deltas:?}");
}

#[test]
fn uniform_convergence_over_n() {
    // sup_j |tau_hat - tau| falls as n grows with h ~ n^(-1/6)
    let dgp = DgpSpec {
        shape: BoundaryShape::Line,
        mu0: Poly2::parse("0.3 0.5 -0.5 0.4 0.3 0.8").unwrap(),
        mu1: Poly2::parse("0.9 0.2 0.4 -0.3 -0.2 -0.7").unwrap(),
        noise_sd: 0.4,
        density: DensityKind::UniformBox,
        n: 2000,
        seed: 71,
    };
    let boundary = dgp.boundary();
    let grid = GridSpec::new(&boundary, 15).unwrap();
    let mut sups = Vec::new();
    for n in [2000usize, 8000, 32000] {
        let (ds, _) = dgp.with_n(n).simulate();
        let frame = SampleFrame::derive(&ds, &boundary, None).unwrap();
        let h = 1.2 * (n as f64).powf(-1.0 / 6.0);
        let c = estimate_location(&frame, &grid, 1, KernelKind::Triangular, h, 0.05).unwrap();
        let sup = c
            .valid
            .iter()
            .map(|&j| (c.points[j].tau.unwrap() - dgp.tau(c.points[j].location)).abs())
            .fold(0.0f64, f64::max);
        sups.push(sup);
    }
    assert!(sups[1] < sups[0] && sups[2] < sups[1], "sup errors {sups:?}");
}

// ---------------------------------------------------------------------------
// Harness round trip
// ---------------------------------------------------------------------------

#[test]
fn simulate_write_load_round_trip() {
    let dgp = DgpSpec {
        shape: BoundaryShape::LShape,
        mu0: Poly2::parse("0.4 0.6 -0.4 0.5 -0.3 0.4").unwrap(),
        mu1: Poly2::parse("1.0 0.2 -0.9 -0.7 0.1 -0.9").unwrap(),
        noise_sd: 0.5,
        density: DensityKind::Tilted,
        n: 500,
        seed: 81,
    };
    let boundary = dgp.boundary();
    let part = SegmentPartition::uniform(&boundary, 2).unwrap();
    let (ds, _) = dgp.simulate();
    let direct = SampleFrame::derive(&ds, &boundary, Some(&part)).unwrap();

    let text = write_dataset_string(&ds);
    let loaded = parse_dataset(&text).unwrap();
    let via_disk = SampleFrame::derive(&loaded, &boundary, Some(&part)).unwrap();

    assert_eq!(direct.d, via_disk.d);
    assert_eq!(direct.t, via_disk.t);
    assert_eq!(direct.s, via_disk.s);
    assert_eq!(direct.y, via_disk.y);
}

#[test]
fn bandwidth_positive_and_clamped_on_random_frames() {
    for seed in 0..8u64 {
        let frame = random_line_frame(seed, 400);
        let r = bdd::bandwidth::h_mse_pooled(&frame, 1, KernelKind::Triangular, None).unwrap();
        assert!(r.h > 0.0);
        assert!(r.h <= frame.score_diameter() + 1e-12);
    }
}
