//! The acceptance suite: every check the engine promises, runnable both as
//! an integration test target and behind the `verify` CLI subcommand.
//!
//! Each criterion is deterministic (fixed seeds) and returns a pass/fail
//! outcome with the measured extremes in its details string.

use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::chart::ImmersionChart;
use crate::frame::{build_frame, dual_derivative, dual_map, duality_residuals, intrinsic_oracle};
use crate::functional::{
    bump, fd_derivative, first_variation_admissible, grid_for_chart, second_variation_characteristic,
    second_variation_general, volume, FdOrder, QuadratureGrid, VariationSpec,
};
use crate::lorentz::pairwise_sum;
use crate::nullspace::{convert_null_variation, ruled_map, volume_equality_check, NullVariation};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub details: String,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {} {:<22} {}  ({})",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.details
        )
    }
}

struct Suite {
    key: &'static str,
    chart: ImmersionChart,
    order: usize,
}

fn suites(filter: Option<&str>) -> Vec<Suite> {
    let all = [
        ("euclidean(2)", "euclidean", 2, 16),
        ("euclidean(3)", "euclidean", 3, 8),
        ("hs_product(1)", "hyperbolic_sphere_product", 1, 16),
        ("round_sphere(2)", "round_sphere", 2, 12),
    ];
    all.iter()
        .filter(|(key, name, _, _)| match filter {
            None => true,
            Some(f) => key.contains(f) || name.contains(f),
        })
        .map(|(key, name, n, order)| Suite {
            key,
            chart: ImmersionChart::builtin(name, *n).expect("builtin catalog"),
            order: *order,
        })
        .collect()
}

fn sample_point(chart: &ImmersionChart, margin: f64, rng: &mut StdRng) -> Vec<f64> {
    chart
        .domain()
        .iter()
        .map(|(a, b)| a + (b - a) * rng.gen_range(margin..1.0 - margin))
        .collect()
}

/// Random quadratic profile in box-normalized coordinates, coefficients in
/// (-1, 1); the shared phi0 family for the variational criteria.
pub fn random_phi0(
    domain: &[(f64, f64)],
    rng: &mut StdRng,
) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone + 'static {
    let n = domain.len();
    let c0: f64 = rng.gen_range(-1.0..1.0);
    let lin: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let quad: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let domain = domain.to_vec();
    move |x: &[f64]| {
        let u: Vec<f64> = x
            .iter()
            .zip(&domain)
            .map(|(xi, (a, b))| 2.0 * (xi - a) / (b - a) - 1.0)
            .collect();
        let mut v = c0;
        for i in 0..n {
            v += lin[i] * u[i];
            for j in 0..n {
                v += quad[i * n + j] * u[i] * u[j];
            }
        }
        v
    }
}

fn scalar_flat(key: &str) -> bool {
    key.starts_with("euclidean") || key.starts_with("hs_product")
}

// --- criteria ----------------------------------------------------------------

/// Duality relations at 200 random points per built-in.
pub fn criterion_duality(filter: Option<&str>) -> CriterionOutcome {
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    let mut details = String::new();
    let mut passed = true;
    for suite in suites(filter) {
        let mut rng = StdRng::seed_from_u64(101);
        let mut max_res: f64 = 0.0;
        for _ in 0..200 {
            let x = sample_point(&suite.chart, 1e-3, &mut rng);
            match suite
                .chart
                .eval_jet2(&x)
                .and_then(|jet| dual_map(&jet, &tol).map(|q| (jet, q)))
            {
                Ok((jet, q)) => {
                    let r = duality_residuals(&jet, &q);
                    max_res = max_res.max(r.pq_minus_one).max(r.qq).max(r.max_tangent);
                }
                Err(e) => {
                    passed = false;
                    details.push_str(&format!("{}: {e}; ", suite.key));
                }
            }
        }
        worst = worst.max(max_res);
        if max_res >= 1e-9 {
            passed = false;
        }
        details.push_str(&format!("{}: {:.2e}; ", suite.key, max_res));
    }
    CriterionOutcome {
        id: 1,
        name: "duality".into(),
        passed,
        details: format!("max residual {worst:.2e} (< 1e-9 required); {details}"),
    }
}

/// Closed-form values of the worked examples: the constant dual of the
/// flat chart, the halved dual of the product, and both ruled images.
pub fn criterion_worked_examples(filter: Option<&str>) -> CriterionOutcome {
    let tol = Tolerances::default();
    let mut passed = true;
    let mut details = String::new();
    let keys: Vec<&str> = suites(filter).iter().map(|s| s.key).collect();

    for n in [2usize, 3] {
        if !keys.iter().any(|k| *k == format!("euclidean({n})")) {
            continue;
        }
        let chart = ImmersionChart::builtin("euclidean", n).unwrap();
        let mut rng = StdRng::seed_from_u64(202);
        let mut max_dev: f64 = 0.0;
        for _ in 0..50 {
            let x = sample_point(&chart, 0.02, &mut rng);
            let q = dual_map(&chart.eval_jet2(&x).unwrap(), &tol).unwrap();
            let mut want = vec![0.0; n + 2];
            want[0] = -1.0;
            want[1] = -1.0;
            for (got, w) in q.as_slice().iter().zip(&want) {
                max_dev = max_dev.max((got - w).abs());
            }
            // ruled image stays in the hyperplane y1 - y2 = 1
            let t = rng.gen_range(-1.0..1.0);
            let s = ruled_map(&chart, t, &x, &tol).unwrap();
            max_dev = max_dev.max((s.point[0] - s.point[1] - 1.0).abs());
        }
        if max_dev >= 1e-10 {
            passed = false;
        }
        details.push_str(&format!("euclidean({n}) dev {:.2e}; ", max_dev));
    }

    if keys.iter().any(|k| k.starts_with("hs_product")) {
        let chart = ImmersionChart::builtin("hs_product", 1).unwrap();
        let mut rng = StdRng::seed_from_u64(203);
        let mut max_dev: f64 = 0.0;
        for _ in 0..50 {
            let x = sample_point(&chart, 0.02, &mut rng);
            let p = chart.eval(&x).unwrap();
            let q = dual_map(&chart.eval_jet2(&x).unwrap(), &tol).unwrap();
            // q = (1/2)(-x, y) for p = (x, y)
            let want = [
                -0.5 * p[0],
                -0.5 * p[1],
                0.5 * p[2],
                0.5 * p[3],
            ];
            for (got, w) in q.as_slice().iter().zip(want) {
                max_dev = max_dev.max((got - w).abs());
            }
            let t = rng.gen_range(-1.0..1.0);
            let s = ruled_map(&chart, t, &x, &tol).unwrap();
            let phi_want = [
                (2.0 - t) / 2.0 * p[0],
                (2.0 - t) / 2.0 * p[1],
                (2.0 + t) / 2.0 * p[2],
                (2.0 + t) / 2.0 * p[3],
            ];
            for (got, w) in s.point.as_slice().iter().zip(phi_want) {
                max_dev = max_dev.max((got - w).abs());
            }
        }
        if max_dev >= 1e-9 {
            passed = false;
        }
        details.push_str(&format!("hs_product dev {:.2e}; ", max_dev));
    }

    if details.is_empty() {
        details = "skipped: no applicable chart under filter".into();
    }
    CriterionOutcome {
        id: 2,
        name: "worked-examples".into(),
        passed,
        details,
    }
}

/// Intrinsic (Christoffel/Riemann) scalar curvature vs -2(n-1)tr(A).
pub fn criterion_gauss(filter: Option<&str>) -> CriterionOutcome {
    let tol = Tolerances::default();
    let mut passed = true;
    let mut details = String::new();
    for suite in suites(filter) {
        let mut rng = StdRng::seed_from_u64(301);
        let mut max_res: f64 = 0.0;
        let mut sphere_s = f64::NAN;
        for k in 0..6 {
            let x = if k == 0 {
                suite.chart.box_center()
            } else {
                sample_point(&suite.chart, 0.06, &mut rng)
            };
            match intrinsic_oracle(&suite.chart, &x, &tol) {
                Ok(rep) => {
                    max_res = max_res.max(rep.gauss_residual).max(rep.max_sample_residual());
                    if suite.key == "round_sphere(2)" {
                        sphere_s = rep.s_intrinsic;
                        if (rep.s_intrinsic - 2.0).abs() >= 1e-5 {
                            passed = false;
                        }
                    }
                }
                Err(e) => {
                    passed = false;
                    details.push_str(&format!("{}: {e}; ", suite.key));
                }
            }
        }
        if max_res >= 1e-5 {
            passed = false;
        }
        if suite.key == "round_sphere(2)" {
            details.push_str(&format!("{}: gauss {:.2e}, S = {:.7}; ", suite.key, max_res, sphere_s));
        } else {
            details.push_str(&format!("{}: gauss {:.2e}; ", suite.key, max_res));
        }
    }
    CriterionOutcome {
        id: 3,
        name: "gauss-identity".into(),
        passed,
        details,
    }
}

/// Parallelism of the dual pair: |dq/dV + A V| at 100 random samples.
pub fn criterion_dual_derivative(filter: Option<&str>) -> CriterionOutcome {
    let tol = Tolerances::default();
    let mut passed = true;
    let mut details = String::new();
    for suite in suites(filter) {
        let mut rng = StdRng::seed_from_u64(401);
        let mut max_res: f64 = 0.0;
        for _ in 0..100 {
            let x = sample_point(&suite.chart, 0.02, &mut rng);
            let v: Vec<f64> = (0..suite.chart.n())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let dq = dual_derivative(&suite.chart, &x, &v, &tol).unwrap();
            let f = build_frame(&suite.chart, &x, &tol).unwrap();
            let av = &f.shape_operator * nalgebra::DVector::from_column_slice(&v);
            let av_amb = f.push_tangent(av.as_slice());
            max_res = max_res.max(dq.add(&av_amb).euclidean_norm());
        }
        if max_res >= 1e-6 {
            passed = false;
        }
        details.push_str(&format!("{}: {:.2e}; ", suite.key, max_res));
    }
    CriterionOutcome {
        id: 4,
        name: "dual-derivative".into(),
        passed,
        details,
    }
}

/// First-variation closed form vs the Richardson d/dt oracle, stationarity
/// on scalar-flat charts, and the non-stationary witness on the sphere.
pub fn criterion_first_variation(filter: Option<&str>) -> CriterionOutcome {
    let tol = Tolerances::default();
    let mut passed = true;
    let mut details = String::new();
    for suite in suites(filter) {
        let grid = grid_for_chart(&suite.chart, None, suite.order).unwrap();
        let mut rng = StdRng::seed_from_u64(501);
        let mut max_rel: f64 = 0.0;
        let mut max_flat_fd: f64 = 0.0;
        for _ in 0..20 {
            let phi0 = random_phi0(suite.chart.domain(), &mut rng);
            let closed =
                first_variation_admissible(&suite.chart, &grid, &phi0.clone(), &tol).unwrap();
            let spec = VariationSpec::admissible_lift(&grid.domain, phi0, 0.5);
            let h = tol.fd_t_step * spec.t_half_width;
            let vol_fn = |t: f64| volume(&suite.chart, &grid, Some(&spec), t, &tol).unwrap_or(f64::NAN);
            let fd = fd_derivative(&vol_fn, FdOrder::First, h).unwrap();
            max_rel = max_rel.max((closed - fd.value).abs() / fd.value.abs().max(1.0));
            if scalar_flat(suite.key) {
                max_flat_fd = max_flat_fd.max(fd.value.abs());
            }
        }
        if max_rel >= 1e-5 {
            passed = false;
        }
        details.push_str(&format!("{}: rel {:.2e}", suite.key, max_rel));
        if scalar_flat(suite.key) {
            if max_flat_fd >= 1e-7 {
                passed = false;
            }
            details.push_str(&format!(", stationary fd {:.2e}; ", max_flat_fd));
        } else {
            // Converse direction, by contrapositive: a chart with nonzero
            // scalar curvature must fail to be stationary for a constant
            // windowed profile.
            let spec = VariationSpec::admissible_lift(&grid.domain, |_: &[f64]| 1.0, 0.5);
            let h = tol.fd_t_step * spec.t_half_width;
            let vol_fn = |t: f64| volume(&suite.chart, &grid, Some(&spec), t, &tol).unwrap_or(f64::NAN);
            let fd = fd_derivative(&vol_fn, FdOrder::First, h).unwrap();
            let window_mass: f64 = {
                let vals: Vec<f64> = grid
                    .nodes
                    .iter()
                    .zip(&grid.weights)
                    .map(|(x, w)| {
                        let f = build_frame(&suite.chart, x, &tol).unwrap();
                        w * bump(&grid.domain, x) * f.sqrt_det_g
                    })
                    .collect();
                pairwise_sum(&vals)
            };
            if fd.value.abs() <= 0.1 * window_mass {
                passed = false;
            }
            details.push_str(&format!(
                ", witness |fd d1| {:.3} vs 0.1*integral(b) {:.3}; ",
                fd.value.abs(),
                0.1 * window_mass
            ));
        }
    }
    CriterionOutcome {
        id: 5,
        name: "first-variation".into(),
        passed,
        details,
    }
}

/// Second-variation formulas against the d^2/dt^2 oracle and each other,
/// nonpositivity, and the derived constant for the product example.
pub fn criterion_second_variation(filter: Option<&str>) -> CriterionOutcome {
    let tol = Tolerances::default();
    let mut passed = true;
    let mut details = String::new();
    for suite in suites(filter) {
        if !scalar_flat(suite.key) {
            continue;
        }
        let grid = grid_for_chart(&suite.chart, None, suite.order).unwrap();
        let mut rng = StdRng::seed_from_u64(601);
        let mut max_rel_char: f64 = 0.0;
        let mut max_rel_gen: f64 = 0.0;
        let mut max_char: f64 = f64::NEG_INFINITY;
        for _ in 0..20 {
            let phi0 = random_phi0(suite.chart.domain(), &mut rng);
            let char_d2 =
                second_variation_characteristic(&suite.chart, &grid, &phi0.clone(), &tol).unwrap();
            let spec = VariationSpec::admissible_lift(&grid.domain, phi0, 0.5);
            let gen_d2 = second_variation_general(&suite.chart, &grid, &spec, &tol).unwrap();
            let h = tol.fd_t_step * spec.t_half_width;
            let vol_fn = |t: f64| volume(&suite.chart, &grid, Some(&spec), t, &tol).unwrap_or(f64::NAN);
            let fd = fd_derivative(&vol_fn, FdOrder::Second, h).unwrap();
            max_rel_char = max_rel_char.max((char_d2 - fd.value).abs() / fd.value.abs().max(1.0));
            max_rel_gen = max_rel_gen
                .max((gen_d2 - fd.value).abs() / fd.value.abs().max(1.0))
                .max((gen_d2 - char_d2).abs() / char_d2.abs().max(1.0));
            max_char = max_char.max(char_d2);
        }
        if max_rel_char >= 1e-4 || max_rel_gen >= 1e-4 || max_char > 1e-12 {
            passed = false;
        }
        details.push_str(&format!(
            "{}: rel(char) {:.2e}, rel(gen) {:.2e}, max d2 {:.2e}; ",
            suite.key, max_rel_char, max_rel_gen, max_char
        ));

        if suite.key == "hs_product(1)" {
            let char_d2 =
                second_variation_characteristic(&suite.chart, &grid, &|_: &[f64]| 1.0, &tol)
                    .unwrap();
            // Reference constant -(1/2) integral of b^2 dV, recomputed by an
            // independent composite-Simpson rule (tr A^2 = 1/2 for this chart).
            let reference = -0.5 * simpson_b2_mass(&suite.chart, &grid.domain, 401, &tol);
            let rel = (char_d2 - reference).abs() / reference.abs();
            if !(char_d2 < 0.0) || rel >= 0.02 {
                passed = false;
            }
            details.push_str(&format!(
                "hs_product const d2 {:.6} vs -(1/2)*integral(b^2) {:.6} (rel {:.2e}); ",
                char_d2, reference, rel
            ));
        }
    }
    if details.is_empty() {
        details = "skipped: no applicable chart under filter".into();
    }
    CriterionOutcome {
        id: 6,
        name: "second-variation".into(),
        passed,
        details,
    }
}

/// Composite Simpson quadrature of b^2 dV, independent of Gauss-Legendre.
fn simpson_b2_mass(
    chart: &ImmersionChart,
    domain: &[(f64, f64)],
    points_per_axis: usize,
    tol: &Tolerances,
) -> f64 {
    assert_eq!(chart.n(), 2, "Simpson reference implemented for n = 2");
    let m = if points_per_axis.is_multiple_of(2) {
        points_per_axis + 1
    } else {
        points_per_axis
    };
    let (a0, b0) = domain[0];
    let (a1, b1) = domain[1];
    let h0 = (b0 - a0) / (m - 1) as f64;
    let h1 = (b1 - a1) / (m - 1) as f64;
    let w1d = |i: usize| -> f64 {
        if i == 0 || i == m - 1 {
            1.0
        } else if !i.is_multiple_of(2) {
            4.0
        } else {
            2.0
        }
    };
    let mut terms = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let x = [a0 + h0 * i as f64, a1 + h1 * j as f64];
            let b = bump(domain, &x);
            if b == 0.0 {
                terms.push(0.0);
                continue;
            }
            let sqrt_det_g = build_frame(chart, &x, tol)
                .map(|f| f.sqrt_det_g)
                .unwrap_or(f64::NAN);
            terms.push(w1d(i) * w1d(j) * b * b * sqrt_det_g);
        }
    }
    pairwise_sum(&terms) * h0 * h1 / 9.0
}

/// Slice property, degenerate kernel and the spacelike x-block of the
/// ruled metric for |t| <= 0.5.
pub fn criterion_null_space(filter: Option<&str>) -> CriterionOutcome {
    let tol = Tolerances::default();
    let mut passed = true;
    let mut details = String::new();
    for suite in suites(filter) {
        let mut rng = StdRng::seed_from_u64(701);
        let mut max_slice: f64 = 0.0;
        let mut max_kernel: f64 = 0.0;
        let mut blocks_pd = true;
        for _ in 0..200 {
            let x = sample_point(&suite.chart, 0.02, &mut rng);
            let t = rng.gen_range(-0.5..0.5);
            let s = ruled_map(&suite.chart, t, &x, &tol).unwrap();
            max_slice = max_slice.max((s.radius2 - 2.0 * t).abs());
            max_kernel = max_kernel.max(s.kernel_residual);
            blocks_pd &= !s.tubular_warning;
        }
        if max_slice >= 1e-9 || max_kernel >= 1e-8 || !blocks_pd {
            passed = false;
        }
        details.push_str(&format!(
            "{}: slice {:.2e}, kernel {:.2e}, x-block PD {}; ",
            suite.key, max_slice, max_kernel, blocks_pd
        ));
    }
    CriterionOutcome {
        id: 7,
        name: "null-space".into(),
        passed,
        details,
    }
}

/// Conversion of randomized null-space variations into characteristic ones
/// with matching volume functions.
pub fn criterion_conversion(filter: Option<&str>) -> CriterionOutcome {
    let applicable = suites(filter)
        .iter()
        .any(|s| s.key.starts_with("hs_product"));
    if !applicable {
        return CriterionOutcome {
            id: 8,
            name: "null-conversion".into(),
            passed: true,
            details: "skipped: hs_product not selected by chart filter".into(),
        };
    }
    let tol = Tolerances::default();
    let chart = ImmersionChart::builtin("hs_product", 1).unwrap();
    let grid = grid_for_chart(&chart, None, 16).unwrap();
    let mut rng = StdRng::seed_from_u64(801);
    let mut passed = true;
    let mut worst: f64 = 0.0;
    let mut min_delta = f64::INFINITY;
    for _ in 0..10 {
        let domain = chart.domain().to_vec();
        let (c0, c1, c2, c3) = (
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.8..0.8),
            rng.gen_range(-0.4..0.4),
        );
        let (v0, v1) = (rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        let dom_tau = domain.clone();
        let dom_alpha = domain.clone();
        let nv = NullVariation::new(
            move |t, x: &[f64]| {
                let poly = c0 + c1 * x[0] + c2 * x[1] + c3 * t;
                t * poly * bump(&dom_tau, x)
            },
            move |t, x: &[f64]| {
                let b = bump(&dom_alpha, x);
                vec![x[0] + t * v0 * b, x[1] + t * v1 * b]
            },
            0.4,
        );
        match convert_null_variation(&chart, &nv, &tol) {
            Ok((spec, delta)) => {
                min_delta = min_delta.min(delta);
                let ts: Vec<f64> = [-0.9, -0.45, 0.0, 0.45, 0.9]
                    .iter()
                    .map(|s| s * delta)
                    .collect();
                match volume_equality_check(&chart, &nv, &spec, &ts, &grid, &tol) {
                    Ok(rep) => {
                        worst = worst.max(rep.max_discrepancy);
                        if rep.max_discrepancy >= 1e-6 {
                            passed = false;
                        }
                    }
                    Err(e) => {
                        passed = false;
                        worst = f64::INFINITY;
                        let _ = e;
                    }
                }
            }
            Err(_) => {
                passed = false;
            }
        }
    }
    CriterionOutcome {
        id: 8,
        name: "null-conversion".into(),
        passed,
        details: format!(
            "10 randomized variations, max |Vol_F - Vol_G| = {worst:.2e} (< 1e-6), min delta {min_delta:.3}"
        ),
    }
}

/// Quadrature sanity: unit-square volume and Gauss-Legendre degree.
pub fn criterion_quadrature(filter: Option<&str>) -> CriterionOutcome {
    let tol = Tolerances::default();
    let mut passed = true;
    let mut details = String::new();

    let runs_euclidean = suites(filter).iter().any(|s| s.key.starts_with("euclidean"));
    if runs_euclidean || filter.is_none() {
        let chart = ImmersionChart::builtin("euclidean", 2).unwrap();
        let grid = grid_for_chart(&chart, None, 16).unwrap();
        let v = volume(&chart, &grid, None, 0.0, &tol).unwrap();
        if (v - 1.0).abs() >= 1e-12 {
            passed = false;
        }
        details.push_str(&format!("unit-square volume dev {:.2e}; ", (v - 1.0).abs()));
    }

    let mut max_poly_dev: f64 = 0.0;
    for order in [2usize, 4, 8, 16] {
        let grid = QuadratureGrid::build(&[(0.0, 1.0)], order).unwrap();
        let degree = (2 * order - 1) as i32;
        let integral = grid.integrate(|x| x[0].powi(degree));
        let exact = 1.0 / (degree as f64 + 1.0);
        max_poly_dev = max_poly_dev.max((integral - exact).abs() / exact);
    }
    if max_poly_dev >= 1e-13 {
        passed = false;
    }
    details.push_str(&format!("degree-(2o-1) exactness dev {max_poly_dev:.2e}"));

    CriterionOutcome {
        id: 9,
        name: "quadrature".into(),
        passed,
        details,
    }
}

/// Runs the full acceptance suite (optionally restricted to charts whose
/// name matches `filter`).
pub fn run_acceptance_filtered(filter: Option<&str>) -> Vec<CriterionOutcome> {
    vec![
        criterion_duality(filter),
        criterion_worked_examples(filter),
        criterion_gauss(filter),
        criterion_dual_derivative(filter),
        criterion_first_variation(filter),
        criterion_second_variation(filter),
        criterion_null_space(filter),
        criterion_conversion(filter),
        criterion_quadrature(filter),
    ]
}

pub fn run_acceptance() -> Vec<CriterionOutcome> {
    run_acceptance_filtered(None)
}
