//! Independent oracles for the frame module: the dual map against a generic
//! constrained solver, and the dual chart against its advertised values.

use lightcone_core::chart::{dual_chart, ImmersionChart};
use lightcone_core::frame::{build_frame, dual_map, duality_residuals, intrinsic_oracle};
use lightcone_core::lorentz::AmbientVector;
use lightcone_core::{Error, Tolerances};
use nalgebra::{DMatrix, DVector};

/// Generic route to the dual map, sharing nothing with the closed form:
/// solve the n+1 linear duality conditions by SVD least squares, then fix
/// the one-parameter family along p with the null condition <q,q> = 0
/// (linear in the parameter since <q0, p> = 1).
fn dual_by_generic_solver(chart: &ImmersionChart, x: &[f64]) -> AmbientVector {
    let jet = chart.eval_jet2(x).unwrap();
    let n = chart.n();
    let dim = chart.ambient_dim();
    let eta_row = |v: &AmbientVector| -> Vec<f64> {
        v.as_slice()
            .iter()
            .enumerate()
            .map(|(k, c)| if k == 0 { -c } else { *c })
            .collect()
    };
    let mut m = DMatrix::<f64>::zeros(n + 1, dim);
    for (j, c) in eta_row(&jet.value).into_iter().enumerate() {
        m[(0, j)] = c;
    }
    for i in 0..n {
        for (j, c) in eta_row(&jet.d1[i]).into_iter().enumerate() {
            m[(i + 1, j)] = c;
        }
    }
    let mut rhs = DVector::<f64>::zeros(n + 1);
    rhs[0] = 1.0;
    let q0 = m.svd(true, true).solve(&rhs, 1e-13).unwrap();
    let q0 = AmbientVector::new(q0.as_slice().to_vec());
    // q = q0 + s p with <q,q> = <q0,q0> + 2 s <q0,p> = 0 and <q0,p> = 1.
    let qq = lightcone_core::inner(&q0, &q0).unwrap();
    let s = -qq / 2.0;
    q0.axpy(s, &jet.value)
}

fn assert_vec_close(got: &AmbientVector, want: &[f64], tol: f64) {
    assert_eq!(got.dim(), want.len());
    for (g, w) in got.as_slice().iter().zip(want) {
        assert!(
            (g - w).abs() <= tol,
            "got {:?}, want {:?}",
            got.as_slice(),
            want
        );
    }
}

#[test]
fn dual_map_agrees_with_generic_solver() {
    let tol = Tolerances::default();
    for (name, k) in [("euclidean", 2), ("euclidean", 3), ("hs_product", 1), ("round_sphere", 2)] {
        let chart = ImmersionChart::builtin(name, k).unwrap();
        let points = lightcone_core::chart::interior_samples(&chart, 12, 0xfade);
        for x in points {
            let closed = dual_map(&chart.eval_jet2(&x).unwrap(), &tol).unwrap();
            let generic = dual_by_generic_solver(&chart, &x);
            let dev = closed.sub(&generic).euclidean_norm();
            assert!(dev < 1e-9, "{name}({k}) at {x:?}: routes disagree by {dev}");
        }
    }
}

#[test]
fn round_sphere_dual_at_north_pole() {
    // Frozen after computing it with the generic solver: the unique dual of
    // p = (1, 0, 0, 1) under the duality conditions.
    let tol = Tolerances::default();
    let chart = ImmersionChart::builtin("round_sphere", 2).unwrap();
    let pole = chart.box_center();
    let generic = dual_by_generic_solver(&chart, &pole);
    assert_vec_close(&generic, &[-0.5, 0.0, 0.0, 0.5], 1e-12);
    let closed = dual_map(&chart.eval_jet2(&pole).unwrap(), &tol).unwrap();
    assert_vec_close(&closed, &[-0.5, 0.0, 0.0, 0.5], 1e-12);
}

#[test]
fn dual_chart_of_euclidean_degenerates() {
    let tol = Tolerances::default();
    let chart = ImmersionChart::builtin("euclidean", 2).unwrap();
    match dual_chart(&chart, &tol) {
        Err(Error::DualDegenerate { .. }) => {}
        other => panic!("constant dual must fail the immersion test, got {other:?}"),
    }
}

#[test]
fn dual_chart_of_hs_product_is_an_immersion_with_zero_scalar_curvature() {
    let tol = Tolerances::default();
    let chart = ImmersionChart::builtin("hs_product", 1).unwrap();
    let dual = dual_chart(&chart, &tol).unwrap();

    let q = dual.eval(&[0.0, 0.0]).unwrap();
    assert_vec_close(&q, &[-0.5, 0.0, 0.5, 0.0], 1e-12);

    // The dual of the dual is the original immersion.
    let jet = dual.eval_jet2(&[0.2, -0.3]).unwrap();
    let qq = dual_map(&jet, &tol).unwrap();
    let p = chart.eval(&[0.2, -0.3]).unwrap();
    assert!(qq.sub(&p).euclidean_norm() < 1e-7);

    // Scalar curvature of the dual is identically zero here, both through
    // the frame formula and through the intrinsic Christoffel oracle.
    for x in [[0.0, 0.0], [0.3, 0.5], [-0.4, 0.2]] {
        let f = build_frame(&dual, &x, &tol).unwrap();
        assert!(
            f.scalar_curvature.abs() < 1e-6,
            "frame S = {} at {x:?}",
            f.scalar_curvature
        );
        let res = duality_residuals(&dual.eval_jet2(&x).unwrap(), &f.q);
        assert!(res.pq_minus_one < 1e-9 && res.qq < 1e-9 && res.max_tangent < 1e-9);
    }
    let rep = intrinsic_oracle(&dual, &[0.0, 0.0], &tol).unwrap();
    assert!(
        rep.s_intrinsic.abs() < 1e-6,
        "intrinsic S = {}",
        rep.s_intrinsic
    );
    assert!(rep.gauss_residual < 1e-6);
}

#[test]
fn higher_rank_product_charts_stay_scalar_flat() {
    // H^2 x S^2 in R^6_1: the dual is still (1/2)(-x, y), tr(A) = 0, and
    // tr(A^2) = k/2 with half the principal curvatures +1/2 and half -1/2.
    let tol = Tolerances::default();
    let chart = ImmersionChart::builtin("hyperbolic_sphere_product", 2).unwrap();
    assert_eq!(chart.n(), 4);
    assert_eq!(chart.ambient_dim(), 6);
    for x in lightcone_core::chart::interior_samples(&chart, 6, 0xabcd) {
        let jet = chart.eval_jet2(&x).unwrap();
        assert!(lightcone_core::inner(&jet.value, &jet.value).unwrap().abs() < 1e-12);
        let f = build_frame(&chart, &x, &tol).unwrap();
        let res = duality_residuals(&jet, &f.q);
        assert!(res.pq_minus_one < 1e-12 && res.qq < 1e-12 && res.max_tangent < 1e-12);
        let p = jet.value.as_slice();
        for (i, qi) in f.q.as_slice().iter().enumerate() {
            let want = if i < 3 { -0.5 * p[i] } else { 0.5 * p[i] };
            assert!((qi - want).abs() < 1e-12, "q[{i}] = {qi}, want {want}");
        }
        assert!(f.tr_a.abs() < 1e-12);
        assert!((f.tr_a2 - 1.0).abs() < 1e-12);
        assert!(f.scalar_curvature.abs() < 1e-11);
    }
    let rep = intrinsic_oracle(&chart, &chart.box_center(), &tol).unwrap();
    assert!(rep.s_intrinsic.abs() < 1e-5, "S = {}", rep.s_intrinsic);
    assert!(rep.gauss_residual < 1e-5);
}

#[test]
fn round_sphere_three_has_classical_curvature() {
    let tol = Tolerances::default();
    let chart = ImmersionChart::builtin("round_sphere", 3).unwrap();
    let x = chart.box_center();
    let f = build_frame(&chart, &x, &tol).unwrap();
    // A = -I/2, S = n(n-1) = 6 for the unit three-sphere.
    assert!((f.tr_a + 1.5).abs() < 1e-12);
    assert!((f.scalar_curvature - 6.0).abs() < 1e-11);
    let rep = intrinsic_oracle(&chart, &x, &tol).unwrap();
    assert!((rep.s_intrinsic - 6.0).abs() < 1e-5, "S = {}", rep.s_intrinsic);
}

#[test]
fn dual_chart_metric_is_quarter_identity_for_hs_product() {
    // q = (1/2)(-x, y) scales both factors by 1/2, so g_dual = g/4.
    let tol = Tolerances::default();
    let chart = ImmersionChart::builtin("hs_product", 1).unwrap();
    let dual = dual_chart(&chart, &tol).unwrap();
    let g = dual.eval_jet2(&[0.25, 0.75]).unwrap().metric();
    let want = DMatrix::<f64>::identity(2, 2) * 0.25;
    assert!((g - want).norm() < 1e-9);
}
