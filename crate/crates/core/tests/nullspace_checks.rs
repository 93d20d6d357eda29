//! Null-space invariants beyond the acceptance sweep: the operational form
//! of the volume-maximality theorem, and the tubular-range diagnostics.

use lightcone_core::chart::ImmersionChart;
use lightcone_core::functional::{bump, fd_derivative, grid_for_chart, FdOrder};
use lightcone_core::nullspace::{null_variation_volume, ruled_map, NullVariation};
use lightcone_core::Tolerances;
use rand::{rngs::StdRng, Rng, SeedableRng};

fn windowed_drift_variation(chart: &ImmersionChart, seed: u64, eps: f64) -> NullVariation {
    let mut rng = StdRng::seed_from_u64(seed);
    let (c0, c1) = (rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
    let (v0, v1) = (rng.gen_range(-0.15..0.15), rng.gen_range(-0.15..0.15));
    let dom_tau = chart.domain().to_vec();
    let dom_alpha = chart.domain().to_vec();
    NullVariation::new(
        move |t, x: &[f64]| t * (c0 + c1 * x[0]) * bump(&dom_tau, x),
        move |t, x: &[f64]| {
            let b = bump(&dom_alpha, x);
            vec![x[0] + t * v0 * b, x[1] + t * v1 * b]
        },
        eps,
    )
}

/// Scalar-flat hypersurfaces are stationary and volume-maximizing inside
/// their null-space: d/dt Vol_G(0) vanishes and d^2/dt^2 Vol_G(0) is
/// nonpositive for arbitrary fixed-boundary variations in N.
#[test]
fn scalar_flat_charts_maximize_volume_in_their_null_space() {
    let tol = Tolerances::default();
    for (name, k) in [("euclidean", 2), ("hs_product", 1)] {
        let chart = ImmersionChart::builtin(name, k).unwrap();
        let grid = grid_for_chart(&chart, None, 12).unwrap();
        for seed in [11u64, 12, 13] {
            let nv = windowed_drift_variation(&chart, seed, 0.4);
            nv.validate(&chart).unwrap();
            let vol_fn = |t: f64| null_variation_volume(&chart, &nv, &grid, t, &tol).unwrap_or(f64::NAN);
            let h = tol.fd_t_step * nv.t_half_width;
            let d1 = fd_derivative(&vol_fn, FdOrder::First, h).unwrap();
            let d2 = fd_derivative(&vol_fn, FdOrder::Second, h).unwrap();
            assert!(
                d1.value.abs() < 1e-6,
                "{name} seed {seed}: first variation {}",
                d1.value
            );
            assert!(
                d2.value <= 1e-6,
                "{name} seed {seed}: second variation {} must be nonpositive",
                d2.value
            );
        }
    }
}

/// Converse witness: on the round sphere (S = 2) there is a null-space
/// variation with decidedly nonzero first variation.
#[test]
fn round_sphere_is_not_stationary_in_its_null_space() {
    let tol = Tolerances::default();
    let chart = ImmersionChart::builtin("round_sphere", 2).unwrap();
    let grid = grid_for_chart(&chart, None, 12).unwrap();
    let nv = NullVariation::lift(&chart, |_| 1.0, 0.4);
    nv.validate(&chart).unwrap();
    let vol_fn = |t: f64| null_variation_volume(&chart, &nv, &grid, t, &tol).unwrap_or(f64::NAN);
    let d1 = fd_derivative(&vol_fn, FdOrder::First, tol.fd_t_step * 0.4).unwrap();
    assert!(
        d1.value.abs() > 0.05,
        "expected a nonzero first variation, got {}",
        d1.value
    );
}

/// The product chart's ruling degenerates at t = 2 where (2-t)/2 collapses
/// the hyperbolic factor; the sample must carry the tubular warning there
/// but stay clean well inside the cap.
#[test]
fn tubular_warning_fires_outside_the_immersive_range() {
    let tol = Tolerances::default();
    let chart = ImmersionChart::builtin("hs_product", 1).unwrap();
    let inside = ruled_map(&chart, 0.4, &[0.1, 0.2], &tol).unwrap();
    assert!(!inside.tubular_warning);
    let at_degeneracy = ruled_map(&chart, 2.0, &[0.1, 0.2], &tol).unwrap();
    assert!(at_degeneracy.tubular_warning);
    // Beyond the configured cap the warning fires even though the metric is
    // still fine pointwise.
    let beyond_cap = ruled_map(&chart, 1.5, &[0.1, 0.2], &tol).unwrap();
    assert!(beyond_cap.tubular_warning);
    assert!((beyond_cap.radius2 - 3.0).abs() < 1e-10);
}

#[test]
fn boundary_moving_variation_is_rejected() {
    let chart = ImmersionChart::builtin("hs_product", 1).unwrap();
    let nv = NullVariation::new(
        |_, _| 0.0,
        |t, x: &[f64]| vec![x[0] + 0.1 * t, x[1]],
        0.3,
    );
    assert!(nv.validate(&chart).is_err());
}
