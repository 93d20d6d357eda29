//! The null-space construction: the extended ruled map
//! `Phi(t,x) = p(x) + t q(x)`, its everywhere-degenerate pullback metric,
//! the constant `<Phi,Phi> = 2t` slice property, and the conversion of an
//! arbitrary variation inside the null-space into a characteristic
//! variation with the same volume function.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::ImmersionChart;
use crate::error::{Error, Result};
use crate::frame::dual_map;
use crate::functional::{volume_of_map, QuadratureGrid, VariationSpec};
use crate::lorentz::{dot, AmbientVector};
use crate::tol::Tolerances;

/// One sample of the extended ruled map with its pullback metric in
/// `(t, x^1..x^n)` coordinates.
#[derive(Debug, Clone)]
pub struct RuledMapSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub point: AmbientVector,
    /// (n+1) x (n+1) pullback metric; the t-row is the degenerate direction.
    pub g_n: DMatrix<f64>,
    /// Norm of `g_n` applied to the d/dt direction.
    pub kernel_residual: f64,
    /// `<Phi, Phi>`; equals `2t` on the nose.
    pub radius2: f64,
    /// Set when the x-block loses positive definiteness or |t| exceeds the
    /// configured tubular cap; the sample is still returned.
    pub tubular_warning: bool,
}

fn ruled_point(chart: &ImmersionChart, t: f64, x: &[f64], tol: &Tolerances) -> Result<AmbientVector> {
    let jet = chart.eval_jet2(x)?;
    let q = dual_map(&jet, tol)?;
    Ok(jet.value.axpy(t, &q))
}

/// Evaluates `Phi(t,x) = p(x) + t q(x)` and its pullback metric (from
/// 4th-order finite differences of `Phi` in all n+1 coordinates).
pub fn ruled_map(
    chart: &ImmersionChart,
    t: f64,
    x: &[f64],
    tol: &Tolerances,
) -> Result<RuledMapSample> {
    let n = chart.n();
    let point = ruled_point(chart, t, x, tol)?;
    let radius2 = dot(&point, &point);

    let h = tol.fd_jet_step * chart.domain_scale();
    let phi = |z: &[f64]| -> Result<AmbientVector> { ruled_point(chart, z[0], &z[1..], tol) };
    let mut z = Vec::with_capacity(n + 1);
    z.push(t);
    z.extend_from_slice(x);
    let mut d1 = Vec::with_capacity(n + 1);
    for axis in 0..=n {
        d1.push(crate::chart::fd_d1(&phi, &z, axis, h)?);
    }
    let mut g_n = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in i..=n {
            let v = dot(&d1[i], &d1[j]);
            g_n[(i, j)] = v;
            g_n[(j, i)] = v;
        }
    }
    let kernel_residual = g_n.column(0).norm();

    let x_block = g_n.view((1, 1), (n, n)).clone_owned();
    let pd = x_block.cholesky().is_some();
    let tubular_warning = !pd || t.abs() > tol.tubular_cap;

    Ok(RuledMapSample {
        t,
        x: x.to_vec(),
        point,
        g_n,
        kernel_residual,
        radius2,
        tubular_warning,
    })
}

/// The isometric embedding of the base: `iota(x) = (0, x)` in the
/// null-space coordinates.
pub fn iota(x: &[f64]) -> (f64, Vec<f64>) {
    (0.0, x.to_vec())
}

/// Commuting-diagram check: the x-block of the ruled metric at `t = 0` must
/// reproduce the chart's induced metric, and the t-row must vanish.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbedBaseReport {
    pub max_metric_deviation: f64,
    pub max_kernel_row: f64,
    pub points_checked: usize,
}

pub fn embed_base_check(
    chart: &ImmersionChart,
    points: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<EmbedBaseReport> {
    let mut max_metric_deviation: f64 = 0.0;
    let mut max_kernel_row: f64 = 0.0;
    for x in points {
        let sample = ruled_map(chart, 0.0, x, tol)?;
        let g_chart = chart.eval_jet2(x)?.metric();
        let n = chart.n();
        for i in 0..n {
            for j in 0..n {
                max_metric_deviation =
                    max_metric_deviation.max((sample.g_n[(i + 1, j + 1)] - g_chart[(i, j)]).abs());
            }
        }
        max_kernel_row = max_kernel_row.max(sample.kernel_residual);
    }
    Ok(EmbedBaseReport {
        max_metric_deviation,
        max_kernel_row,
        points_checked: points.len(),
    })
}

pub type TauFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
pub type AlphaFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// A variation `G(t,x) = (tau(t,x), alpha(t,x))` of the base embedding
/// inside the null-space, with fixed boundary.
#[derive(Clone)]
pub struct NullVariation {
    pub tau: TauFn,
    pub alpha: AlphaFn,
    pub t_half_width: f64,
}

impl NullVariation {
    pub fn new(
        tau: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        alpha: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
        eps: f64,
    ) -> Self {
        Self {
            tau: Arc::new(tau),
            alpha: Arc::new(alpha),
            t_half_width: eps,
        }
    }

    /// The fiber-lift `G(t,x) = (t phi0(x) b(x), x)`; the construction that
    /// realizes a prescribed variational profile.
    pub fn lift(chart: &ImmersionChart, phi0: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, eps: f64) -> Self {
        let domain = chart.domain().to_vec();
        Self::new(
            move |t, x| t * phi0(x) * crate::functional::bump(&domain, x),
            |_, x| x.to_vec(),
            eps,
        )
    }

    /// Samples the defining conditions: `tau(0,.) = 0`, `alpha(0,.) = id`,
    /// and `alpha(t,.) = id` on a boundary collar.
    pub fn validate(&self, chart: &ImmersionChart) -> Result<()> {
        for x in crate::chart::interior_samples(chart, 12, 0xbadd_cafe) {
            let tau0 = (self.tau)(0.0, &x);
            if tau0.abs() > 1e-12 {
                return Err(Error::Spec(format!("tau(0, {x:?}) = {tau0:.3e} != 0")));
            }
            let a0 = (self.alpha)(0.0, &x);
            let drift: f64 = a0
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if drift > 1e-12 {
                return Err(Error::Spec(format!("alpha(0, {x:?}) != identity")));
            }
        }
        // Boundary collar: midpoints of each face, inset by 0.5% of the edge.
        let eps = self.t_half_width;
        for axis in 0..chart.n() {
            for side in [0, 1] {
                let mut x = chart.box_center();
                let (a, b) = chart.domain()[axis];
                x[axis] = if side == 0 {
                    a + 0.005 * (b - a)
                } else {
                    b - 0.005 * (b - a)
                };
                for t in [eps, -eps, 0.5 * eps] {
                    let ax = (self.alpha)(t, &x);
                    let drift: f64 = ax
                        .iter()
                        .zip(&x)
                        .map(|(u, v)| (u - v).abs())
                        .fold(0.0, f64::max);
                    if drift > 1e-9 {
                        return Err(Error::Spec(format!(
                            "alpha(t={t}, {x:?}) moves a boundary-collar point by {drift:.3e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Damped Newton inversion of `alpha(t, .)`: solves `alpha(t, y) = x`,
/// seeded at `y = x` (exact for t = 0 since alpha(0,.) = id).
pub fn invert_alpha(
    alpha: &AlphaFn,
    t: f64,
    x: &[f64],
    scale: f64,
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    let n = x.len();
    let mut y = x.to_vec();
    let h = 1e-6 * scale;
    let residual = |y: &[f64]| -> DVector<f64> {
        let a = alpha(t, y);
        DVector::from_fn(n, |i, _| a[i] - x[i])
    };
    let mut r = residual(&y);
    for iter in 0..tol.newton_max_iter {
        if r.amax() < tol.newton_tol {
            return Ok(y);
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let mut yp = y.clone();
            yp[k] += h;
            let mut ym = y.clone();
            ym[k] -= h;
            let ap = alpha(t, &yp);
            let am = alpha(t, &ym);
            for i in 0..n {
                jac[(i, k)] = (ap[i] - am[i]) / (2.0 * h);
            }
        }
        let step = jac.lu().solve(&r).ok_or(Error::Inversion {
            t,
            x: x.to_vec(),
            residual: r.amax(),
            iters: iter,
        })?;
        // Damping: halve until the residual actually shrinks.
        let mut lambda = 1.0;
        loop {
            let y_try: Vec<f64> = y.iter().zip(step.iter()).map(|(yi, s)| yi - lambda * s).collect();
            let r_try = residual(&y_try);
            if r_try.amax() < r.amax() || lambda < 1.0 / 64.0 {
                y = y_try;
                r = r_try;
                break;
            }
            lambda *= 0.5;
        }
    }
    if r.amax() < tol.newton_tol {
        Ok(y)
    } else {
        Err(Error::Inversion {
            t,
            x: x.to_vec(),
            residual: r.amax(),
            iters: tol.newton_max_iter,
        })
    }
}

/// Converts a null-space variation `G = (tau, alpha)` into the
/// characteristic variation `F(t,x) = p(x) + tau(t, beta(t,x)) q(x)` with
/// `beta(t, alpha(t,x)) = x`, on the largest sampled t-range where the
/// Newton inversion succeeds everywhere.
///
/// Returns the spec together with the discovered half-width delta.
pub fn convert_null_variation(
    chart: &ImmersionChart,
    nv: &NullVariation,
    tol: &Tolerances,
) -> Result<(VariationSpec, f64)> {
    nv.validate(chart)?;
    let scale = chart.domain_scale();
    let probes = crate::chart::interior_samples(chart, 25, 0x0de1_7a00);

    let inversion_ok = |delta: f64| -> bool {
        for t in [delta, -delta, 0.5 * delta, -0.5 * delta] {
            for x in &probes {
                if invert_alpha(&nv.alpha, t, x, scale, tol).is_err() {
                    return false;
                }
            }
        }
        true
    };

    // Largest working half-width by bisection on inversion success.
    let mut delta = nv.t_half_width;
    if !inversion_ok(delta) {
        let mut lo = 0.0;
        let mut hi = delta;
        for _ in 0..12 {
            let mid = 0.5 * (lo + hi);
            if inversion_ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        delta = lo;
        if delta == 0.0 {
            return Err(Error::Inversion {
                t: nv.t_half_width,
                x: probes[0].clone(),
                residual: f64::INFINITY,
                iters: tol.newton_max_iter,
            });
        }
    }

    let tau = Arc::clone(&nv.tau);
    let alpha = Arc::clone(&nv.alpha);
    let tol_inner = tol.clone();
    let phi = move |t: f64, x: &[f64]| -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let beta = invert_alpha(&alpha, t, x, scale, &tol_inner)?;
        Ok(tau(t, &beta))
    };
    // The fixed boundary is already carried by the null variation itself;
    // windowing again would change the family and break volume equality.
    let spec = VariationSpec::characteristic_fallible(
        Arc::new(phi),
        false,
        delta,
        chart.domain().to_vec(),
    );
    Ok((spec, delta))
}

/// Volume functions of the converted characteristic family and of the raw
/// null-space family, compared at the given times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeEqualityReport {
    pub rows: Vec<VolumeEqualityRow>,
    pub max_discrepancy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeEqualityRow {
    pub t: f64,
    pub vol_characteristic: f64,
    pub vol_null_space: f64,
}

pub fn volume_equality_check(
    chart: &ImmersionChart,
    nv: &NullVariation,
    spec: &VariationSpec,
    ts: &[f64],
    grid: &QuadratureGrid,
    tol: &Tolerances,
) -> Result<VolumeEqualityReport> {
    let h = tol.fd_jet_step * chart.domain_scale();
    let mut rows = Vec::with_capacity(ts.len());
    let mut max_discrepancy: f64 = 0.0;
    for &t in ts {
        let vol_f = crate::functional::volume(chart, grid, Some(spec), t, tol)?;
        let tau = Arc::clone(&nv.tau);
        let alpha = Arc::clone(&nv.alpha);
        let gmap = move |x: &[f64]| -> Result<AmbientVector> {
            let a = alpha(t, x);
            let jet = chart.eval_jet2(&a)?;
            let q = dual_map(&jet, tol)?;
            Ok(jet.value.axpy(tau(t, x), &q))
        };
        let vol_g = volume_of_map(&gmap, grid, chart.n(), h)?;
        max_discrepancy = max_discrepancy.max((vol_f - vol_g).abs());
        rows.push(VolumeEqualityRow {
            t,
            vol_characteristic: vol_f,
            vol_null_space: vol_g,
        });
    }
    Ok(VolumeEqualityReport {
        rows,
        max_discrepancy,
    })
}

/// `Vol_G(t)` of a null-space variation directly (no conversion): the
/// pullback of the ambient metric through `Phi o G`.
pub fn null_variation_volume(
    chart: &ImmersionChart,
    nv: &NullVariation,
    grid: &QuadratureGrid,
    t: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let h = tol.fd_jet_step * chart.domain_scale();
    let tau = Arc::clone(&nv.tau);
    let alpha = Arc::clone(&nv.alpha);
    let gmap = move |x: &[f64]| -> Result<AmbientVector> {
        let a = alpha(t, x);
        let jet = chart.eval_jet2(&a)?;
        let q = dual_map(&jet, tol)?;
        Ok(jet.value.axpy(tau(t, x), &q))
    };
    volume_of_map(&gmap, grid, chart.n(), h)
}

/// Slice and kernel residuals over a sample set, for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NullSpaceChecks {
    pub max_slice_residual: f64,
    pub max_kernel_residual: f64,
    pub all_x_blocks_positive: bool,
    pub samples: usize,
}

pub fn sample_checks(
    chart: &ImmersionChart,
    ts: &[f64],
    points: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<NullSpaceChecks> {
    let combos: Vec<(f64, &Vec<f64>)> = ts
        .iter()
        .flat_map(|t| points.iter().map(move |x| (*t, x)))
        .collect();
    let samples: Vec<(f64, f64, bool)> = combos
        .par_iter()
        .map(|(t, x)| {
            let s = ruled_map(chart, *t, x, tol)?;
            Ok((
                (s.radius2 - 2.0 * t).abs(),
                s.kernel_residual,
                !s.tubular_warning,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(NullSpaceChecks {
        max_slice_residual: samples.iter().map(|s| s.0).fold(0.0, f64::max),
        max_kernel_residual: samples.iter().map(|s| s.1).fold(0.0, f64::max),
        all_x_blocks_positive: samples.iter().all(|s| s.2),
        samples: samples.len(),
    })
}
