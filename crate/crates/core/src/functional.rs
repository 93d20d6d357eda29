//! The volume functional and its variational formulas: Gauss-Legendre
//! quadrature over the parameter box, `Vol(t)` along variation families,
//! the closed-form first and second variations, and Richardson
//! finite-difference oracles in `t` that certify each formula numerically.
//!
//! The closed-form and oracle sides deliberately share no differentiation
//! code: closed forms consume pointwise frame data, the oracle only ever
//! differentiates `t -> Vol(t)`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{fd_d1, ImmersionChart};
use crate::error::{Error, Result};
use crate::frame::{build_frame, dual_map};
use crate::lorentz::{dot, pairwise_sum, AmbientVector};
use crate::tol::Tolerances;

pub type ScalarTX = Arc<dyn Fn(f64, &[f64]) -> Result<f64> + Send + Sync>;
pub type ScalarX = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type FamilyFn = Arc<dyn Fn(f64, &[f64]) -> Result<AmbientVector> + Send + Sync>;

// --- quadrature ------------------------------------------------------------

/// Tensor-product Gauss-Legendre nodes and weights over a rectangular box.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub order: usize,
    pub domain: Vec<(f64, f64)>,
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre_nodes(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order < 2 {
        return Err(Error::Config(format!(
            "quadrature order must be >= 2, got {order}"
        )));
    }
    let k = order;
    let legendre = |x: f64| -> (f64, f64) {
        let mut p0 = 1.0;
        let mut p1 = x;
        for j in 1..k {
            let jf = j as f64;
            let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
            p0 = p1;
            p1 = p2;
        }
        let dp = k as f64 * (x * p1 - p0) / (x * x - 1.0);
        (p1, dp)
    };
    let mut nodes = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for i in 1..=k {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (k as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(x);
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    nodes.reverse();
    weights.reverse();
    Ok((nodes, weights))
}

impl QuadratureGrid {
    pub fn build(domain: &[(f64, f64)], order: usize) -> Result<Self> {
        if domain.is_empty() {
            return Err(Error::Config("quadrature box must have >= 1 axis".into()));
        }
        let (base_nodes, base_weights) = gauss_legendre_nodes(order)?;
        let n = domain.len();
        let total = order.pow(n as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        loop {
            let mut node = Vec::with_capacity(n);
            let mut w = 1.0;
            for (axis, &(a, b)) in domain.iter().enumerate() {
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                node.push(mid + half * base_nodes[idx[axis]]);
                w *= half * base_weights[idx[axis]];
            }
            nodes.push(node);
            weights.push(w);
            // row-major increment, last axis fastest
            let mut axis = n;
            loop {
                if axis == 0 {
                    return Ok(Self {
                        nodes,
                        weights,
                        order,
                        domain: domain.to_vec(),
                    });
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < order {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature of a plain integrand over the grid, in fixed node order.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        let vals: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .collect();
        pairwise_sum(&vals)
    }
}

/// Grid over `sub_box` (default: the whole chart box), rejecting boxes that
/// leave the chart domain.
pub fn grid_for_chart(
    chart: &ImmersionChart,
    sub_box: Option<&[(f64, f64)]>,
    order: usize,
) -> Result<QuadratureGrid> {
    let domain = sub_box.unwrap_or(chart.domain());
    if domain.len() != chart.n() {
        return Err(Error::Config(format!(
            "box has {} axes but chart has {}",
            domain.len(),
            chart.n()
        )));
    }
    for ((a, b), (ca, cb)) in domain.iter().zip(chart.domain()) {
        if a < ca || b > cb || !(a < b) {
            return Err(Error::Domain {
                at: domain.iter().map(|(a, _)| *a).collect(),
            });
        }
    }
    QuadratureGrid::build(domain, order)
}

/// Canonical smooth window enforcing fixed-boundary variations:
/// `b(x) = prod_i exp(1 - 1/(1 - u_i^2))` with `u_i` the box-normalized
/// coordinate in (-1,1), extended by zero outside.
pub fn bump(domain: &[(f64, f64)], x: &[f64]) -> f64 {
    let mut prod = 1.0;
    for ((a, b), xi) in domain.iter().zip(x) {
        let u = 2.0 * (xi - a) / (b - a) - 1.0;
        if u <= -1.0 || u >= 1.0 {
            return 0.0;
        }
        prod *= (1.0 - 1.0 / (1.0 - u * u)).exp();
    }
    prod
}

// --- variation specs -------------------------------------------------------

#[derive(Clone)]
pub enum VariationKind {
    /// `F(t,x) = p(x) + phi(t,x) q(x)` (with the canonical window applied
    /// to user-supplied phi).
    Characteristic { phi: ScalarTX, windowed: bool },
    /// The lift `phi(t,x) = t phi0(x)` of a fixed profile.
    AdmissibleLift { phi0: ScalarX },
    /// An arbitrary family `F(t,x)` supplied directly.
    General { family: FamilyFn },
}

/// A family of immersions `F(t, .)` with `F(0, .) = p`.
///
/// `window` is the compact integration domain D whose boundary the family
/// keeps fixed; user-supplied profiles are multiplied by the canonical bump
/// over D.
#[derive(Clone)]
pub struct VariationSpec {
    pub kind: VariationKind,
    /// Half-width of the t-interval the family is trusted on.
    pub t_half_width: f64,
    pub window: Vec<(f64, f64)>,
}

impl VariationSpec {
    pub fn admissible_lift(
        window: &[(f64, f64)],
        phi0: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        eps: f64,
    ) -> Self {
        Self {
            kind: VariationKind::AdmissibleLift {
                phi0: Arc::new(phi0),
            },
            t_half_width: eps,
            window: window.to_vec(),
        }
    }

    pub fn general(
        family: impl Fn(f64, &[f64]) -> Result<AmbientVector> + Send + Sync + 'static,
        eps: f64,
    ) -> Self {
        Self {
            kind: VariationKind::General {
                family: Arc::new(family),
            },
            t_half_width: eps,
            window: Vec::new(),
        }
    }

    pub(crate) fn characteristic_fallible(
        phi: ScalarTX,
        windowed: bool,
        eps: f64,
        window: Vec<(f64, f64)>,
    ) -> Self {
        Self {
            kind: VariationKind::Characteristic { phi, windowed },
            t_half_width: eps,
            window,
        }
    }

    fn window_at(&self, x: &[f64]) -> f64 {
        bump(&self.window, x)
    }

    /// `F(t, x)`.
    pub fn family_point(
        &self,
        chart: &ImmersionChart,
        t: f64,
        x: &[f64],
        tol: &Tolerances,
    ) -> Result<AmbientVector> {
        match &self.kind {
            VariationKind::Characteristic { phi, windowed } => {
                let mut c = phi(t, x)?;
                if *windowed {
                    c *= self.window_at(x);
                }
                displace_along_dual(chart, x, c, tol)
            }
            VariationKind::AdmissibleLift { phi0 } => {
                let c = t * phi0(x) * self.window_at(x);
                displace_along_dual(chart, x, c, tol)
            }
            VariationKind::General { family } => family(t, x),
        }
    }

    /// Variational vector field `X = dF/dt|_0` at `x`.
    pub fn x_at(&self, chart: &ImmersionChart, x: &[f64], tol: &Tolerances) -> Result<AmbientVector> {
        let h = tol.fd_t_step * self.t_half_width;
        match &self.kind {
            VariationKind::Characteristic { phi, windowed } => {
                let dphi = richardson_d1_scalar(&|t| phi(t, x), h)?;
                let c = dphi * if *windowed { self.window_at(x) } else { 1.0 };
                dual_multiple(chart, x, c, tol)
            }
            VariationKind::AdmissibleLift { phi0 } => {
                let c = phi0(x) * self.window_at(x);
                dual_multiple(chart, x, c, tol)
            }
            VariationKind::General { family } => {
                richardson_d1_vector(&|t| family(t, x), h, chart.ambient_dim())
            }
        }
    }

    /// Acceleration field `d^2F/dt^2|_0` at `x`.
    pub fn xbar_dot_at(
        &self,
        chart: &ImmersionChart,
        x: &[f64],
        tol: &Tolerances,
    ) -> Result<AmbientVector> {
        let h = tol.fd_t_step * self.t_half_width;
        match &self.kind {
            VariationKind::Characteristic { phi, windowed } => {
                let ddphi = richardson_d2_scalar(&|t| phi(t, x), h)?;
                let c = ddphi * if *windowed { self.window_at(x) } else { 1.0 };
                dual_multiple(chart, x, c, tol)
            }
            VariationKind::AdmissibleLift { .. } => Ok(AmbientVector::zeros(chart.ambient_dim())),
            VariationKind::General { family } => {
                richardson_d2_vector(&|t| family(t, x), h, chart.ambient_dim())
            }
        }
    }
}

fn dual_multiple(
    chart: &ImmersionChart,
    x: &[f64],
    c: f64,
    tol: &Tolerances,
) -> Result<AmbientVector> {
    if c == 0.0 {
        return Ok(AmbientVector::zeros(chart.ambient_dim()));
    }
    let q = dual_map(&chart.eval_jet2(x)?, tol)?;
    Ok(q.scale(c))
}

fn displace_along_dual(
    chart: &ImmersionChart,
    x: &[f64],
    c: f64,
    tol: &Tolerances,
) -> Result<AmbientVector> {
    if c == 0.0 {
        return chart.eval(x);
    }
    let jet = chart.eval_jet2(x)?;
    let q = dual_map(&jet, tol)?;
    Ok(jet.value.axpy(c, &q))
}

/// The characteristic family `F(t,x) = p(x) + phi(t,x) b(x) q(x)`, windowed
/// over the whole chart box.
///
/// `phi(0,.) = 0` is validated by sampling; the canonical window keeps the
/// boundary fixed no matter what `phi` does there.
pub fn make_characteristic_variation(
    chart: &ImmersionChart,
    phi: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    eps: f64,
) -> Result<VariationSpec> {
    for x in crate::chart::interior_samples(chart, 16, 0x0c0f_fee0) {
        let v = phi(0.0, &x);
        if v.abs() > 1e-12 {
            return Err(Error::Spec(format!(
                "phi(0, {x:?}) = {v:.3e}, but a characteristic variation needs phi(0,.) = 0"
            )));
        }
    }
    let phi = Arc::new(phi);
    Ok(VariationSpec::characteristic_fallible(
        Arc::new(move |t, x: &[f64]| Ok(phi(t, x))),
        true,
        eps,
        chart.domain().to_vec(),
    ))
}

/// The fields X and the acceleration at the grid nodes, plus the largest
/// deviation of X from the span of q (zero for characteristic variations).
#[derive(Debug, Clone)]
pub struct VariationalFields {
    pub x_vals: Vec<AmbientVector>,
    pub xbar_dot_vals: Vec<AmbientVector>,
    pub max_off_dual_residual: f64,
}

pub fn variational_fields(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    spec: &VariationSpec,
    tol: &Tolerances,
) -> Result<VariationalFields> {
    let per_node: Vec<(AmbientVector, AmbientVector, f64)> = grid
        .nodes
        .par_iter()
        .map(|x| {
            let xv = spec.x_at(chart, x, tol)?;
            let av = spec.xbar_dot_at(chart, x, tol)?;
            let jet = chart.eval_jet2(x)?;
            let q = dual_map(&jet, tol)?;
            let off = |v: &AmbientVector| {
                let coeff = dot(v, &jet.value); // <v,p> since <q,p> = 1
                v.sub(&q.scale(coeff)).euclidean_norm()
            };
            let res = off(&xv).max(off(&av));
            Ok((xv, av, res))
        })
        .collect::<Result<_>>()?;
    let max_off_dual_residual = per_node.iter().map(|t| t.2).fold(0.0, f64::max);
    Ok(VariationalFields {
        x_vals: per_node.iter().map(|t| t.0.clone()).collect(),
        xbar_dot_vals: per_node.iter().map(|t| t.1.clone()).collect(),
        max_off_dual_residual,
    })
}

// --- volume ---------------------------------------------------------------

fn sqrt_det_pd(g: &DMatrix<f64>, at: &[f64]) -> Result<f64> {
    match g.clone().cholesky() {
        Some(ch) => Ok((0..g.nrows()).map(|i| ch.l()[(i, i)]).product()),
        None => {
            let eig = g.clone().symmetric_eigen();
            Err(Error::SpacelikeViolation {
                at: at.to_vec(),
                min_eigenvalue: eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min),
            })
        }
    }
}

/// Induced metric of an arbitrary smooth map at `x`, from 4th-order finite
/// differences of the map.
pub(crate) fn map_metric(
    map: &dyn Fn(&[f64]) -> Result<AmbientVector>,
    x: &[f64],
    n: usize,
    h: f64,
) -> Result<DMatrix<f64>> {
    let mut d1 = Vec::with_capacity(n);
    for axis in 0..n {
        d1.push(fd_d1(map, x, axis, h)?);
    }
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(&d1[i], &d1[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

pub(crate) fn volume_of_map(
    map: &(dyn Fn(&[f64]) -> Result<AmbientVector> + Sync),
    grid: &QuadratureGrid,
    n: usize,
    h: f64,
) -> Result<f64> {
    let vals: Vec<f64> = grid
        .nodes
        .par_iter()
        .zip(&grid.weights)
        .map(|(x, w)| {
            let g = map_metric(map, x, n, h)?;
            Ok(w * sqrt_det_pd(&g, x)?)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&vals))
}

/// `Vol(t)` of the family (or of the base chart when `spec` is `None`).
///
/// The base chart integrates its own jets; families are differentiated in
/// `x` by finite differences of `F(t, .)`, so every stencil point of a
/// `d/dt` sweep goes through the same evaluation path.
pub fn volume(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    spec: Option<&VariationSpec>,
    t: f64,
    tol: &Tolerances,
) -> Result<f64> {
    match spec {
        None => {
            let vals: Vec<f64> = grid
                .nodes
                .par_iter()
                .zip(&grid.weights)
                .map(|(x, w)| {
                    let g = chart.eval_jet2(x)?.metric();
                    Ok(w * sqrt_det_pd(&g, x)?)
                })
                .collect::<Result<_>>()?;
            Ok(pairwise_sum(&vals))
        }
        Some(spec) => {
            let h = tol.fd_jet_step * chart.domain_scale();
            let map = |y: &[f64]| spec.family_point(chart, t, y, tol);
            volume_of_map(&map, grid, chart.n(), h)
        }
    }
}

/// `Vol(t)` sampled on an inclusive linear sweep.
pub fn volume_sweep(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    spec: &VariationSpec,
    t0: f64,
    t1: f64,
    steps: usize,
    tol: &Tolerances,
) -> Result<Vec<(f64, f64)>> {
    let steps = steps.max(2);
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = t0 + (t1 - t0) * k as f64 / (steps - 1) as f64;
        out.push((t, volume(chart, grid, Some(spec), t, tol)?));
    }
    Ok(out)
}

// --- closed-form variations -------------------------------------------------

/// First variation for an arbitrary ambient field X:
/// `integral of (-tr(A) <X,p> + n <X,q>) dV_0`.
pub fn first_variation_general(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    x_field: &(dyn Fn(&[f64]) -> Result<AmbientVector> + Sync),
    tol: &Tolerances,
) -> Result<f64> {
    let n = chart.n() as f64;
    let vals: Vec<f64> = grid
        .nodes
        .par_iter()
        .zip(&grid.weights)
        .map(|(x, w)| {
            let f = build_frame(chart, x, tol)?;
            let xv = x_field(x)?;
            let integrand = -f.tr_a * dot(&xv, &f.jet.value) + n * dot(&xv, &f.q);
            Ok(w * integrand * f.sqrt_det_g)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&vals))
}

/// First variation for an admissible variation X = phi0 b q:
/// `-integral of tr(A) phi0 b dV_0` (using `<q,p> = 1`). The window is the
/// bump over the integration box.
pub fn first_variation_admissible(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    phi0: &(dyn Fn(&[f64]) -> f64 + Sync),
    tol: &Tolerances,
) -> Result<f64> {
    let vals: Vec<f64> = grid
        .nodes
        .par_iter()
        .zip(&grid.weights)
        .map(|(x, w)| {
            let f = build_frame(chart, x, tol)?;
            let c = phi0(x) * bump(&grid.domain, x);
            Ok(-w * f.tr_a * c * f.sqrt_det_g)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&vals))
}

/// Second variation for a characteristic variation when S == 0:
/// `-integral of <X,p>^2 tr(A^2) dV_0`, always nonpositive.
///
/// Gated on `max |S| < s_flat_tol` over the grid; the formula is only
/// asserted for scalar-flat hypersurfaces.
pub fn second_variation_characteristic(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    phi0: &(dyn Fn(&[f64]) -> f64 + Sync),
    tol: &Tolerances,
) -> Result<f64> {
    let per_node: Vec<(f64, f64)> = grid
        .nodes
        .par_iter()
        .zip(&grid.weights)
        .map(|(x, w)| {
            let f = build_frame(chart, x, tol)?;
            let c = phi0(x) * bump(&grid.domain, x);
            Ok((f.scalar_curvature.abs(), -w * c * c * f.tr_a2 * f.sqrt_det_g))
        })
        .collect::<Result<_>>()?;
    let max_abs_s = per_node.iter().map(|t| t.0).fold(0.0, f64::max);
    if max_abs_s >= tol.s_flat_tol {
        return Err(Error::SPrecond {
            max_abs_s,
            gate: tol.s_flat_tol,
        });
    }
    let vals: Vec<f64> = per_node.iter().map(|t| t.1).collect();
    Ok(pairwise_sum(&vals))
}

/// The integrand terms of the general second-variation formula at one point
/// (ambient curvature term dropped: Minkowski space is flat).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecondVariationTerms {
    /// sum_i <(grad_{e_i} X)^perp, (grad_{e_i} X)^perp>
    pub normal_grad_sq: f64,
    /// -sum_{ij} <grad_{e_i} X, e_j><grad_{e_j} X, e_i>
    pub mixed_trace: f64,
    /// (sum_i <grad_{e_i} X, e_i>)^2
    pub divergence_sq: f64,
    /// -<ddF/dt^2|_0, H>
    pub acceleration: f64,
    pub total: f64,
}

/// Termwise evaluation of the general second-variation integrand at `x`.
pub fn second_variation_terms(
    chart: &ImmersionChart,
    x: &[f64],
    spec: &VariationSpec,
    tol: &Tolerances,
) -> Result<SecondVariationTerms> {
    let frame = build_frame(chart, x, tol)?;
    let n = chart.n();
    let h = tol.fd_jet_step * chart.domain_scale();
    let xf = |y: &[f64]| spec.x_at(chart, y, tol);
    let mut dx = Vec::with_capacity(n);
    for axis in 0..n {
        dx.push(fd_d1(&xf, x, axis, h)?);
    }
    // grad_{e_i} X = sum_k onb[k,i] dX/dx^k, pushed through the frame.
    let grad: Vec<AmbientVector> = (0..n)
        .map(|i| {
            let mut v = AmbientVector::zeros(chart.ambient_dim());
            for (k, dxk) in dx.iter().enumerate() {
                v = v.axpy(frame.onb[(k, i)], dxk);
            }
            v
        })
        .collect();
    let frame_amb: Vec<AmbientVector> = (0..n).map(|i| frame.frame_vector(i)).collect();

    let normal_grad_sq = pairwise_sum(
        &grad
            .iter()
            .map(|gi| 2.0 * dot(gi, &frame.jet.value) * dot(gi, &frame.q))
            .collect::<Vec<_>>(),
    );
    let mut mixed = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            mixed.push(dot(&grad[i], &frame_amb[j]) * dot(&grad[j], &frame_amb[i]));
        }
    }
    let mixed_trace = -pairwise_sum(&mixed);
    let div = pairwise_sum(
        &(0..n)
            .map(|i| dot(&grad[i], &frame_amb[i]))
            .collect::<Vec<_>>(),
    );
    let divergence_sq = div * div;
    let accel_vec = spec.xbar_dot_at(chart, x, tol)?;
    let acceleration = -dot(&accel_vec, &frame.mean_curvature);
    let total = pairwise_sum(&[normal_grad_sq, mixed_trace, divergence_sq, acceleration]);
    Ok(SecondVariationTerms {
        normal_grad_sq,
        mixed_trace,
        divergence_sq,
        acceleration,
        total,
    })
}

/// Second variation in the general setting (Minkowski ambient, so the
/// curvature term vanishes identically):
/// `integral of [ sum |(grad X)^perp|^2 - sum <grad_i X, e_j><grad_j X, e_i>
///   + (sum <grad_i X, e_i>)^2 - <ddF/dt^2, H> ] dV_0`.
pub fn second_variation_general(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    spec: &VariationSpec,
    tol: &Tolerances,
) -> Result<f64> {
    let vals: Vec<f64> = grid
        .nodes
        .par_iter()
        .zip(&grid.weights)
        .map(|(x, w)| {
            let terms = second_variation_terms(chart, x, spec, tol)?;
            let f = build_frame(chart, x, tol)?;
            Ok(w * terms.total * f.sqrt_det_g)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&vals))
}

// --- finite-difference oracle ----------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdOrder {
    First,
    Second,
}

/// A Richardson-extrapolated central difference and its error estimate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: f64,
    pub error_estimate: f64,
}

/// Richardson-extrapolated central difference of `vol_fn` at 0 (two step
/// sizes h and h/2). NaN from `vol_fn` means a stencil point left the
/// spacelike regime.
pub fn fd_derivative(vol_fn: &dyn Fn(f64) -> f64, order: FdOrder, h: f64) -> Result<FdEstimate> {
    let eval = |t: f64| -> Result<f64> {
        let v = vol_fn(t);
        if v.is_nan() {
            Err(Error::StencilRange { t })
        } else {
            Ok(v)
        }
    };
    match order {
        FdOrder::First => {
            let coarse = (eval(h)? - eval(-h)?) / (2.0 * h);
            let fine = (eval(h / 2.0)? - eval(-h / 2.0)?) / h;
            let value = (4.0 * fine - coarse) / 3.0;
            Ok(FdEstimate {
                value,
                error_estimate: (fine - coarse).abs() / 3.0,
            })
        }
        FdOrder::Second => {
            let f0 = eval(0.0)?;
            let coarse = (eval(h)? - 2.0 * f0 + eval(-h)?) / (h * h);
            let fine = (eval(h / 2.0)? - 2.0 * f0 + eval(-h / 2.0)?) / (h * h / 4.0);
            let value = (4.0 * fine - coarse) / 3.0;
            Ok(FdEstimate {
                value,
                error_estimate: (fine - coarse).abs() / 3.0,
            })
        }
    }
}

/// The oracle pair (d/dt Vol, d^2/dt^2 Vol) at t = 0 for a variation family.
pub fn volume_derivatives(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    spec: &VariationSpec,
    tol: &Tolerances,
) -> Result<(FdEstimate, FdEstimate)> {
    let h = tol.fd_t_step * spec.t_half_width;
    let vol_fn = |t: f64| volume(chart, grid, Some(spec), t, tol).unwrap_or(f64::NAN);
    let d1 = fd_derivative(&vol_fn, FdOrder::First, h)?;
    let d2 = fd_derivative(&vol_fn, FdOrder::Second, h)?;
    Ok((d1, d2))
}

// --- reports ----------------------------------------------------------------

/// Closed-form variations against the finite-difference oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationReport {
    pub closed_form_d1: f64,
    pub fd_d1: f64,
    pub fd_d1_error_estimate: f64,
    /// General (five-term) second-variation formula.
    pub closed_form_d2: f64,
    pub fd_d2: f64,
    pub fd_d2_error_estimate: f64,
    /// Characteristic-formula value, when the spec is admissible and the
    /// scalar-flatness gate passes.
    pub characteristic_d2: Option<f64>,
    pub rel_err_d1: f64,
    pub rel_err_d2: f64,
    /// closed-form second variation <= 1e-12.
    pub sign_check_d2: bool,
    pub notes: Vec<String>,
}

/// Runs the closed forms and the t-oracle on one variation family.
pub fn variation_report(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    spec: &VariationSpec,
    tol: &Tolerances,
) -> Result<VariationReport> {
    let mut notes = Vec::new();
    let x_field = |x: &[f64]| spec.x_at(chart, x, tol);
    let closed_form_d1 = first_variation_general(chart, grid, &x_field, tol)?;
    let closed_form_d2 = second_variation_general(chart, grid, spec, tol)?;

    let characteristic_d2 = match &spec.kind {
        VariationKind::General { .. } => {
            notes.push("characteristic second-variation formula not applicable to a general family".into());
            None
        }
        VariationKind::AdmissibleLift { phi0 } => {
            let phi0 = Arc::clone(phi0);
            match second_variation_characteristic(chart, grid, &move |x: &[f64]| phi0(x), tol) {
                Ok(v) => Some(v),
                Err(e) => {
                    notes.push(format!("characteristic second-variation formula unavailable: {e}"));
                    None
                }
            }
        }
        VariationKind::Characteristic { phi, windowed } => {
            let phi = Arc::clone(phi);
            let h = tol.fd_t_step * spec.t_half_width;
            let windowed = *windowed;
            let domain = grid.domain.clone();
            // Effective profile phi0(x) = d/dt phi(t,x)|_0; the window is
            // applied inside second_variation_characteristic, so unwindowed
            // specs must cancel it.
            let phi0_eff = move |x: &[f64]| -> f64 {
                let d = richardson_d1_scalar(&|t| phi(t, x), h).unwrap_or(f64::NAN);
                if windowed {
                    d
                } else {
                    let b = bump(&domain, x);
                    if b == 0.0 {
                        0.0
                    } else {
                        d / b
                    }
                }
            };
            match second_variation_characteristic(chart, grid, &phi0_eff, tol) {
                Ok(v) => Some(v),
                Err(e) => {
                    notes.push(format!("characteristic second-variation formula unavailable: {e}"));
                    None
                }
            }
        }
    };

    let (d1, d2) = volume_derivatives(chart, grid, spec, tol)?;
    let rel_err_d1 = (closed_form_d1 - d1.value).abs() / d1.value.abs().max(1.0);
    let rel_err_d2 = (closed_form_d2 - d2.value).abs() / d2.value.abs().max(1.0);
    let sign_check_d2 = characteristic_d2.unwrap_or(closed_form_d2) <= 1e-12;
    Ok(VariationReport {
        closed_form_d1,
        fd_d1: d1.value,
        fd_d1_error_estimate: d1.error_estimate,
        closed_form_d2,
        fd_d2: d2.value,
        fd_d2_error_estimate: d2.error_estimate,
        characteristic_d2,
        rel_err_d1,
        rel_err_d2,
        sign_check_d2,
        notes,
    })
}

/// Per-node frame diagnostics, for verbose reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeDiagnostic {
    pub x: Vec<f64>,
    pub weight: f64,
    pub sqrt_det_g: f64,
    pub tr_a: f64,
    pub tr_a2: f64,
    pub scalar_curvature: f64,
    pub window: f64,
}

pub fn node_diagnostics(
    chart: &ImmersionChart,
    grid: &QuadratureGrid,
    tol: &Tolerances,
) -> Result<Vec<NodeDiagnostic>> {
    grid.nodes
        .par_iter()
        .zip(&grid.weights)
        .map(|(x, w)| {
            let f = build_frame(chart, x, tol)?;
            Ok(NodeDiagnostic {
                x: x.clone(),
                weight: *w,
                sqrt_det_g: f.sqrt_det_g,
                tr_a: f.tr_a,
                tr_a2: f.tr_a2,
                scalar_curvature: f.scalar_curvature,
                window: bump(&grid.domain, x),
            })
        })
        .collect()
}

// --- Richardson helpers -----------------------------------------------------

pub(crate) fn richardson_d1_scalar(f: &dyn Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let coarse = (f(h)? - f(-h)?) / (2.0 * h);
    let fine = (f(h / 2.0)? - f(-h / 2.0)?) / h;
    Ok((4.0 * fine - coarse) / 3.0)
}

pub(crate) fn richardson_d2_scalar(f: &dyn Fn(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let f0 = f(0.0)?;
    let coarse = (f(h)? - 2.0 * f0 + f(-h)?) / (h * h);
    let fine = (f(h / 2.0)? - 2.0 * f0 + f(-h / 2.0)?) / (h * h / 4.0);
    Ok((4.0 * fine - coarse) / 3.0)
}

fn richardson_d1_vector(
    f: &dyn Fn(f64) -> Result<AmbientVector>,
    h: f64,
    dim: usize,
) -> Result<AmbientVector> {
    let mut acc = AmbientVector::zeros(dim);
    // (4/3) * [f(h/2) - f(-h/2)]/h - (1/3) * [f(h) - f(-h)]/(2h)
    for (t, w) in [
        (h / 2.0, 4.0 / (3.0 * h)),
        (-h / 2.0, -4.0 / (3.0 * h)),
        (h, -1.0 / (6.0 * h)),
        (-h, 1.0 / (6.0 * h)),
    ] {
        acc = acc.axpy(w, &f(t)?);
    }
    Ok(acc)
}

fn richardson_d2_vector(
    f: &dyn Fn(f64) -> Result<AmbientVector>,
    h: f64,
    dim: usize,
) -> Result<AmbientVector> {
    let f0 = f(0.0)?;
    let hh = h * h;
    // (4*D2(h/2) - D2(h))/3 = [16(f(h/2)+f(-h/2)) - (f(h)+f(-h)) - 30 f0]/(3h^2)
    let mut acc = AmbientVector::zeros(dim);
    for (t, w) in [
        (h / 2.0, 16.0 / (3.0 * hh)),
        (-h / 2.0, 16.0 / (3.0 * hh)),
        (h, -1.0 / (3.0 * hh)),
        (-h, -1.0 / (3.0 * hh)),
    ] {
        acc = acc.axpy(w, &f(t)?);
    }
    Ok(acc.axpy(-30.0 / (3.0 * hh), &f0))
}
