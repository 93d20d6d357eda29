//! Immersion charts `p : D ⊂ R^n -> Λ^{n+1}` with second-order jets.
//!
//! Built-ins cover the catalog of flat examples (Euclidean chart, the
//! hyperbolic-times-sphere product) plus a round-sphere control case with
//! nonzero scalar curvature. User charts plug in through [`ImmersionChart::custom`]
//! with a finite-difference jet backend.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame;
use crate::lorentz::{dot, AmbientVector};
use crate::tol::Tolerances;

pub type EvalFn = Arc<dyn Fn(&[f64]) -> Result<AmbientVector> + Send + Sync>;
pub type JetFn = Arc<dyn Fn(&[f64]) -> Jet2 + Send + Sync>;

/// Value, first and second partial derivatives of a chart at one point.
///
/// Second derivatives are stored once (upper triangle), so the symmetry
/// `d2(i,j) == d2(j,i)` is exact by construction.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub value: AmbientVector,
    pub d1: Vec<AmbientVector>,
    d2: Vec<AmbientVector>,
}

impl Jet2 {
    pub fn new(value: AmbientVector, d1: Vec<AmbientVector>, d2_upper: Vec<AmbientVector>) -> Self {
        debug_assert_eq!(d2_upper.len(), d1.len() * (d1.len() + 1) / 2);
        Self {
            value,
            d1,
            d2: d2_upper,
        }
    }

    pub fn n(&self) -> usize {
        self.d1.len()
    }

    fn tri(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // row-major upper triangle of an n x n symmetric array
        i * self.n() - i * (i + 1) / 2 + j
    }

    pub fn d2(&self, i: usize, j: usize) -> &AmbientVector {
        &self.d2[self.tri(i, j)]
    }

    /// Induced metric g_ij = <d_i p, d_j p>.
    pub fn metric(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(&self.d1[i], &self.d1[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

/// How jets are produced for a chart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum JetBackend {
    Analytic,
    FiniteDifference { step: f64 },
}

/// An immersion chart of a spacelike hypersurface in the light-cone.
///
/// Charts are immutable after construction and evaluators must be pure, so
/// concurrent evaluation at distinct points is safe.
#[derive(Clone)]
pub struct ImmersionChart {
    pub name: String,
    n: usize,
    ambient_dim: usize,
    domain: Vec<(f64, f64)>,
    evaluator: EvalFn,
    analytic: Option<JetFn>,
    backend: JetBackend,
}

impl ImmersionChart {
    /// Intrinsic dimension of the parametrized hypersurface.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn backend(&self) -> &JetBackend {
        &self.backend
    }

    pub fn box_center(&self) -> Vec<f64> {
        self.domain.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Largest box edge; finite-difference steps are scaled by this.
    pub fn domain_scale(&self) -> f64 {
        self.domain
            .iter()
            .map(|(a, b)| b - a)
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE)
    }

    pub fn contains(&self, x: &[f64], margin: f64) -> bool {
        x.len() == self.n
            && x.iter()
                .zip(&self.domain)
                .all(|(xi, (a, b))| *xi >= a + margin && *xi <= b - margin)
    }

    /// Evaluates the immersion itself.
    pub fn eval(&self, x: &[f64]) -> Result<AmbientVector> {
        (self.evaluator)(x)
    }

    /// Second-order jet at `x`.
    ///
    /// The analytic backend returns exact jets; the finite-difference
    /// backend uses 4th-order central stencils and needs a `2h` margin
    /// from the domain boundary.
    pub fn eval_jet2(&self, x: &[f64]) -> Result<Jet2> {
        let eps = 1e-9 * self.domain_scale();
        if !self.contains(x, -eps) {
            return Err(Error::Domain { at: x.to_vec() });
        }
        match (&self.analytic, &self.backend) {
            (Some(jets), JetBackend::Analytic) => Ok(jets(x)),
            _ => {
                let h = match self.backend {
                    JetBackend::FiniteDifference { step } => step,
                    JetBackend::Analytic => 1e-3 * self.domain_scale(),
                };
                if !self.contains(x, 2.0 * h - eps) {
                    return Err(Error::FdStencil {
                        at: x.to_vec(),
                        needed_margin: 2.0 * h,
                    });
                }
                fd_jet2(&*self.evaluator, x, h)
            }
        }
    }

    /// A chart backed by a user evaluator with finite-difference jets.
    pub fn custom(
        name: &str,
        n: usize,
        ambient_dim: usize,
        domain: Vec<(f64, f64)>,
        evaluator: impl Fn(&[f64]) -> Result<AmbientVector> + Send + Sync + 'static,
        step: Option<f64>,
    ) -> Self {
        let scale = domain
            .iter()
            .map(|(a, b)| b - a)
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        Self {
            name: name.to_string(),
            n,
            ambient_dim,
            domain,
            evaluator: Arc::new(evaluator),
            analytic: None,
            backend: JetBackend::FiniteDifference {
                step: step.unwrap_or(1e-3 * scale),
            },
        }
    }

    /// Built-in chart catalog with its default parameter box.
    ///
    /// * `euclidean(n)`: the isometric immersion of flat R^n.
    /// * `hyperbolic_sphere_product(k)` (alias `hs_product`): the inclusion
    ///   of H^k x S^k in R^{2k+2}_1, intrinsic dimension 2k.
    /// * `round_sphere(n)`: `p(u) = (1, u)` over unit-sphere angles; the
    ///   control case with nonzero scalar curvature.
    pub fn builtin(name: &str, n: usize) -> Result<Self> {
        let domain = default_box(name, n)?;
        Self::builtin_with_box(name, n, domain)
    }

    pub fn builtin_with_box(name: &str, n: usize, domain: Vec<(f64, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("builtin charts need n >= 1".into()));
        }
        match name {
            "euclidean" => {
                if domain.len() != n {
                    return Err(Error::Config(format!(
                        "euclidean({n}) expects a box of {n} intervals, got {}",
                        domain.len()
                    )));
                }
                Ok(euclidean_chart(n, domain))
            }
            "hyperbolic_sphere_product" | "hs_product" => {
                let dim = 2 * n;
                if domain.len() != dim {
                    return Err(Error::Config(format!(
                        "hyperbolic_sphere_product({n}) expects a box of {dim} intervals, got {}",
                        domain.len()
                    )));
                }
                let mut comps = hyperbolic_comps(n, 0);
                comps.extend(sphere_comps(n, n));
                Ok(product_chart(
                    &format!("hyperbolic_sphere_product({n})"),
                    dim,
                    comps,
                    domain,
                ))
            }
            "round_sphere" => {
                if domain.len() != n {
                    return Err(Error::Config(format!(
                        "round_sphere({n}) expects a box of {n} intervals, got {}",
                        domain.len()
                    )));
                }
                let mut comps = vec![vec![]];
                comps.extend(sphere_comps(n, 0));
                Ok(product_chart(&format!("round_sphere({n})"), n, comps, domain))
            }
            other => Err(Error::Config(format!("unknown builtin chart `{other}`"))),
        }
    }

    pub fn from_config(cfg: &ChartConfig) -> Result<Self> {
        let name = cfg.name.strip_prefix("builtin:").unwrap_or(&cfg.name);
        match &cfg.domain {
            Some(b) => {
                let domain: Vec<(f64, f64)> = b.iter().map(|ab| (ab[0], ab[1])).collect();
                if domain.iter().any(|(a, b)| !(a < b)) {
                    return Err(Error::Config("box intervals must satisfy a < b".into()));
                }
                Self::builtin_with_box(name, cfg.n, domain)
            }
            None => Self::builtin(name, cfg.n),
        }
    }
}

impl std::fmt::Debug for ImmersionChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImmersionChart")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("ambient_dim", &self.ambient_dim)
            .field("domain", &self.domain)
            .field("backend", &self.backend)
            .finish()
    }
}

/// Chart description accepted on the file interface.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChartConfig {
    pub name: String,
    pub n: usize,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
}

fn default_box(name: &str, n: usize) -> Result<Vec<(f64, f64)>> {
    match name {
        "euclidean" => Ok(vec![(0.0, 1.0); n]),
        "hyperbolic_sphere_product" | "hs_product" => {
            if n == 1 {
                // H^1 x S^1 is globally immersive; keep the origin interior
                // so stencils around the worked example points stay in-box.
                Ok(vec![(-1.0, 1.0); 2])
            } else {
                let mut b = hyperbolic_box(n);
                b.extend(angle_box(n));
                Ok(b)
            }
        }
        "round_sphere" => {
            let c = std::f64::consts::FRAC_PI_2;
            Ok(vec![(c - 0.6, c + 0.6); n])
        }
        other => Err(Error::Config(format!("unknown builtin chart `{other}`"))),
    }
}

/// Angle box for S^m kept inside one period and away from the polar
/// degeneracies of the nested-sine parametrization.
fn angle_box(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|j| if j + 1 < m { (0.7, 2.4) } else { (0.0, 1.0) })
        .collect()
}

fn hyperbolic_box(m: usize) -> Vec<(f64, f64)> {
    if m == 1 {
        vec![(0.0, 1.0)]
    } else {
        let mut b = vec![(0.5, 1.5)];
        b.extend(angle_box(m - 1));
        b
    }
}

// --- analytic jets for products of single-variable factors ---------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Factor {
    Sin,
    Cos,
    Sinh,
    Cosh,
}

impl Factor {
    fn eval(self, t: f64, order: u8) -> f64 {
        match self {
            Factor::Sin => match order {
                0 => t.sin(),
                1 => t.cos(),
                _ => -t.sin(),
            },
            Factor::Cos => match order {
                0 => t.cos(),
                1 => -t.sin(),
                _ => -t.cos(),
            },
            Factor::Sinh => {
                if order.is_multiple_of(2) {
                    t.sinh()
                } else {
                    t.cosh()
                }
            }
            Factor::Cosh => {
                if order.is_multiple_of(2) {
                    t.cosh()
                } else {
                    t.sinh()
                }
            }
        }
    }
}

type Component = Vec<(usize, Factor)>;

/// Components of the nested-sine parametrization of S^m in R^{m+1},
/// using angles `off .. off+m`.
fn sphere_comps(m: usize, off: usize) -> Vec<Component> {
    let mut comps = Vec::with_capacity(m + 1);
    for j in 0..m {
        let mut c: Component = (0..j).map(|l| (off + l, Factor::Sin)).collect();
        c.push((off + j, Factor::Cos));
        comps.push(c);
    }
    comps.push((0..m).map(|l| (off + l, Factor::Sin)).collect());
    comps
}

/// Components of the polar parametrization of H^m in R^{m+1}_1,
/// using parameters `off .. off+m`.
fn hyperbolic_comps(m: usize, off: usize) -> Vec<Component> {
    let mut comps = vec![vec![(off, Factor::Cosh)]];
    let sph = if m >= 2 {
        sphere_comps(m - 1, off + 1)
    } else {
        vec![vec![]]
    };
    for sc in sph {
        let mut c = vec![(off, Factor::Sinh)];
        c.extend(sc);
        comps.push(c);
    }
    comps
}

/// A derivative of a product of single-variable factors, with the requested
/// order per variable. Variables carrying a derivative but absent from the
/// component kill the whole term.
fn component_eval(comp: &[(usize, Factor)], x: &[f64], orders: &[u8]) -> f64 {
    let mut remaining: u32 = orders.iter().map(|&o| o as u32).sum();
    let mut prod = 1.0;
    for &(v, f) in comp {
        prod *= f.eval(x[v], orders[v]);
        remaining -= orders[v] as u32;
    }
    if remaining > 0 {
        return 0.0;
    }
    prod
}

fn product_jet(comps: &[Component], n: usize, x: &[f64]) -> Jet2 {
    let eval = |orders: &[u8]| -> AmbientVector {
        AmbientVector::new(comps.iter().map(|c| component_eval(c, x, orders)).collect())
    };
    let mut orders = vec![0u8; n];
    let value = eval(&orders);
    let mut d1 = Vec::with_capacity(n);
    for a in 0..n {
        orders[a] = 1;
        d1.push(eval(&orders));
        orders[a] = 0;
    }
    let mut d2 = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        for b in a..n {
            orders[a] += 1;
            orders[b] += 1;
            d2.push(eval(&orders));
            orders[a] = 0;
            orders[b] = 0;
        }
    }
    Jet2::new(value, d1, d2)
}

fn product_chart(
    name: &str,
    n: usize,
    comps: Vec<Component>,
    domain: Vec<(f64, f64)>,
) -> ImmersionChart {
    let ambient_dim = comps.len();
    let comps = Arc::new(comps);
    let comps_eval = Arc::clone(&comps);
    let evaluator: EvalFn = Arc::new(move |x: &[f64]| {
        let orders = vec![0u8; n];
        Ok(AmbientVector::new(
            comps_eval
                .iter()
                .map(|c| component_eval(c, x, &orders))
                .collect(),
        ))
    });
    let jets: JetFn = Arc::new(move |x: &[f64]| product_jet(&comps, n, x));
    ImmersionChart {
        name: name.to_string(),
        n,
        ambient_dim,
        domain,
        evaluator,
        analytic: Some(jets),
        backend: JetBackend::Analytic,
    }
}

fn euclidean_chart(n: usize, domain: Vec<(f64, f64)>) -> ImmersionChart {
    let evaluator: EvalFn = Arc::new(move |x: &[f64]| {
        let s: f64 = x.iter().map(|xi| xi * xi).sum();
        let mut coords = Vec::with_capacity(n + 2);
        coords.push(0.5 * (1.0 + s));
        coords.push(0.5 * (-1.0 + s));
        coords.extend_from_slice(x);
        Ok(AmbientVector::new(coords))
    });
    let jets: JetFn = Arc::new(move |x: &[f64]| {
        let s: f64 = x.iter().map(|xi| xi * xi).sum();
        let dim = n + 2;
        let mut value = vec![0.0; dim];
        value[0] = 0.5 * (1.0 + s);
        value[1] = 0.5 * (-1.0 + s);
        value[2..].copy_from_slice(x);
        let mut d1 = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = vec![0.0; dim];
            v[0] = x[i];
            v[1] = x[i];
            v[2 + i] = 1.0;
            d1.push(AmbientVector::new(v));
        }
        let mut d2 = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                let mut v = vec![0.0; dim];
                if i == j {
                    v[0] = 1.0;
                    v[1] = 1.0;
                }
                d2.push(AmbientVector::new(v));
            }
        }
        Jet2::new(AmbientVector::new(value), d1, d2)
    });
    ImmersionChart {
        name: format!("euclidean({n})"),
        n,
        ambient_dim: n + 2,
        domain,
        evaluator,
        analytic: Some(jets),
        backend: JetBackend::Analytic,
    }
}

// --- finite-difference jets ----------------------------------------------

const FD_OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
const FD_WEIGHTS_D1: [f64; 4] = [1.0, -8.0, 8.0, -1.0]; // / 12h

fn shifted(x: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[axis] += delta;
    y
}

/// 4th-order central first derivative of a vector map along one axis.
pub(crate) fn fd_d1(
    f: &dyn Fn(&[f64]) -> Result<AmbientVector>,
    x: &[f64],
    axis: usize,
    h: f64,
) -> Result<AmbientVector> {
    let mut acc: Option<AmbientVector> = None;
    for (off, w) in FD_OFFSETS.iter().zip(FD_WEIGHTS_D1) {
        let v = f(&shifted(x, axis, off * h))?;
        acc = Some(match acc {
            None => v.scale(w),
            Some(a) => a.axpy(w, &v),
        });
    }
    Ok(acc.unwrap().scale(1.0 / (12.0 * h)))
}

fn fd_jet2(f: &dyn Fn(&[f64]) -> Result<AmbientVector>, x: &[f64], h: f64) -> Result<Jet2> {
    let n = x.len();
    let value = f(x)?;
    let dim = value.dim();

    let mut d1 = Vec::with_capacity(n);
    for a in 0..n {
        d1.push(fd_d1(f, x, a, h)?);
    }

    let mut d2 = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        for b in a..n {
            if a == b {
                // -f(+2h) + 16 f(+h) - 30 f(0) + 16 f(-h) - f(-2h), / 12h^2
                let mut acc = value.scale(-30.0);
                for (off, w) in [(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)] {
                    acc = acc.axpy(w, &f(&shifted(x, a, off * h))?);
                }
                d2.push(acc.scale(1.0 / (12.0 * h * h)));
            } else {
                let mut acc = AmbientVector::zeros(dim);
                for (oa, wa) in FD_OFFSETS.iter().zip(FD_WEIGHTS_D1) {
                    for (ob, wb) in FD_OFFSETS.iter().zip(FD_WEIGHTS_D1) {
                        let mut y = x.to_vec();
                        y[a] += oa * h;
                        y[b] += ob * h;
                        acc = acc.axpy(wa * wb, &f(&y)?);
                    }
                }
                d2.push(acc.scale(1.0 / (144.0 * h * h)));
            }
        }
    }
    Ok(Jet2::new(value, d1, d2))
}

// --- chart-level checks ----------------------------------------------------

/// Induced metric at `x`, with a positive-definiteness gate.
pub fn validate_spacelike(chart: &ImmersionChart, x: &[f64], tol: &Tolerances) -> Result<DMatrix<f64>> {
    let jet = chart.eval_jet2(x)?;
    let g = jet.metric();
    let eig = g.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_eig > tol.pd_tol) {
        return Err(Error::SpacelikeViolation {
            at: x.to_vec(),
            min_eigenvalue: min_eig,
        });
    }
    Ok(g)
}

/// |<p,p>| at `x`; zero for points genuinely on the light-cone.
pub fn null_residual(chart: &ImmersionChart, x: &[f64]) -> Result<f64> {
    let p = chart.eval(x)?;
    Ok(dot(&p, &p).abs())
}

/// The dual chart `x -> q(x)`, with finite-difference jets.
///
/// The dual map is checked to be a spacelike immersion at the box center and
/// a fixed set of interior sample points; charts whose dual degenerates (the
/// flat chart's dual is constant) are rejected. The FD backend doubles as an
/// independent differentiation route for the identity `d_i q = -A d_i p`.
pub fn dual_chart(chart: &ImmersionChart, tol: &Tolerances) -> Result<ImmersionChart> {
    let base = chart.clone();
    let tol_inner = tol.clone();
    let evaluator: EvalFn = Arc::new(move |x: &[f64]| {
        let jet = base.eval_jet2(x)?;
        frame::dual_map(&jet, &tol_inner)
    });
    let step = tol.fd_jet_step * chart.domain_scale();
    let dual = ImmersionChart {
        name: format!("dual({})", chart.name),
        n: chart.n,
        ambient_dim: chart.ambient_dim,
        domain: chart.domain.clone(),
        evaluator,
        analytic: None,
        backend: JetBackend::FiniteDifference { step },
    };

    for x in interior_samples(chart, 8, 0x6c1a_f00d) {
        let jet = dual.eval_jet2(&x).map_err(|e| Error::DualDegenerate {
            at: x.clone(),
            reason: e.to_string(),
        })?;
        let g = jet.metric();
        let eig = g.symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_eig > tol.pd_tol) {
            return Err(Error::DualDegenerate {
                at: x,
                reason: format!("dual map fails the immersion/spacelike test (min eigenvalue {min_eig:.3e})"),
            });
        }
    }
    Ok(dual)
}

/// Deterministic interior sample points (box center plus seeded uniforms,
/// kept away from the boundary by a stencil-safe margin).
pub fn interior_samples(chart: &ImmersionChart, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut pts = vec![chart.box_center()];
    let margin = 0.05;
    while pts.len() < count.max(1) {
        let x: Vec<f64> = chart
            .domain
            .iter()
            .map(|(a, b)| a + (b - a) * rng.gen_range(margin..1.0 - margin))
            .collect();
        pts.push(x);
    }
    pts
}
