//! Pointwise geometry of a spacelike hypersurface in the light-cone: the
//! dual map, second fundamental form, shape operator, mean curvature vector
//! and scalar curvature, plus an intrinsic Riemann-tensor oracle that
//! recomputes the scalar curvature from Christoffel symbols alone.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::chart::{ImmersionChart, Jet2};
use crate::error::{Error, Result};
use crate::lorentz::{dot, normal_plane, pairwise_sum, AmbientVector};
use crate::tol::Tolerances;

/// All pointwise geometric data of a chart at one parameter point.
///
/// Fields satisfy, by construction: the duality relations
/// `<p,q> = 1`, `<q,q> = 0`, `<d_i p, q> = 0`; `g A = h`;
/// `S = -2(n-1) tr A`; `H = tr(A) p - n q`; `onb^T g onb = I`.
#[derive(Debug, Clone)]
pub struct PointFrame {
    pub x: Vec<f64>,
    pub jet: Jet2,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// Dual map value at `x`.
    pub q: AmbientVector,
    /// h_ij = <d_i d_j p, q>.
    pub h: DMatrix<f64>,
    /// Shape operator in chart coordinates, `A = g^{-1} h`.
    pub shape_operator: DMatrix<f64>,
    pub tr_a: f64,
    /// tr(A^2); coordinate-invariant, nonnegative for the self-adjoint A.
    pub tr_a2: f64,
    /// Scalar curvature `S = -2(n-1) tr A`.
    pub scalar_curvature: f64,
    /// Mean curvature vector `H = tr(A) p - n q`.
    pub mean_curvature: AmbientVector,
    /// Column i holds the chart coordinates of the orthonormal frame
    /// vector e_i (Gram-Schmidt of the coordinate frame under g).
    pub onb: DMatrix<f64>,
    /// sqrt(det g), the volume density in chart coordinates.
    pub sqrt_det_g: f64,
}

impl PointFrame {
    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    /// Ambient image of a tangent vector given in chart coordinates.
    pub fn push_tangent(&self, v: &[f64]) -> AmbientVector {
        let mut out = AmbientVector::zeros(self.jet.value.dim());
        for (i, vi) in v.iter().enumerate() {
            out = out.axpy(*vi, &self.jet.d1[i]);
        }
        out
    }

    /// Ambient image of the i-th orthonormal frame vector.
    pub fn frame_vector(&self, i: usize) -> AmbientVector {
        let col: Vec<f64> = self.onb.column(i).iter().cloned().collect();
        self.push_tangent(&col)
    }

    /// Metric pairing of chart-coordinate tangent vectors.
    pub fn metric_pairing(&self, u: &[f64], v: &[f64]) -> f64 {
        let gu = &self.g * DVector::from_column_slice(u);
        DVector::from_column_slice(v).dot(&gu)
    }

    /// Projection of an ambient vector onto the normal plane, expanded in
    /// the dual pair {p, q}: `v_perp = <v,q> p + <v,p> q`.
    pub fn normal_projection(&self, v: &AmbientVector) -> AmbientVector {
        let vp = dot(v, &self.jet.value);
        let vq = dot(v, &self.q);
        self.jet.value.scale(vq).axpy(vp, &self.q)
    }
}

/// Residuals of the duality conditions for a candidate dual vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualityResiduals {
    pub pq_minus_one: f64,
    pub qq: f64,
    pub max_tangent: f64,
}

/// Serializable snapshot of a [`PointFrame`], the payload of the `frame`
/// CLI subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameReport {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub g_inv: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub shape_operator: Vec<Vec<f64>>,
    pub tr_a: f64,
    pub tr_a2: f64,
    pub scalar_curvature: f64,
    pub mean_curvature: Vec<f64>,
    pub onb: Vec<Vec<f64>>,
    pub sqrt_det_g: f64,
    pub residuals: DualityResiduals,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl From<&PointFrame> for FrameReport {
    fn from(f: &PointFrame) -> Self {
        Self {
            x: f.x.clone(),
            p: f.jet.value.as_slice().to_vec(),
            q: f.q.as_slice().to_vec(),
            g: matrix_rows(&f.g),
            g_inv: matrix_rows(&f.g_inv),
            h: matrix_rows(&f.h),
            shape_operator: matrix_rows(&f.shape_operator),
            tr_a: f.tr_a,
            tr_a2: f.tr_a2,
            scalar_curvature: f.scalar_curvature,
            mean_curvature: f.mean_curvature.as_slice().to_vec(),
            onb: matrix_rows(&f.onb),
            sqrt_det_g: f.sqrt_det_g,
            residuals: duality_residuals(&f.jet, &f.q),
        }
    }
}

pub fn duality_residuals(jet: &Jet2, q: &AmbientVector) -> DualityResiduals {
    let pq_minus_one = (dot(&jet.value, q) - 1.0).abs();
    let qq = dot(q, q).abs();
    let max_tangent = jet
        .d1
        .iter()
        .map(|t| dot(t, q).abs())
        .fold(0.0f64, f64::max);
    DualityResiduals {
        pq_minus_one,
        qq,
        max_tangent,
    }
}

/// The dual map: the unique `q` with `<p,q> = 1`, `<d_i p, q> = 0`,
/// `<q,q> = 0`.
///
/// Closed form from a normal completion `w` with `<p,w> != 0`:
/// `q = a p + b w`, `b = 1/<p,w>`, `a = -<w,w> / (2 <p,w>^2)`. The
/// normalization `<p,q> = 1` pins sign and scale.
pub fn dual_map(jet: &Jet2, tol: &Tolerances) -> Result<AmbientVector> {
    let p = &jet.value;
    let basis = normal_plane(&jet.d1, p, tol.normal_residual_tol)?;
    let w = &basis.v2;
    let pw = dot(p, w);
    if pw.abs() < tol.dual_pivot_tol {
        return Err(Error::DualUndefined {
            tol: tol.dual_pivot_tol,
        });
    }
    let b = 1.0 / pw;
    let a = -dot(w, w) * b * b / 2.0;
    Ok(p.scale(a).axpy(b, w))
}

/// Assembles the full [`PointFrame`] at `x`.
pub fn build_frame(chart: &ImmersionChart, x: &[f64], tol: &Tolerances) -> Result<PointFrame> {
    let jet = chart.eval_jet2(x)?;
    let n = jet.n();
    let g = jet.metric();

    let chol = g.clone().cholesky().ok_or_else(|| {
        let eig = g.clone().symmetric_eigen();
        Error::SpacelikeViolation {
            at: x.to_vec(),
            min_eigenvalue: eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    })?;
    let sqrt_det_g: f64 = (0..n).map(|i| chol.l()[(i, i)]).product();
    let g_inv = chol.inverse();

    let q = dual_map(&jet, tol)?;
    let res = duality_residuals(&jet, &q);
    if res.pq_minus_one > tol.dual_tol || res.qq > tol.dual_tol || res.max_tangent > tol.dual_tol {
        return Err(Error::DualDegenerate {
            at: x.to_vec(),
            reason: format!(
                "duality residuals exceed tolerance: |<p,q>-1|={:.3e}, |<q,q>|={:.3e}, max|<dp,q>|={:.3e}",
                res.pq_minus_one, res.qq, res.max_tangent
            ),
        });
    }

    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(jet.d2(i, j), &q);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    let shape_operator = &g_inv * &h;
    let tr_a = shape_operator.trace();
    let tr_a2 = (&shape_operator * &shape_operator).trace();
    let scalar_curvature = -2.0 * (n as f64 - 1.0) * tr_a;
    let mean_curvature = jet.value.scale(tr_a).axpy(-(n as f64), &q);

    // Gram-Schmidt of the coordinate frame under g, positive diagonal.
    let mut onb = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let mut v = DVector::<f64>::zeros(n);
        v[i] = 1.0;
        for j in 0..i {
            let ej = onb.column(j).clone_owned();
            let coeff = (&g * &ej).dot(&v);
            v -= ej * coeff;
        }
        let norm = ((&g * &v).dot(&v)).sqrt();
        v /= norm;
        onb.set_column(i, &v);
    }

    Ok(PointFrame {
        x: x.to_vec(),
        jet,
        g,
        g_inv,
        q,
        h,
        shape_operator,
        tr_a,
        tr_a2,
        scalar_curvature,
        mean_curvature,
        onb,
        sqrt_det_g,
    })
}

/// Second fundamental form `II(X,Y) = <AX,Y> p - <X,Y> q` for tangent
/// vectors in chart coordinates.
pub fn second_fundamental_form(frame: &PointFrame, x_vec: &[f64], y_vec: &[f64]) -> AmbientVector {
    let xv = DVector::from_column_slice(x_vec);
    let yv = DVector::from_column_slice(y_vec);
    let axy = (&frame.h * &yv).dot(&xv); // <AX,Y> = X^T h Y since gA = h
    let gxy = (&frame.g * &yv).dot(&xv);
    frame.jet.value.scale(axy).axpy(-gxy, &frame.q)
}

/// Normal projection of `sum X^i Y^j d_i d_j p`; the independent route to
/// the second fundamental form, straight from raw second derivatives.
pub fn second_fundamental_form_raw(frame: &PointFrame, x_vec: &[f64], y_vec: &[f64]) -> AmbientVector {
    let n = frame.n();
    let mut dd = AmbientVector::zeros(frame.jet.value.dim());
    for i in 0..n {
        for j in 0..n {
            dd = dd.axpy(x_vec[i] * y_vec[j], frame.jet.d2(i, j));
        }
    }
    frame.normal_projection(&dd)
}

/// Finite-difference directional derivative of the dual map along the
/// tangent coordinate vector `V`.
///
/// For valid charts the result is tangent and equals `-A V` pushed to the
/// ambient space, certifying both the parallelism of {p,q} in the normal
/// bundle and the derivative expansion used by the variational formulas.
pub fn dual_derivative(
    chart: &ImmersionChart,
    x: &[f64],
    v: &[f64],
    tol: &Tolerances,
) -> Result<AmbientVector> {
    let vmax = v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if vmax == 0.0 {
        return Ok(AmbientVector::zeros(chart.ambient_dim()));
    }
    let h = tol.fd_dual_step * chart.domain_scale() / vmax;
    let qfun = |y: &[f64]| -> Result<AmbientVector> { dual_map(&chart.eval_jet2(y)?, tol) };
    // 4th-order central stencil along the ray x + s v.
    let mut acc: Option<AmbientVector> = None;
    for (off, w) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
        let y: Vec<f64> = x
            .iter()
            .zip(v)
            .map(|(xi, vi)| xi + off * h * vi)
            .collect();
        let qv = qfun(&y)?;
        acc = Some(match acc {
            None => qv.scale(w),
            Some(a) => a.axpy(w, &qv),
        });
    }
    Ok(acc.unwrap().scale(1.0 / (12.0 * h)))
}

/// One Gauss-equation spot check: `<R(X,Y)Z, W>` intrinsically vs. the
/// shape-operator expansion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiemannSample {
    pub x_vec: Vec<f64>,
    pub y_vec: Vec<f64>,
    pub z_vec: Vec<f64>,
    pub w_vec: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

/// Output of the intrinsic curvature oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntrinsicCurvatureReport {
    pub s_intrinsic: f64,
    pub s_extrinsic: f64,
    pub gauss_residual: f64,
    pub riemann_samples: Vec<RiemannSample>,
    pub conditioning_warning: bool,
}

impl IntrinsicCurvatureReport {
    pub fn max_sample_residual(&self) -> f64 {
        self.riemann_samples
            .iter()
            .map(|s| (s.lhs - s.rhs).abs())
            .fold(0.0, f64::max)
    }
}

/// Recomputes the scalar curvature intrinsically: Christoffel symbols from
/// finite differences of the induced metric, the Riemann tensor from those,
/// then the double trace over an orthonormal frame. Entirely independent of
/// the dual map, so it cross-checks `S = -2(n-1) tr A` and the Gauss
/// equation on random tangent quadruples.
pub fn intrinsic_oracle(
    chart: &ImmersionChart,
    x: &[f64],
    tol: &Tolerances,
) -> Result<IntrinsicCurvatureReport> {
    intrinsic_oracle_with(chart, x, tol, 8, 0x5eed_cafe)
}

pub fn intrinsic_oracle_with(
    chart: &ImmersionChart,
    x: &[f64],
    tol: &Tolerances,
    samples: usize,
    seed: u64,
) -> Result<IntrinsicCurvatureReport> {
    let n = chart.n();
    let h = tol.fd_metric_step * chart.domain_scale();
    let metric_at = |y: &[f64]| -> Result<DMatrix<f64>> { Ok(chart.eval_jet2(y)?.metric()) };

    let g0 = metric_at(x)?;
    let eig = g0.clone().symmetric_eigen();
    let (mut emin, mut emax) = (f64::INFINITY, 0.0f64);
    for e in eig.eigenvalues.iter() {
        emin = emin.min(*e);
        emax = emax.max(e.abs());
    }
    if !(emin > tol.pd_tol) {
        return Err(Error::SpacelikeViolation {
            at: x.to_vec(),
            min_eigenvalue: emin,
        });
    }
    let conditioning_warning = emax / emin > tol.metric_cond_warn;
    let g_inv = g0
        .clone()
        .try_inverse()
        .expect("positive-definite metric must invert");

    // First and second partials of g by 4th-order central differences.
    let shift2 = |a: usize, da: f64, b: usize, db: f64| -> Vec<f64> {
        let mut y = x.to_vec();
        y[a] += da;
        y[b] += db;
        y
    };
    let mut dg = vec![DMatrix::<f64>::zeros(n, n); n];
    for (k, slot) in dg.iter_mut().enumerate() {
        let mut acc = DMatrix::<f64>::zeros(n, n);
        for (off, w) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
            acc += metric_at(&shift2(k, off * h, k, 0.0))? * w;
        }
        *slot = acc / (12.0 * h);
    }
    let mut d2g = vec![vec![DMatrix::<f64>::zeros(n, n); n]; n];
    for k in 0..n {
        for l in k..n {
            let m = if k == l {
                let mut acc = g0.clone() * (-30.0);
                for (off, w) in [(-2.0, -1.0), (-1.0, 16.0), (1.0, 16.0), (2.0, -1.0)] {
                    acc += metric_at(&shift2(k, off * h, k, 0.0))? * w;
                }
                acc / (12.0 * h * h)
            } else {
                let offs = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
                let mut acc = DMatrix::<f64>::zeros(n, n);
                for (oa, wa) in offs {
                    for (ob, wb) in offs {
                        acc += metric_at(&shift2(k, oa * h, l, ob * h))? * (wa * wb);
                    }
                }
                acc / (144.0 * h * h)
            };
            d2g[k][l] = m.clone();
            d2g[l][k] = m;
        }
    }

    // Christoffel symbols and their derivatives.
    let gamma = christoffel(&g_inv, &dg, n);
    let mut dgamma = vec![vec![DMatrix::<f64>::zeros(n, n); n]; n]; // [m][k](i,j)
    for m in 0..n {
        // d_m g^{-1} = -g^{-1} (d_m g) g^{-1}
        let dginv = -(&g_inv * &dg[m] * &g_inv);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut terms = Vec::with_capacity(2 * n);
                    for l in 0..n {
                        let bracket = dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)];
                        let dbracket =
                            d2g[m][i][(j, l)] + d2g[m][j][(i, l)] - d2g[m][l][(i, j)];
                        terms.push(0.5 * dginv[(k, l)] * bracket);
                        terms.push(0.5 * g_inv[(k, l)] * dbracket);
                    }
                    dgamma[m][k][(i, j)] = pairwise_sum(&terms);
                }
            }
        }
    }

    // R(d_a, d_b) d_c = Rcoef^d_{c,ab} d_d.
    let rcoef = |d: usize, c: usize, a: usize, b: usize| -> f64 {
        let mut terms = vec![dgamma[a][d][(b, c)], -dgamma[b][d][(a, c)]];
        for m in 0..n {
            terms.push(gamma[d][(a, m)] * gamma[m][(b, c)]);
            terms.push(-gamma[d][(b, m)] * gamma[m][(a, c)]);
        }
        pairwise_sum(&terms)
    };
    let riemann_action = |u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>| -> DVector<f64> {
        let mut out = DVector::<f64>::zeros(n);
        for d in 0..n {
            let mut terms = Vec::with_capacity(n * n * n);
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        terms.push(rcoef(d, c, a, b) * u[a] * v[b] * w[c]);
                    }
                }
            }
            out[d] = pairwise_sum(&terms);
        }
        out
    };

    let frame = build_frame(chart, x, tol)?;
    let mut s_terms = Vec::with_capacity(n * n);
    for i in 0..n {
        let ei = frame.onb.column(i).clone_owned();
        for j in 0..n {
            let ej = frame.onb.column(j).clone_owned();
            let r = riemann_action(&ei, &ej, &ej);
            s_terms.push((&g0 * &r).dot(&ei));
        }
    }
    let s_intrinsic = pairwise_sum(&s_terms);
    let s_extrinsic = frame.scalar_curvature;

    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut riemann_samples = Vec::with_capacity(samples);
    for _ in 0..samples {
        let rand_vec = |rng: &mut rand::rngs::StdRng| {
            DVector::<f64>::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
        };
        let (xv, yv, zv, wv) = (
            rand_vec(&mut rng),
            rand_vec(&mut rng),
            rand_vec(&mut rng),
            rand_vec(&mut rng),
        );
        let lhs = (&g0 * riemann_action(&xv, &yv, &zv)).dot(&wv);
        let pair = |u: &DVector<f64>, v: &DVector<f64>| (&g0 * v).dot(u);
        let av = |v: &DVector<f64>| &frame.shape_operator * v;
        let rhs = -pair(&xv, &wv) * pair(&av(&yv), &zv) - pair(&av(&xv), &wv) * pair(&yv, &zv)
            + pair(&yv, &wv) * pair(&av(&xv), &zv)
            + pair(&av(&yv), &wv) * pair(&xv, &zv);
        riemann_samples.push(RiemannSample {
            x_vec: xv.as_slice().to_vec(),
            y_vec: yv.as_slice().to_vec(),
            z_vec: zv.as_slice().to_vec(),
            w_vec: wv.as_slice().to_vec(),
            lhs,
            rhs,
        });
    }

    Ok(IntrinsicCurvatureReport {
        s_intrinsic,
        s_extrinsic,
        gauss_residual: (s_intrinsic - s_extrinsic).abs(),
        riemann_samples,
        conditioning_warning,
    })
}

fn christoffel(g_inv: &DMatrix<f64>, dg: &[DMatrix<f64>], n: usize) -> Vec<DMatrix<f64>> {
    let mut gamma = vec![DMatrix::<f64>::zeros(n, n); n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let terms: Vec<f64> = (0..n)
                    .map(|l| {
                        0.5 * g_inv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])
                    })
                    .collect();
                gamma[k][(i, j)] = pairwise_sum(&terms);
            }
        }
    }
    gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::ImmersionChart;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn close(a: f64, b: f64, eps: f64) -> bool {
        (a - b).abs() <= eps
    }

    #[test]
    fn dual_of_euclidean_is_constant() {
        let chart = ImmersionChart::builtin("euclidean", 2).unwrap();
        for x in [[0.0, 0.0], [0.3, 0.9], [1.0, 0.2]] {
            let q = dual_map(&chart.eval_jet2(&x).unwrap(), &tol()).unwrap();
            for (got, want) in q.as_slice().iter().zip([-1.0, -1.0, 0.0, 0.0]) {
                assert!(close(*got, want, 1e-12), "q = {:?}", q.as_slice());
            }
        }
    }

    #[test]
    fn dual_of_hs_product_halves() {
        let chart = ImmersionChart::builtin("hs_product", 1).unwrap();
        let q = dual_map(&chart.eval_jet2(&[0.0, 0.0]).unwrap(), &tol()).unwrap();
        for (got, want) in q.as_slice().iter().zip([-0.5, 0.0, 0.5, 0.0]) {
            assert!(close(*got, want, 1e-12), "q = {:?}", q.as_slice());
        }
    }

    #[test]
    fn euclidean_frame_is_totally_geodesic_in_a() {
        let chart = ImmersionChart::builtin("euclidean", 2).unwrap();
        let f = build_frame(&chart, &[0.4, 0.7], &tol()).unwrap();
        assert!(f.shape_operator.norm() < 1e-12);
        assert!(f.scalar_curvature.abs() < 1e-12);
        for (got, want) in f.mean_curvature.as_slice().iter().zip([2.0, 2.0, 0.0, 0.0]) {
            assert!(close(*got, want, 1e-12));
        }
    }

    #[test]
    fn hs_product_frame_values() {
        let chart = ImmersionChart::builtin("hs_product", 1).unwrap();
        let f = build_frame(&chart, &[0.0, 0.0], &tol()).unwrap();
        assert!(close(f.shape_operator[(0, 0)], 0.5, 1e-12));
        assert!(close(f.shape_operator[(1, 1)], -0.5, 1e-12));
        assert!(f.shape_operator[(0, 1)].abs() < 1e-12);
        assert!(f.tr_a.abs() < 1e-12);
        assert!(close(f.tr_a2, 0.5, 1e-12));
        assert!(f.scalar_curvature.abs() < 1e-12);
    }

    #[test]
    fn round_sphere_frame_values() {
        let chart = ImmersionChart::builtin("round_sphere", 2).unwrap();
        let c = chart.box_center();
        let f = build_frame(&chart, &c, &tol()).unwrap();
        let half_id = DMatrix::<f64>::identity(2, 2) * (-0.5);
        assert!((f.shape_operator.clone() - half_id).norm() < 1e-12);
        assert!(close(f.tr_a, -1.0, 1e-12));
        assert!(close(f.scalar_curvature, 2.0, 1e-12));
    }

    #[test]
    fn onb_orthonormal_under_g() {
        let chart = ImmersionChart::builtin("round_sphere", 2).unwrap();
        let f = build_frame(&chart, &[1.2, 1.9], &tol()).unwrap();
        let gram = f.onb.transpose() * &f.g * &f.onb;
        assert!((gram - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn second_fundamental_form_euclidean() {
        let chart = ImmersionChart::builtin("euclidean", 2).unwrap();
        let f = build_frame(&chart, &[0.0, 0.0], &tol()).unwrap();
        let ii = second_fundamental_form(&f, &[1.0, 0.0], &[1.0, 0.0]);
        for (got, want) in ii.as_slice().iter().zip([1.0, 1.0, 0.0, 0.0]) {
            assert!(close(*got, want, 1e-12));
        }
        let zero = second_fundamental_form(&f, &[0.0, 0.0], &[1.0, 0.0]);
        assert!(zero.euclidean_norm() < 1e-15);
    }

    #[test]
    fn second_fundamental_form_matches_raw_projection() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let chart = ImmersionChart::builtin("hs_product", 1).unwrap();
        let f = build_frame(&chart, &[0.42, 0.13], &tol()).unwrap();
        for _ in 0..20 {
            let xv = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let yv = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let a = second_fundamental_form(&f, &xv, &yv);
            let b = second_fundamental_form_raw(&f, &xv, &yv);
            let c = second_fundamental_form(&f, &yv, &xv);
            assert!(a.sub(&b).euclidean_norm() < 1e-10);
            assert!(a.sub(&c).euclidean_norm() < 1e-12);
        }
    }

    #[test]
    fn dual_derivative_examples() {
        let t = tol();
        let eu = ImmersionChart::builtin("euclidean", 2).unwrap();
        let d = dual_derivative(&eu, &[0.5, 0.5], &[1.0, -0.3], &t).unwrap();
        assert!(d.euclidean_norm() < 1e-9, "constant dual must have zero derivative");

        let hs = ImmersionChart::builtin("hs_product", 1).unwrap();
        let d = dual_derivative(&hs, &[0.0, 0.0], &[1.0, 0.0], &t).unwrap();
        for (got, want) in d.as_slice().iter().zip([0.0, -0.5, 0.0, 0.0]) {
            assert!(close(*got, want, 1e-9), "dq = {:?}", d.as_slice());
        }

        // Round sphere: dq along V equals dp/2 along V.
        let rs = ImmersionChart::builtin("round_sphere", 2).unwrap();
        let x = rs.box_center();
        let v = [0.7, -0.4];
        let dq = dual_derivative(&rs, &x, &v, &t).unwrap();
        let f = build_frame(&rs, &x, &t).unwrap();
        let dp = f.push_tangent(&v);
        assert!(dq.sub(&dp.scale(0.5)).euclidean_norm() < 1e-8);
    }

    #[test]
    fn dual_derivative_is_minus_a_v() {
        use rand::{Rng, SeedableRng};
        let t = tol();
        let mut rng = rand::rngs::StdRng::seed_from_u64(23);
        for (name, k) in [("hs_product", 1), ("round_sphere", 2)] {
            let chart = ImmersionChart::builtin(name, k).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = chart
                    .domain()
                    .iter()
                    .map(|(a, b)| a + (b - a) * rng.gen_range(0.1..0.9))
                    .collect();
                let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                let dq = dual_derivative(&chart, &x, &v, &t).unwrap();
                let f = build_frame(&chart, &x, &t).unwrap();
                let av = &f.shape_operator * DVector::from_column_slice(&v);
                let av_amb = f.push_tangent(av.as_slice());
                assert!(
                    dq.add(&av_amb).euclidean_norm() < 1e-6,
                    "{name}: |dq + AV| = {}",
                    dq.add(&av_amb).euclidean_norm()
                );
            }
        }
    }

    #[test]
    fn intrinsic_oracle_flat_cases() {
        let t = tol();
        let eu = ImmersionChart::builtin("euclidean", 2).unwrap();
        let rep = intrinsic_oracle(&eu, &[0.5, 0.5], &t).unwrap();
        assert!(rep.s_intrinsic.abs() < 1e-6);
        assert!(rep.gauss_residual < 1e-6);
        assert!(rep.max_sample_residual() < 1e-6);

        let hs = ImmersionChart::builtin("hs_product", 1).unwrap();
        let rep = intrinsic_oracle(&hs, &[0.5, 0.5], &t).unwrap();
        assert!(rep.s_intrinsic.abs() < 1e-6);
        assert!(rep.gauss_residual < 1e-5);
    }

    #[test]
    fn intrinsic_oracle_round_sphere() {
        let t = tol();
        let rs = ImmersionChart::builtin("round_sphere", 2).unwrap();
        let rep = intrinsic_oracle(&rs, &[1.3, 1.8], &t).unwrap();
        assert!(close(rep.s_intrinsic, 2.0, 1e-5), "S = {}", rep.s_intrinsic);
        assert!(rep.gauss_residual < 1e-5);
        assert!(rep.max_sample_residual() < 1e-5);
    }

    #[test]
    fn mean_curvature_matches_trace_of_ii() {
        let t = tol();
        for (name, k) in [("euclidean", 2), ("hs_product", 1), ("round_sphere", 2)] {
            let chart = ImmersionChart::builtin(name, k).unwrap();
            let x = chart.box_center();
            let f = build_frame(&chart, &x, &t).unwrap();
            let mut h_sum = AmbientVector::zeros(chart.ambient_dim());
            for i in 0..f.n() {
                let ei: Vec<f64> = f.onb.column(i).iter().cloned().collect();
                h_sum = h_sum.add(&second_fundamental_form_raw(&f, &ei, &ei));
            }
            assert!(
                h_sum.sub(&f.mean_curvature).euclidean_norm() < 1e-7,
                "{name}: H mismatch {}",
                h_sum.sub(&f.mean_curvature).euclidean_norm()
            );
        }
    }
}
