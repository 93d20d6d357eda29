//! Signature-aware linear algebra over Minkowski space R^{n+2}_1.
//!
//! The ambient inner product is `<u,v> = -u_0 v_0 + sum_{k>=1} u_k v_k`
//! (index 0 timelike). Everything here is a pure function of its inputs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point or vector of R^{n+2}_1. Index 0 is the timelike coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AmbientVector {
    coords: Vec<f64>,
}

impl AmbientVector {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords)
    }

    pub fn from_dvector(v: &DVector<f64>) -> Self {
        Self {
            coords: v.as_slice().to_vec(),
        }
    }

    /// Euclidean norm of the raw coordinates (used for residual reporting,
    /// not for geometry).
    pub fn euclidean_norm(&self) -> f64 {
        pairwise_sum(&self.coords.iter().map(|c| c * c).collect::<Vec<_>>()).sqrt()
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            coords: self.coords.iter().map(|c| a * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// self + a * other, the workhorse of stencil combinations.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(s, o)| s + a * o)
                .collect(),
        }
    }
}

impl std::ops::Index<usize> for AmbientVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.coords[i]
    }
}

impl From<Vec<f64>> for AmbientVector {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// Pairwise (cascade) summation in a fixed order.
///
/// All reductions in the engine go through this so that reports are
/// reproducible run to run for a given input ordering.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut acc = 0.0;
        for x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Canonical Lorentzian inner product `-u_0 v_0 + sum_{k>=1} u_k v_k`.
pub fn inner(u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::Dimension {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    Ok(dot(u, v))
}

/// Same inner product with the dimension check relegated to a debug assert;
/// internal hot path for vectors that share a chart.
pub(crate) fn dot(u: &AmbientVector, v: &AmbientVector) -> f64 {
    debug_assert_eq!(u.dim(), v.dim());
    let terms: Vec<f64> = u
        .coords
        .iter()
        .zip(&v.coords)
        .enumerate()
        .map(|(k, (a, b))| if k == 0 { -a * b } else { a * b })
        .collect();
    pairwise_sum(&terms)
}

/// A basis of the 2-plane Lorentz-orthogonal to a spacelike tangent space.
///
/// `v1` is always the null position vector `p`; `v2` completes the plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalPlaneBasis {
    pub v1: AmbientVector,
    pub v2: AmbientVector,
    /// max |<v_k, t_i>| over both basis vectors and all tangents.
    pub tangent_residual: f64,
}

/// Computes a basis of the orthogonal complement of `span(tangents)` in
/// R^{n+2}_1, with `v1 = p`.
///
/// Lorentz-orthogonality `<v,t> = 0` is Euclidean orthogonality to `eta t`,
/// so the complement is extracted from a column-pivoted orthogonal
/// decomposition of the matrix `[eta t_1 ... eta t_n]` followed by a pivoted
/// completion, rather than Gram-Schmidt on the raw tangents.
pub fn normal_plane(
    tangents: &[AmbientVector],
    p: &AmbientVector,
    residual_tol: f64,
) -> Result<NormalPlaneBasis> {
    let n = tangents.len();
    let dim = p.dim();
    if dim != n + 2 {
        return Err(Error::Dimension {
            expected: n + 2,
            got: dim,
        });
    }
    for t in tangents {
        if t.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: t.dim(),
            });
        }
    }

    // Columns eta * t_i.
    let mut c = DMatrix::<f64>::zeros(dim, n);
    for (j, t) in tangents.iter().enumerate() {
        for i in 0..dim {
            let s = if i == 0 { -1.0 } else { 1.0 };
            c[(i, j)] = s * t[i];
        }
    }

    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let qr = c.clone().col_piv_qr();
    let r = qr.r();
    let rank = (0..n.min(dim))
        .take_while(|&k| r[(k, k)].abs() > 1e-12 * scale)
        .count();
    if rank < n {
        return Err(Error::DegenerateTangent { rank, needed: n });
    }
    let q1 = qr.q(); // dim x n, orthonormal span of the eta-tangents

    // Projector onto the complement, applied to pivoted standard basis vectors.
    let project = |v: &DVector<f64>| -> DVector<f64> {
        let coeffs = q1.transpose() * v;
        v - &q1 * coeffs
    };
    let mut residuals: Vec<(usize, f64)> = (0..dim)
        .map(|k| {
            let e = DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 });
            (k, project(&e).norm())
        })
        .collect();
    residuals.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));

    let e1 = DVector::from_fn(dim, |i, _| if i == residuals[0].0 { 1.0 } else { 0.0 });
    let u1 = {
        let w = project(&e1);
        let norm = w.norm();
        debug_assert!(norm > 0.0);
        w / norm
    };
    // Second completion direction, re-orthogonalized against the first.
    let mut u2 = DVector::<f64>::zeros(dim);
    let mut found = false;
    for &(k, _) in &residuals[1..] {
        let e = DVector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 });
        let mut w = project(&e);
        w -= &u1 * u1.dot(&w);
        if w.norm() > 1e-8 {
            u2 = w.normalize();
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::DegenerateTangent { rank: n, needed: n });
    }

    // Express the in-plane direction Euclidean-orthogonal to p; since p is
    // null in a Lorentzian 2-plane, this direction cannot be parallel to p.
    let pd = p.to_dvector();
    let a = u1.dot(&pd);
    let b = u2.dot(&pd);
    let w = &u1 * (-b) + &u2 * a;
    let wn = w.norm();
    let v2 = if wn > 1e-12 * pd.norm().max(1.0) {
        AmbientVector::from_dvector(&(w / wn))
    } else {
        // p barely inhabits the computed plane; fall back to the raw
        // completion so the residual diagnoses the precondition violation.
        AmbientVector::from_dvector(&u1)
    };

    let v1 = p.clone();
    let mut res: f64 = 0.0;
    for t in tangents {
        res = res.max(dot(&v1, t).abs()).max(dot(&v2, t).abs());
    }
    if res > residual_tol {
        return Err(Error::DegenerateTangent { rank: n, needed: n });
    }

    Ok(NormalPlaneBasis {
        v1,
        v2,
        tangent_residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn av(v: &[f64]) -> AmbientVector {
        AmbientVector::new(v.to_vec())
    }

    #[test]
    fn inner_timelike_basis() {
        let e0 = av(&[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(inner(&e0, &e0).unwrap(), -1.0);
    }

    #[test]
    fn inner_dual_pairing() {
        // p(0) of the flat example paired with its constant dual.
        let p = av(&[0.5, -0.5, 0.0, 0.0]);
        let q = av(&[-1.0, -1.0, 0.0, 0.0]);
        assert_eq!(inner(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let u = av(&[1.0, 0.0]);
        let v = av(&[1.0, 0.0, 0.0]);
        assert!(matches!(inner(&u, &v), Err(Error::Dimension { .. })));
    }

    #[test]
    fn inner_symmetry_random() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..100 {
            let u = av(&[next(), next(), next(), next()]);
            let v = av(&[next(), next(), next(), next()]);
            let a = inner(&u, &v).unwrap();
            let b = inner(&v, &u).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn normal_plane_euclidean_chart_origin() {
        // Flat chart at x = 0: tangents are the spatial axes 2, 3.
        let t1 = av(&[0.0, 0.0, 1.0, 0.0]);
        let t2 = av(&[0.0, 0.0, 0.0, 1.0]);
        let p = av(&[0.5, -0.5, 0.0, 0.0]);
        let basis = normal_plane(&[t1.clone(), t2.clone()], &p, 1e-10).unwrap();
        assert!(basis.tangent_residual < 1e-12);
        for t in [&t1, &t2] {
            assert!(dot(&basis.v1, t).abs() < 1e-12);
            assert!(dot(&basis.v2, t).abs() < 1e-12);
        }
        // v2 independent of p: the plane must contain a direction with
        // nonzero pairing against p.
        assert!(dot(&p, &basis.v2).abs() > 1e-8);
    }

    #[test]
    fn normal_plane_line_chart() {
        let t = av(&[0.0, 0.0, 1.0]);
        let p = av(&[1.0, 1.0, 0.0]);
        let basis = normal_plane(std::slice::from_ref(&t), &p, 1e-10).unwrap();
        assert_eq!(basis.v1, p);
        assert!(basis.tangent_residual < 1e-15);
        assert!(dot(&basis.v2, &t).abs() < 1e-15);
    }

    #[test]
    fn normal_plane_rank_deficient() {
        let t = av(&[0.0, 0.0, 1.0, 0.0]);
        let p = av(&[0.5, -0.5, 0.0, 0.0]);
        let got = normal_plane(&[t.clone(), t], &p, 1e-10);
        assert!(matches!(got, Err(Error::DegenerateTangent { .. })));
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin() * 1e-3).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }
}
