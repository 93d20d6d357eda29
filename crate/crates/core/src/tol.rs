//! Numeric tolerances and step sizes, centralized so every report can echo
//! the exact configuration it ran under.

use serde::{Deserialize, Serialize};

/// Engine-wide tolerances and finite-difference step factors.
///
/// Step factors are relative to the chart's domain scale; tolerances are
/// absolute unless noted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tolerances {
    /// |<p,p>| bound for points claimed to lie in the light-cone.
    pub null_tol: f64,
    /// Smallest admissible eigenvalue of the induced metric.
    pub pd_tol: f64,
    /// Bound on duality residuals |<p,q>-1|, |<q,q>|, |<dp,q>|.
    pub dual_tol: f64,
    /// Smallest usable |<p,w>| when solving for the dual map.
    pub dual_pivot_tol: f64,
    /// Max |<v_k, dp_i>| accepted from a normal-plane basis.
    pub normal_residual_tol: f64,
    /// Bound for derivative identities such as |dq/dV + A V|.
    pub deriv_tol: f64,
    /// Bound on |S_intrinsic - S_extrinsic|.
    pub gauss_tol: f64,
    /// Max-node |S| gate for formulas asserted only when S == 0.
    pub s_flat_tol: f64,
    /// Residual bound for the degenerate direction of the null-space metric.
    pub kernel_tol: f64,
    /// Relative step for finite-difference jets of charts.
    pub fd_jet_step: f64,
    /// Relative step for finite differences of the induced metric
    /// (Christoffel / Riemann oracle).
    pub fd_metric_step: f64,
    /// Relative step for directional derivatives of the dual map.
    pub fd_dual_step: f64,
    /// Relative step (times the variation half-width) for d/dt stencils.
    pub fd_t_step: f64,
    /// Newton inversion: absolute residual target.
    pub newton_tol: f64,
    /// Newton inversion: iteration cap.
    pub newton_max_iter: usize,
    /// |t| cap inside which the ruled map is trusted to be an immersion.
    pub tubular_cap: f64,
    /// Condition-number threshold that flags an ill-conditioned metric.
    pub metric_cond_warn: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            null_tol: 1e-10,
            pd_tol: 1e-10,
            dual_tol: 1e-9,
            dual_pivot_tol: 1e-10,
            normal_residual_tol: 1e-10,
            deriv_tol: 1e-6,
            gauss_tol: 1e-5,
            s_flat_tol: 1e-6,
            kernel_tol: 1e-8,
            fd_jet_step: 1e-3,
            fd_metric_step: 1e-2,
            fd_dual_step: 1e-3,
            fd_t_step: 1e-2,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            tubular_cap: 1.0,
            metric_cond_warn: 1e8,
        }
    }
}
