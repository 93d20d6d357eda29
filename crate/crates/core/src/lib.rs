//! Numerical engine for spacelike hypersurfaces in the light-cone of
//! Minkowski spacetime: dual maps, shape operators, curvatures, the volume
//! functional with its first and second variations, and the null-space
//! (extended ruled map) construction, each paired with independent
//! finite-difference and intrinsic-curvature oracles.

// Negated comparisons are deliberate NaN traps on the error paths.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the tensor formulas they implement.
#![allow(clippy::needless_range_loop)]

pub mod chart;
pub mod error;
pub mod frame;
pub mod functional;
pub mod lorentz;
pub mod nullspace;
pub mod tol;
pub mod verify;

pub use chart::{ChartConfig, ImmersionChart, Jet2, JetBackend};
pub use error::{Error, Result};
pub use frame::{IntrinsicCurvatureReport, PointFrame};
pub use functional::{FdEstimate, QuadratureGrid, VariationReport, VariationSpec};
pub use lorentz::{inner, normal_plane, pairwise_sum, AmbientVector, NormalPlaneBasis};
pub use nullspace::{NullVariation, RuledMapSample};
pub use tol::Tolerances;
