//! Exact and simulated second moments of the face contents of typical faces
//! in stationary Poisson hyperplane tessellations.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: halfspace intersection, face enumeration, face contents
//!   and parallelepiped volumes for small convex polytopes.
//! * [`zonoid`]: directional distributions, their associated zonotopes,
//!   projections, intrinsic volumes, polar bodies and volume products.
//! * [`oracle`]: closed-form moment formulas (general discrete directions,
//!   isotropic, quasi-isotropic cuboid), variance bounds and the stability
//!   functional.
//! * [`simulator`]: Monte Carlo estimators built on the zero cell of a
//!   sampled hyperplane process, plus the per-realization counting identity
//!   for the faces through the origin.
//! * [`validation`]: the invariant suite run by `hpm validate`.
//!
//! Data-parallel loops (tuple sums in the oracle, replicates in the
//! simulator) run on rayon when the `parallel` feature is enabled and fall
//! back to plain iteration otherwise. Results are reduced in index order, so
//! both modes give bit-identical output.

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod par;
pub mod simulator;
pub mod special;
pub mod validation;
pub mod zonoid;

pub use error::{GeometryError, OracleError, SimulationError, ZonoidError};
pub use geometry::{Halfspace, Hyperplane, Intersection, Tolerances, VPolytope};
pub use oracle::{BoundsReport, MomentTable};
pub use par::ExecutionMode;
pub use simulator::{EstimateSummary, ProcessSample};
pub use zonoid::{DirectionalDistribution, PolarBody, Zonotope};
