//! Maximum-volume axis-aligned inscribed boxes in convex sets described by
//! linear and convex-quadratic inequalities, and maximum-area inscribed
//! rectangles (any orientation) in planar convex sets.
//!
//! The pieces:
//!
//! - [`convexset`]: inequality systems, polygons, and the geometric
//!   primitives (membership, support points, bounding boxes, diameter, area).
//! - [`barrier`]: a log-barrier path-following interior-point solver with
//!   damped Newton centering.
//! - [`mvair`]: the box models built on top of the barrier solver.
//! - [`mair2d`]: the fixed-direction rectangle solver and the direction sweep.
//! - [`geomcheck`]: validators for the structural optimality conditions.
//! - [`oracle`]: brute-force baselines used by tests.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod convexset;
pub mod error;
pub mod geomcheck;
pub mod mair2d;
pub mod mvair;
pub mod oracle;

pub use barrier::{BarrierProblem, Mu, SolverConfig, SolverReport, Termination};
pub use convexset::{BoxRegion, ConvexSet, Inequality, LinearIneq, Polygon2D, QuadraticIneq};
pub use error::{Error, Result};
pub use mair2d::{DirectionSample, Rectangle2D};
