//! Smooth approximate boundary-distance fields for convex polytopes.
//!
//! A polytope is normalized to unit diameter, lifted into one extra dimension,
//! and covered by layered Macbeath ellipsoids. The top ellipsoids project to
//! patches that carry a facet hyperplane each; a mollifier partition of unity
//! blends the per-patch linear distances into a smooth field.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

pub mod baseline;
pub mod blend;
pub mod config;
pub mod cover;
pub mod error;
pub mod hrep;
pub mod lemmas;
pub mod lifted;
pub mod macbeath;
pub mod polytope;
pub mod sampling;
pub mod shapes;
pub mod spatial;
pub mod verify;

pub use blend::{eval, eval_gradient, eval_hessian_fd, BlendResult, Patch};
pub use config::{BuildConfig, Tolerances};
pub use cover::{build, build_dag, DagNode, DagStructure, DelonePoint};
pub use error::{Error, Result};
pub use lifted::LiftedBody;
pub use macbeath::{Ellipsoid, MacbeathRegion};
pub use polytope::{Halfspace, NormalizationTransform, Polytope, PolytopeFile};
