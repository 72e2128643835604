//! Spherical tree-sliced Wasserstein (STSW) distances on the hypersphere.
//!
//! A spherical tree is a root point `x` on the sphere together with `k`
//! great semicircles ("rays") leaving `x`, each isometric to `[0, π]` via
//! arc length. Probability measures on the sphere are pushed onto such a
//! tree by a splitting map that distributes the mass of every point across
//! the rays, and the 1-Wasserstein distance between the two projected
//! measures has a closed form (a sorted sweep over suffix mass sums).
//! Averaging that closed form over randomly sampled trees gives a Monte
//! Carlo estimate of the STSW distance, which is a rotation-invariant
//! metric on spherical measures.
//!
//! Module map:
//!
//! * [`sphere`] — unit vectors, discrete measures, geodesics, stereographic
//!   projection, uniform/von Mises-Fisher sampling, Haar orthogonal draws.
//! * [`tree`] — spherical trees, the tree metric, arc-length projection.
//! * [`split`] — the ray-distance feature `beta` and the softmax splitting
//!   map `alpha`.
//! * [`tw`] — the closed-form tree Wasserstein distance and an independent
//!   explicit-graph formulation of the same quantity.
//! * [`estimator`] — the seeded, parallel Monte Carlo estimator.
//! * [`oracle`] — exact LP/assignment transport solvers and a central
//!   finite-difference gradient, used to validate everything else.
//! * [`flow`] — analytic gradients of the fixed-tree estimator and
//!   projected gradient descent on the sphere.
//! * [`io`] — point-cloud CSV, tree JSON, trajectory CSV, run manifests.

pub mod error;
pub mod estimator;
pub mod flow;
pub mod io;
pub mod oracle;
pub mod sphere;
pub mod split;
pub mod tree;
pub mod tw;

pub use error::{Error, Result};
pub use estimator::{merge_measures, stsw, stsw_with_trees, StswConfig, StswResult};
pub use sphere::{DiscreteMeasure, OrthogonalTransform, UnitVector};
pub use tree::{SphericalTree, TreePoint};
