//! Spherical trees: a root `x ∈ S^d` plus `k` unit directions in the
//! hyperplane orthogonal to `x`. Ray `i` is the great semicircle from `x`
//! through direction `y_i`, isometric to `[0, π]` via `z ↦ arccos⟨x, z⟩`.
//! All rays share the point at coordinate 0 (the root).

use rand::Rng;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sphere::{
    dot, gaussian_vector, geodesic_distance, norm, stereographic_project, DiscreteMeasure,
    OrthogonalTransform, Projection, UnitVector,
};

/// Geodesic separation below which two directions count as duplicates.
const EPS_DISTINCT: f64 = 1e-9;

/// Rejection-sampling cap per direction before giving up.
const MAX_REDRAWS: usize = 100;

/// A spherical tree `T^x_{y_1..y_k}`.
#[derive(Clone, Debug)]
pub struct SphericalTree {
    root: UnitVector,
    directions: Vec<UnitVector>,
}

impl SphericalTree {
    /// Validates the tree invariants: every direction is a unit vector
    /// orthogonal to the root within `1e-10`, `k ≥ 1`, and no two
    /// directions are within geodesic `1e-9` of each other.
    pub fn new(root: UnitVector, directions: Vec<UnitVector>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidTree("k ≥ 1 directions required".into()));
        }
        for (i, y) in directions.iter().enumerate() {
            if y.ambient_dim() != root.ambient_dim() {
                return Err(Error::DimensionMismatch {
                    expected: root.ambient_dim(),
                    got: y.ambient_dim(),
                });
            }
            let d = root.dot(y).abs();
            if d > 1e-10 {
                return Err(Error::InvalidTree(format!(
                    "direction {i} not orthogonal to root (|⟨x,y⟩| = {d:e})"
                )));
            }
            for (j, other) in directions[..i].iter().enumerate() {
                if geodesic_distance(y, other)? < EPS_DISTINCT {
                    return Err(Error::InvalidTree(format!(
                        "directions {j} and {i} coincide"
                    )));
                }
            }
        }
        Ok(Self { root, directions })
    }

    pub fn root(&self) -> &UnitVector {
        &self.root
    }

    pub fn directions(&self) -> &[UnitVector] {
        &self.directions
    }

    /// Number of rays `k`.
    pub fn num_rays(&self) -> usize {
        self.directions.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.root.ambient_dim()
    }

    pub fn sphere_dim(&self) -> usize {
        self.root.sphere_dim()
    }

    /// The transformed tree `(g·x, g·y_1, …, g·y_k)`; orthogonal maps
    /// preserve all tree invariants.
    pub fn transformed(&self, g: &OrthogonalTransform) -> Result<SphericalTree> {
        let root = g.apply(&self.root)?;
        let directions = self
            .directions
            .iter()
            .map(|y| g.apply(y))
            .collect::<Result<Vec<_>>>()?;
        SphericalTree::new(root, directions)
    }
}

/// A point of the tree in ray/arc-length coordinates. All points with
/// `coord == 0` are identified with the root regardless of ray index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreePoint {
    pub ray: usize,
    pub coord: f64,
}

/// Samples a spherical tree: the root is a normalized Gaussian draw and
/// each direction is a normalized Gaussian draw pushed through the
/// stereographic projection at the root, then renormalized.
///
/// Draws that hit the pole (projection at infinity), project to a vector
/// of norm below `1e-9`, or duplicate an accepted direction are redrawn,
/// at most 100 times per direction.
pub fn sample_tree<R: Rng + ?Sized>(rng: &mut R, d: usize, k: usize) -> Result<SphericalTree> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidParameter(
            "tree sampling needs d ≥ 1 and k ≥ 1".into(),
        ));
    }
    let root = loop {
        if let Ok(v) = UnitVector::new(gaussian_vector(rng, d + 1)) {
            break v;
        }
    };
    let mut directions: Vec<UnitVector> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut attempts = 0;
        let dir = loop {
            if attempts >= MAX_REDRAWS {
                return Err(Error::DegenerateSampling { attempts });
            }
            attempts += 1;
            let raw = match UnitVector::new(gaussian_vector(rng, d + 1)) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let projected = match stereographic_project(&root, &raw)? {
                Projection::Point(p) => p,
                Projection::AtInfinity => continue,
            };
            if norm(&projected) < 1e-9 {
                continue;
            }
            let dir = UnitVector::new(projected)?;
            if directions
                .iter()
                .any(|y| geodesic_distance(y, &dir).unwrap_or(0.0) < EPS_DISTINCT)
            {
                continue;
            }
            break dir;
        };
        directions.push(dir);
    }
    SphericalTree::new(root, directions)
}

/// Tree metric: `|t − t'|` on a shared ray, `t + t'` across rays.
///
/// Both points must carry coordinates in `[0, π]`; points at coordinate 0
/// are the root, so their distance is 0 whatever the ray indices.
pub fn tree_metric(a: &TreePoint, b: &TreePoint) -> Result<f64> {
    for p in [a, b] {
        if !(0.0..=PI).contains(&p.coord) {
            return Err(Error::CoordOutOfRange { coord: p.coord });
        }
    }
    Ok(if a.ray == b.ray {
        (a.coord - b.coord).abs()
    } else {
        a.coord + b.coord
    })
}

/// Arc-length coordinates of the measure's supports on any ray of the
/// tree: `c_j = arccos⟨x, a_j⟩`.
pub fn project_coords(tree: &SphericalTree, measure: &DiscreteMeasure) -> Result<Vec<f64>> {
    if tree.ambient_dim() != measure.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: tree.ambient_dim(),
            got: measure.ambient_dim(),
        });
    }
    let root = tree.root().coords();
    Ok(measure
        .supports()
        .iter()
        .map(|a| dot(root, a.coords()).clamp(-1.0, 1.0).acos())
        .collect())
}
