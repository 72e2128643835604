//! Splitting maps: how the mass of a point is distributed across the `k`
//! rays of a spherical tree.
//!
//! The feature `beta` measures, for each ray, the arc from the point to
//! the ray along the latitude circle at the point's height over the root
//! axis; it vanishes at both poles `±x` and is invariant under orthogonal
//! maps because it only reads dot products. The splitting map `alpha` is a
//! row-wise softmax of `ζ·beta`, so every row lies on the standard simplex.

use crate::error::{Error, Result};
use crate::sphere::{dot, DiscreteMeasure, UnitVector, EPS_POLE};
use crate::tree::SphericalTree;

/// Per-support simplex rows: an `n × k` matrix, each row summing to one.
#[derive(Clone, Debug)]
pub struct SplitWeights {
    values: Vec<f64>,
    n: usize,
    k: usize,
}

impl SplitWeights {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Row `j`: the simplex weights of support `j` over the `k` rays.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.k..(j + 1) * self.k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Writes `beta(point, tree)` for a raw coordinate row into `out`
/// (length `k`). `dirs` is the flattened `k × (d+1)` direction block.
pub(crate) fn beta_raw(root: &[f64], dirs: &[f64], point: &[f64], out: &mut [f64]) {
    let ambient = root.len();
    let s = dot(root, point);
    let rho_sq = 1.0 - s * s;
    if rho_sq < EPS_POLE * EPS_POLE {
        out.fill(0.0);
        return;
    }
    let rho = rho_sq.sqrt();
    for (i, o) in out.iter_mut().enumerate() {
        let g = dot(&dirs[i * ambient..(i + 1) * ambient], point);
        *o = (g / rho).clamp(-1.0, 1.0).acos() * rho;
    }
}

/// Row-wise stable softmax of `zeta * beta_row`, written in place.
pub(crate) fn softmax_scaled(row: &mut [f64], zeta: f64) {
    let mut max = f64::NEG_INFINITY;
    for v in row.iter_mut() {
        *v *= zeta;
        max = max.max(*v);
    }
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// The ray-distance feature `beta(point, tree) ∈ [0, π·√(1−⟨x,p⟩²)]^k`.
///
/// Returns the zero vector when `1 − ⟨x, p⟩²` is below `EPS_POLE²`, the
/// floating-point stand-in for the pole cases `p = ±x`.
pub fn beta(tree: &SphericalTree, point: &UnitVector) -> Result<Vec<f64>> {
    if tree.ambient_dim() != point.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: tree.ambient_dim(),
            got: point.ambient_dim(),
        });
    }
    let dirs = flat_directions(tree);
    let mut out = vec![0.0; tree.num_rays()];
    beta_raw(tree.root().coords(), &dirs, point.coords(), &mut out);
    Ok(out)
}

/// The splitting map `alpha = softmax(ζ·beta)` evaluated for every support
/// of `measure` in one batched pass.
pub fn alpha(tree: &SphericalTree, measure: &DiscreteMeasure, zeta: f64) -> Result<SplitWeights> {
    if tree.ambient_dim() != measure.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: tree.ambient_dim(),
            got: measure.ambient_dim(),
        });
    }
    let n = measure.n();
    let k = tree.num_rays();
    let dirs = flat_directions(tree);
    let root = tree.root().coords();
    let mut values = vec![0.0; n * k];
    for (j, support) in measure.supports().iter().enumerate() {
        let row = &mut values[j * k..(j + 1) * k];
        beta_raw(root, &dirs, support.coords(), row);
        softmax_scaled(row, zeta);
    }
    Ok(SplitWeights { values, n, k })
}

/// Flattened row-major `k × (d+1)` copy of the tree's directions.
pub(crate) fn flat_directions(tree: &SphericalTree) -> Vec<f64> {
    let mut dirs = Vec::with_capacity(tree.num_rays() * tree.ambient_dim());
    for y in tree.directions() {
        dirs.extend_from_slice(y.coords());
    }
    dirs
}
