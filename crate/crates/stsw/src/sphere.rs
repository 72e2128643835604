//! Geometry of the unit hypersphere `S^d ⊂ R^{d+1}`.
//!
//! Conventions: `d` always denotes the sphere dimension, so points carry
//! `d + 1` ambient coordinates. The geodesic distance between unit vectors
//! is `arccos⟨a, b⟩ ∈ [0, π]`.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Threshold on `1 − ⟨x, y⟩` below which `y` is treated as the projection
/// pole `x` itself (the stereographic projection divides by this quantity).
pub const EPS_POLE: f64 = 1e-9;

/// Norm below which a vector is considered unnormalizable.
const EPS_NORM: f64 = 1e-12;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// A point on `S^d`, stored as `d + 1` ambient coordinates with unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitVector {
    coords: Vec<f64>,
}

impl UnitVector {
    /// Normalizes `coords` onto the sphere. Fails on non-finite entries or
    /// a norm below `1e-12`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "unit vector needs at least one finite coordinate".into(),
            ));
        }
        let n = norm(&coords);
        if n < EPS_NORM {
            return Err(Error::ZeroVector { norm: n });
        }
        // Rows already unit within the invariant tolerance are kept
        // bit-exact; rescaling them would only churn the last ulp.
        if (n - 1.0).abs() <= 1e-12 {
            return Ok(Self { coords });
        }
        let coords = coords.into_iter().map(|c| c / n).collect();
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Ambient dimension `d + 1`.
    pub fn ambient_dim(&self) -> usize {
        self.coords.len()
    }

    /// Sphere dimension `d`.
    pub fn sphere_dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn dot(&self, other: &UnitVector) -> f64 {
        dot(&self.coords, &other.coords)
    }
}

/// A weighted point cloud on `S^d`: `n` unit supports with nonnegative
/// weights summing to one.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    supports: Vec<UnitVector>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates lengths, dimensions, nonnegativity, and that the weights
    /// sum to one within `1e-12`.
    pub fn new(supports: Vec<UnitVector>, weights: Vec<f64>) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::InvalidWeights("measure needs n ≥ 1 supports".into()));
        }
        if supports.len() != weights.len() {
            return Err(Error::InvalidWeights(format!(
                "{} supports but {} weights",
                supports.len(),
                weights.len()
            )));
        }
        let dim = supports[0].ambient_dim();
        for s in &supports {
            check_dim(dim, s.ambient_dim())?;
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights("weights must be finite and ≥ 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { supports, weights })
    }

    /// Uniform weights `1/n` over the given supports.
    pub fn uniform(supports: Vec<UnitVector>) -> Result<Self> {
        let n = supports.len();
        if n == 0 {
            return Err(Error::InvalidWeights("measure needs n ≥ 1 supports".into()));
        }
        let w = 1.0 / n as f64;
        // Compensate the rounding of n * (1/n) so the sum is exactly 1.
        let mut weights = vec![w; n];
        let correction = 1.0 - weights.iter().sum::<f64>();
        weights[0] += correction;
        Self::new(supports, weights)
    }

    pub fn n(&self) -> usize {
        self.supports.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.supports[0].ambient_dim()
    }

    pub fn sphere_dim(&self) -> usize {
        self.ambient_dim() - 1
    }

    pub fn supports(&self) -> &[UnitVector] {
        &self.supports
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row-major `n × (d+1)` copy of the support coordinates.
    pub(crate) fn flat_coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n() * self.ambient_dim());
        for s in &self.supports {
            out.extend_from_slice(s.coords());
        }
        out
    }
}

/// An element of `O(d+1)` stored as a row-major `(d+1) × (d+1)` matrix.
#[derive(Clone, Debug)]
pub struct OrthogonalTransform {
    matrix: Vec<f64>,
    dim: usize,
}

impl OrthogonalTransform {
    /// Validates `Q·Qᵀ = I` within `1e-10` entrywise.
    pub fn new(matrix: Vec<f64>, dim: usize) -> Result<Self> {
        if matrix.len() != dim * dim || dim == 0 {
            return Err(Error::InvalidParameter(format!(
                "orthogonal matrix needs {dim}×{dim} entries"
            )));
        }
        let mut max_err = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let mut acc = 0.0;
                for k in 0..dim {
                    acc += matrix[i * dim + k] * matrix[j * dim + k];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                max_err = max_err.max((acc - target).abs());
            }
        }
        if max_err > 1e-10 {
            return Err(Error::NotOrthogonal { max_err });
        }
        Ok(Self { matrix, dim })
    }

    /// Ambient dimension the matrix acts on (`d + 1`).
    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub(crate) fn apply_raw(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.matrix[i * self.dim..(i + 1) * self.dim], v);
        }
    }

    pub fn apply(&self, v: &UnitVector) -> Result<UnitVector> {
        check_dim(self.dim, v.ambient_dim())?;
        let mut out = vec![0.0; self.dim];
        self.apply_raw(v.coords(), &mut out);
        UnitVector::new(out)
    }

    pub fn apply_measure(&self, m: &DiscreteMeasure) -> Result<DiscreteMeasure> {
        let supports = m
            .supports()
            .iter()
            .map(|s| self.apply(s))
            .collect::<Result<Vec<_>>>()?;
        DiscreteMeasure::new(supports, m.weights().to_vec())
    }

    /// Determinant by Gaussian elimination with partial pivoting. For an
    /// orthogonal matrix this is ±1 up to rounding.
    pub fn determinant(&self) -> f64 {
        let n = self.dim;
        let mut a = self.matrix.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap();
            if a[pivot * n + col].abs() < 1e-300 {
                return 0.0;
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot * n + k);
                }
                det = -det;
            }
            det *= a[col * n + col];
            for row in col + 1..n {
                let f = a[row * n + col] / a[col * n + col];
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
            }
        }
        det
    }
}

/// Image of a point under the stereographic projection from pole `x`:
/// either a point of the hyperplane `H_x` or the point at infinity
/// (the pole maps to infinity).
#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    Point(Vec<f64>),
    AtInfinity,
}

/// Geodesic distance `arccos⟨a, b⟩ ∈ [0, π]`.
///
/// The dot product is clamped to `[−1, 1]` before `arccos`; floating-point
/// drift past ±1 would otherwise yield NaN.
pub fn geodesic_distance(a: &UnitVector, b: &UnitVector) -> Result<f64> {
    check_dim(a.ambient_dim(), b.ambient_dim())?;
    Ok(a.dot(b).clamp(-1.0, 1.0).acos())
}

/// Stereographic projection of `y` from pole `x` onto the hyperplane
/// through the origin orthogonal to `x`:
///
/// `φ_x(y) = (−⟨x,y⟩ / (1−⟨x,y⟩)) · x + (1 / (1−⟨x,y⟩)) · y`
///
/// Returns [`Projection::AtInfinity`] when `1 − ⟨x,y⟩ < 1e-9`.
pub fn stereographic_project(x: &UnitVector, y: &UnitVector) -> Result<Projection> {
    check_dim(x.ambient_dim(), y.ambient_dim())?;
    let s = x.dot(y);
    if 1.0 - s < EPS_POLE {
        return Ok(Projection::AtInfinity);
    }
    let denom = 1.0 - s;
    let cx = -s / denom;
    let cy = 1.0 / denom;
    let out = x
        .coords()
        .iter()
        .zip(y.coords())
        .map(|(xi, yi)| cx * xi + cy * yi)
        .collect();
    Ok(Projection::Point(out))
}

/// Draws a standard Gaussian vector in `R^{d+1}`.
pub(crate) fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, ambient: usize) -> Vec<f64> {
    (0..ambient).map(|_| rng.sample(StandardNormal)).collect()
}

/// I.i.d. uniform samples on `S^d` (Gaussian draws, renormalized).
pub fn sample_uniform_sphere<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    count: usize,
) -> Result<Vec<UnitVector>> {
    if d == 0 || count == 0 {
        return Err(Error::InvalidParameter(
            "uniform sampling needs d ≥ 1 and count ≥ 1".into(),
        ));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        // A Gaussian draw with norm < 1e-12 is astronomically unlikely but
        // would fail normalization; redraw.
        if let Ok(v) = UnitVector::new(gaussian_vector(rng, d + 1)) {
            out.push(v);
        }
    }
    Ok(out)
}

/// I.i.d. von Mises-Fisher samples with mean direction `mean` and
/// concentration `kappa ≥ 0` (`kappa = 0` is the uniform distribution).
///
/// Uses the tangent-normal decomposition with Ulrich/Wood rejection for the
/// cosine `w = ⟨mean, sample⟩`: the candidate `w = (1−(1+b)z)/(1−(1−b)z)`
/// with `z ~ Beta((m−1)/2, (m−1)/2)` is accepted when
/// `κw + (m−1)·ln(1−x₀w) − c ≥ ln u`, and the tangential part is uniform on
/// the unit sphere of the tangent space.
pub fn sample_vmf<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &UnitVector,
    kappa: f64,
    count: usize,
) -> Result<Vec<UnitVector>> {
    if !kappa.is_finite() || kappa < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "vMF concentration must be ≥ 0, got {kappa}"
        )));
    }
    if kappa == 0.0 {
        return sample_uniform_sphere(rng, mean.sphere_dim(), count);
    }
    let ambient = mean.ambient_dim(); // m = d + 1
    let m1 = (ambient - 1) as f64;
    let b = (-2.0 * kappa + (4.0 * kappa * kappa + m1 * m1).sqrt()) / m1;
    let x0 = (1.0 - b) / (1.0 + b);
    let c = kappa * x0 + m1 * (1.0 - x0 * x0).ln();
    let beta = Beta::new(m1 / 2.0, m1 / 2.0)
        .map_err(|e| Error::InvalidParameter(format!("beta sampler: {e}")))?;

    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w = loop {
            let z: f64 = beta.sample(rng);
            let u: f64 = rng.random();
            let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
            if kappa * w + m1 * (1.0 - x0 * w).ln() - c >= u.ln() {
                break w;
            }
        };
        // Uniform direction in the tangent space at `mean`.
        let mut v = gaussian_vector(rng, ambient);
        let proj = dot(&v, mean.coords());
        for (vi, mi) in v.iter_mut().zip(mean.coords()) {
            *vi -= proj * mi;
        }
        let vn = norm(&v);
        if vn < EPS_NORM {
            continue;
        }
        let radial = (1.0 - w * w).max(0.0).sqrt();
        let coords = mean
            .coords()
            .iter()
            .zip(&v)
            .map(|(mi, vi)| w * mi + radial * vi / vn)
            .collect();
        out.push(UnitVector::new(coords)?);
    }
    Ok(out)
}

/// Haar-distributed orthogonal matrix on `R^{d+1}` via Gram-Schmidt
/// orthonormalization of a Gaussian matrix.
///
/// Each column is orthogonalized against the previous ones (twice, for
/// numerical orthogonality) and normalized; the implicit `R` diagonal is
/// positive, which is exactly the sign convention that makes the factor
/// Haar-distributed.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Result<OrthogonalTransform> {
    if d == 0 {
        return Err(Error::InvalidParameter("d ≥ 1 required".into()));
    }
    let n = d + 1;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v = gaussian_vector(rng, n);
        for _ in 0..2 {
            for q in &cols {
                let p = dot(&v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
        }
        let vn = norm(&v);
        if vn < 1e-8 {
            continue; // numerically dependent draw, retry
        }
        for vi in &mut v {
            *vi /= vn;
        }
        cols.push(v);
    }
    // Columns of Q become rows^T: store row-major with Q[i][j] = cols[j][i].
    let mut matrix = vec![0.0; n * n];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            matrix[i * n + j] = col[i];
        }
    }
    OrthogonalTransform::new(matrix, n)
}
