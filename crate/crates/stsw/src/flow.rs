//! Gradient flows on the sphere: minimize the fixed-tree estimator value
//! with respect to the source support coordinates.
//!
//! The analytic gradient differentiates the closed-form sweep with the
//! sort permutation and the suffix-sum signs frozen at the forward pass (a
//! subgradient almost everywhere; ties contribute zero-length gaps and are
//! skipped). The chain rule covers the arc coordinate `c = arccos⟨x, a⟩`
//! and the softmax splitting rows; pole and clamp branches are treated as
//! locally constant.
//!
//! The update rule is plain projected gradient descent: a Euclidean step
//! on the ambient coordinates followed by renormalization of every support
//! onto the sphere.

use rayon::prelude::*;
use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimator::{merge_measures, mix_seed, sample_tree_set};
use crate::oracle::exact_w2_sphere;
use crate::sphere::{dot, sample_vmf, DiscreteMeasure, UnitVector, EPS_POLE};
use crate::split::{beta_raw, flat_directions, softmax_scaled};
use crate::tree::SphericalTree;

/// Floor for `1 − ⟨x,a⟩²` before inverse square roots in the gradient;
/// supports may pass arbitrarily close to tree roots during optimization.
const GRAD_RHO_FLOOR: f64 = 1e-12;

/// Configuration of one projected-gradient run.
#[derive(Clone, Debug)]
pub struct FlowConfig {
    /// Step size γ of the projected update.
    pub learning_rate: f64,
    /// Number of gradient updates.
    pub epochs: usize,
    /// Estimator settings (trees, rays, ζ, seed, threads).
    pub stsw: crate::estimator::StswConfig,
    /// Period of the expensive evaluations (exact W₂ and NLL); the initial
    /// and final states are always evaluated.
    pub eval_every: usize,
    /// Redraw the tree set every epoch (stochastic gradient over the tree
    /// distribution). With `false` the trajectory is fully deterministic
    /// given the seed.
    pub resample_trees: bool,
}

impl FlowConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidParameter(
                "learning rate must be finite and ≥ 0".into(),
            ));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidParameter("eval_every must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// A mixture of von Mises-Fisher components with equal weights and a
/// shared concentration.
#[derive(Clone, Debug)]
pub struct VmfMixture {
    means: Vec<UnitVector>,
    kappa: f64,
}

impl VmfMixture {
    pub fn new(means: Vec<UnitVector>, kappa: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidParameter("mixture needs ≥ 1 component".into()));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::InvalidParameter("κ must be finite and ≥ 0".into()));
        }
        let dim = means[0].ambient_dim();
        for m in &means {
            if m.ambient_dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.ambient_dim(),
                });
            }
        }
        Ok(Self { means, kappa })
    }

    pub fn means(&self) -> &[UnitVector] {
        &self.means
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Log of the mixture density at `x` (average of the component
    /// densities, each with the exact normalizer).
    pub fn log_density(&self, x: &UnitVector) -> Result<f64> {
        let p = x.ambient_dim() as f64;
        let log_c = vmf_log_normalizer(p, self.kappa)?;
        let mut max = f64::NEG_INFINITY;
        let terms: Vec<f64> = self
            .means
            .iter()
            .map(|m| {
                let t = self.kappa * m.dot(x);
                max = max.max(t);
                t
            })
            .collect();
        let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
        Ok(log_c + lse - (self.means.len() as f64).ln())
    }

    /// Negative log-likelihood `−Σ_j ln f(x_j)` of a point set.
    pub fn nll(&self, points: &[UnitVector]) -> Result<f64> {
        let mut total = 0.0;
        for x in points {
            total -= self.log_density(x)?;
        }
        Ok(total)
    }

    /// Stratified sampling: `count` points spread as evenly as possible
    /// over the components (remainders round-robin in component order).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<UnitVector>> {
        let m = self.means.len();
        let mut out = Vec::with_capacity(count);
        for (i, mean) in self.means.iter().enumerate() {
            let quota = count / m + usize::from(i < count % m);
            if quota > 0 {
                out.extend(sample_vmf(rng, mean, self.kappa, quota)?);
            }
        }
        Ok(out)
    }
}

/// The 12-component icosahedral vMF mixture: means are the cyclic
/// `(±1, ±φ, 0)` patterns with `φ = (1+√5)/2`, normalized to the unit
/// sphere, with concentration `κ = 50`.
pub fn target_12vmf() -> VmfMixture {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let raw: [[f64; 3]; 12] = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let means = raw
        .iter()
        .map(|c| UnitVector::new(c.to_vec()).expect("icosahedron vertex"))
        .collect();
    VmfMixture::new(means, 50.0).expect("static mixture")
}

/// Log of `I_ν(x)`, the modified Bessel function of the first kind, for
/// `ν ≥ 0` and `x ≥ 0`. Power series up to `x = 300`, large-argument
/// asymptotic expansion beyond; both regimes are stable in double
/// precision for the concentrations used here.
pub fn log_bessel_i(nu: f64, x: f64) -> Result<f64> {
    if !(nu >= 0.0 && x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "log I_ν needs ν ≥ 0 and x ≥ 0, got ν = {nu}, x = {x}"
        )));
    }
    if x == 0.0 {
        return Ok(if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if x <= 300.0 {
        // I_ν(x) = (x/2)^ν / Γ(ν+1) · Σ_m (x²/4)^m / (m! (ν+1)_m)
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let q = x * x / 4.0;
        for m in 1..10_000 {
            let m = m as f64;
            term *= q / (m * (nu + m));
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
        }
        Ok(nu * (x / 2.0).ln() - ln_gamma(nu + 1.0) + sum.ln())
    } else {
        // I_ν(x) ~ e^x / √(2πx) · [1 − (μ−1)/(8x) + (μ−1)(μ−9)/(2(8x)²) − …]
        let mu = 4.0 * nu * nu;
        let z = 8.0 * x;
        let series = 1.0 - (mu - 1.0) / z + (mu - 1.0) * (mu - 9.0) / (2.0 * z * z)
            - (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (6.0 * z * z * z);
        Ok(x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + series.ln())
    }
}

/// `ln Γ` by the Lanczos approximation (g = 7, 9 coefficients).
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `ln C_p(κ)` for the vMF density `C_p(κ)·exp(κ⟨μ, x⟩)` on the sphere in
/// `R^p`: `C_p(κ) = κ^{p/2−1} / ((2π)^{p/2} I_{p/2−1}(κ))`. For `κ = 0`
/// this degrades to the reciprocal surface area.
fn vmf_log_normalizer(p: f64, kappa: f64) -> Result<f64> {
    let half = p / 2.0;
    if kappa == 0.0 {
        // Reciprocal surface area 2π^{p/2}/Γ(p/2).
        return Ok(ln_gamma(half) - (2.0f64).ln() - half * std::f64::consts::PI.ln());
    }
    Ok((half - 1.0) * kappa.ln()
        - half * (2.0 * std::f64::consts::PI).ln()
        - log_bessel_i(half - 1.0, kappa)?)
}

/// Value and per-support ambient gradient of the fixed-tree estimator.
#[derive(Clone, Debug)]
pub struct StswGradient {
    /// Mean closed-form value over the trees.
    pub value: f64,
    /// One ambient gradient row per source support.
    pub grads: Vec<Vec<f64>>,
}

struct MergedProblem {
    pts: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    n_src: usize,
    ambient: usize,
}

fn merged_from(
    source_coords: &[f64],
    source_weights: &[f64],
    target: &DiscreteMeasure,
) -> Result<MergedProblem> {
    let ambient = target.ambient_dim();
    if source_coords.len() != source_weights.len() * ambient {
        return Err(Error::InvalidParameter(
            "source coordinate block does not match weights × ambient".into(),
        ));
    }
    let n_src = source_weights.len();
    let n = n_src + target.n();
    let mut pts = Vec::with_capacity(n * ambient);
    pts.extend_from_slice(source_coords);
    pts.extend_from_slice(&target.flat_coords());
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    u[..n_src].copy_from_slice(source_weights);
    v[n_src..].copy_from_slice(target.weights());
    Ok(MergedProblem {
        pts,
        u,
        v,
        n_src,
        ambient,
    })
}

/// Forward sweep, optionally with the frozen-sign backward pass.
/// `grad` (when present) accumulates `n_src × ambient` ambient gradients.
fn tree_value_grad(
    tree: &SphericalTree,
    prob: &MergedProblem,
    zeta: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let ambient = prob.ambient;
    let n = prob.u.len();
    let k = tree.num_rays();
    let root = tree.root().coords();
    let dirs = flat_directions(tree);

    let mut s = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut alpha = vec![0.0; n * k];
    for j in 0..n {
        let a = &prob.pts[j * ambient..(j + 1) * ambient];
        s[j] = dot(root, a);
        c[j] = s[j].clamp(-1.0, 1.0).acos();
        let row = &mut alpha[j * k..(j + 1) * k];
        beta_raw(root, &dirs, a, row);
        softmax_scaled(row, zeta);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| c[a].total_cmp(&c[b]));

    // Reverse sweep: suffix sums per ray, their signs, and the per-level
    // absolute sums B_p (B[p] = Σ_i |S_(p),i| at sorted position p).
    let mut acc = vec![0.0f64; k];
    let mut signs = vec![0i8; n * k];
    let mut b_level = vec![0.0f64; n + 1];
    let mut value = 0.0;
    for p in (0..n).rev() {
        let j = order[p];
        for (a, d) in acc.iter_mut().zip(&alpha[j * k..(j + 1) * k]) {
            *a += d * (prob.u[j] - prob.v[j]);
        }
        let mut abs_sum = 0.0;
        for (i, a) in acc.iter().enumerate() {
            signs[p * k + i] = if *a > 0.0 {
                1
            } else if *a < 0.0 {
                -1
            } else {
                0
            };
            abs_sum += a.abs();
        }
        b_level[p] = abs_sum;
        let prev = if p == 0 { 0.0 } else { c[order[p - 1]] };
        let gap = c[j] - prev;
        if gap > 0.0 {
            value += gap * abs_sum;
        }
    }

    let Some(grad) = grad.as_deref_mut() else {
        return value;
    };

    // Prefix A_(p),i = Σ_{p' ≤ p} gap_p' · sign_(p'),i (zero gaps drop out),
    // and the sorted position of every merged index.
    let mut prefix = vec![0.0f64; n * k];
    let mut pos_of = vec![0usize; n];
    {
        let mut running = vec![0.0f64; k];
        for p in 0..n {
            let j = order[p];
            pos_of[j] = p;
            let prev = if p == 0 { 0.0 } else { c[order[p - 1]] };
            let gap = c[j] - prev;
            if gap > 0.0 {
                for (r, sg) in running.iter_mut().zip(&signs[p * k..(p + 1) * k]) {
                    *r += gap * f64::from(*sg);
                }
            }
            prefix[p * k..(p + 1) * k].copy_from_slice(&running);
        }
    }

    let mut dbeta = vec![0.0f64; k * ambient];
    for m in 0..prob.n_src {
        let p = pos_of[m];
        let a = &prob.pts[m * ambient..(m + 1) * ambient];
        let g_row = &mut grad[m * ambient..(m + 1) * ambient];

        // Arc-coordinate part: ∂TW/∂c at sorted position p, through
        // c = arccos⟨x, a⟩. Clamped arccos branches are locally constant.
        if s[m].abs() < 1.0 {
            let gap_own = {
                let prev = if p == 0 { 0.0 } else { c[order[p - 1]] };
                c[m] - prev
            };
            let mut coeff = if gap_own > 0.0 { b_level[p] } else { 0.0 };
            if p + 1 < n {
                let gap_next = c[order[p + 1]] - c[m];
                if gap_next > 0.0 {
                    coeff -= b_level[p + 1];
                }
            }
            if coeff != 0.0 {
                let denom = (1.0 - s[m] * s[m]).max(GRAD_RHO_FLOOR).sqrt();
                let scale = -coeff / denom;
                for (g, xi) in g_row.iter_mut().zip(root) {
                    *g += scale * xi;
                }
            }
        }

        // Splitting part: ∂TW/∂α_(m),i = w_m · A_(p),i, pushed through the
        // softmax and the ray features. A point at a pole has a constant
        // zero feature row; skip it.
        let w_m = prob.u[m] - prob.v[m];
        if w_m == 0.0 {
            continue;
        }
        let rho_sq_raw = 1.0 - s[m] * s[m];
        if rho_sq_raw < EPS_POLE * EPS_POLE {
            continue;
        }
        let rho_sq = rho_sq_raw.max(GRAD_RHO_FLOOR);
        let rho = rho_sq.sqrt();
        let alpha_row = &alpha[m * k..(m + 1) * k];
        let a_row = &prefix[p * k..(p + 1) * k];
        let g_bar: f64 = (0..k).map(|i| alpha_row[i] * w_m * a_row[i]).sum();

        // ∂β_i/∂a = −y_i/√(1−q²) − (g·s/(ρ²√(1−q²)))·x − (θ·s/ρ)·x,
        // with q = ⟨y_i,a⟩/ρ; clamped q (point on the ray axis) is locally
        // constant in the arccos factor but keeps the θ·dρ term.
        dbeta.fill(0.0);
        for i in 0..k {
            let y = &dirs[i * ambient..(i + 1) * ambient];
            let g_i = dot(y, a);
            let q = (g_i / rho).clamp(-1.0, 1.0);
            let theta = q.acos();
            let row = &mut dbeta[i * ambient..(i + 1) * ambient];
            let s_over_rho = s[m] / rho;
            if q.abs() < 1.0 {
                let sq = (1.0 - q * q).max(GRAD_RHO_FLOOR).sqrt();
                let cx = -g_i * s[m] / (rho_sq * sq) - theta * s_over_rho;
                for ((r, yi), xi) in row.iter_mut().zip(y).zip(root) {
                    *r = -yi / sq + cx * xi;
                }
            } else {
                let cx = -theta * s_over_rho;
                for (r, xi) in row.iter_mut().zip(root) {
                    *r = cx * xi;
                }
            }
        }
        for i in 0..k {
            let coef = zeta * alpha_row[i] * (w_m * a_row[i] - g_bar);
            if coef == 0.0 {
                continue;
            }
            let row = &dbeta[i * ambient..(i + 1) * ambient];
            for (g, r) in g_row.iter_mut().zip(row) {
                *g += coef * r;
            }
        }
    }
    value
}

/// Fixed-tree estimator value at raw ambient source coordinates (no
/// renormalization), the evaluation the finite-difference oracle probes.
pub fn fixed_tree_stsw(
    source_coords: &[f64],
    source_weights: &[f64],
    target: &DiscreteMeasure,
    trees: &[SphericalTree],
    zeta: f64,
) -> Result<f64> {
    if trees.is_empty() {
        return Err(Error::InvalidParameter("at least one tree required".into()));
    }
    let prob = merged_from(source_coords, source_weights, target)?;
    let total: f64 = trees
        .iter()
        .map(|t| tree_value_grad(t, &prob, zeta, None))
        .sum();
    Ok(total / trees.len() as f64)
}

/// Analytic gradient of the fixed-tree estimator with respect to the
/// source support coordinates (ambient, pre-projection).
pub fn stsw_grad(
    source: &DiscreteMeasure,
    target: &DiscreteMeasure,
    trees: &[SphericalTree],
    zeta: f64,
) -> Result<StswGradient> {
    if trees.is_empty() {
        return Err(Error::InvalidParameter("at least one tree required".into()));
    }
    if source.ambient_dim() != target.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: source.ambient_dim(),
            got: target.ambient_dim(),
        });
    }
    let prob = merged_from(&source.flat_coords(), source.weights(), target)?;
    grad_of_problem(&prob, trees, zeta)
}

fn grad_of_problem(
    prob: &MergedProblem,
    trees: &[SphericalTree],
    zeta: f64,
) -> Result<StswGradient> {
    let per_tree: Vec<(f64, Vec<f64>)> = trees
        .par_iter()
        .map(|t| {
            let mut g = vec![0.0; prob.n_src * prob.ambient];
            let v = tree_value_grad(t, prob, zeta, Some(&mut g));
            (v, g)
        })
        .collect();
    // Ordered reduction over tree index.
    let l = trees.len() as f64;
    let mut value = 0.0;
    let mut flat = vec![0.0; prob.n_src * prob.ambient];
    for (v, g) in &per_tree {
        value += v;
        for (acc, gi) in flat.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    value /= l;
    let grads = flat
        .chunks(prob.ambient)
        .map(|row| row.iter().map(|g| g / l).collect())
        .collect();
    Ok(StswGradient { value, grads })
}

/// One trajectory row. `log_w2` and `nll` are present on evaluation epochs
/// only; `wall_time_s` is cumulative.
#[derive(Clone, Debug)]
pub struct FlowRecord {
    pub epoch: usize,
    pub stsw: f64,
    pub log_w2: Option<f64>,
    pub nll: Option<f64>,
    pub wall_time_s: f64,
}

/// Trajectory plus the final source measure.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub records: Vec<FlowRecord>,
    pub final_measure: DiscreteMeasure,
}

/// Projected gradient descent of the estimator value from `source0`
/// toward the fixed target samples.
///
/// Each support takes the step `x_j ← x_j − γ·(1/u_j)·∇_{x_j}` followed by
/// renormalization onto the sphere: the per-unit-mass gradient is the
/// particle velocity field of the flow, so the step size means the same
/// thing for any cloud size (the raw gradient of the estimator value
/// scales with the support's weight `u_j`).
///
/// Record `e` describes the source after `e` updates. Its `stsw` value is
/// measured on one fixed evaluation tree set shared by every record
/// (common random numbers), so consecutive rows differ only through the
/// state and the curve is readable as a loss trajectory; training
/// gradients use per-epoch resampled trees when `resample_trees` is set.
/// Exact `ln W₂` and mixture NLL are added on evaluation epochs
/// (`e % eval_every == 0` or final). All tree sets derive
/// deterministically from the configured seed, so a fixed configuration
/// reproduces its trajectory bit for bit.
pub fn run_flow(
    source0: &DiscreteMeasure,
    target: &DiscreteMeasure,
    density: Option<&VmfMixture>,
    config: &FlowConfig,
) -> Result<FlowResult> {
    config.validate()?;
    let (merged_src, _) = merge_measures(source0, target)?; // dimension check
    drop(merged_src);
    let started = Instant::now();
    let d = source0.sphere_dim();
    let ambient = source0.ambient_dim();
    let l = config.stsw.num_trees;
    let k = config.stsw.num_rays;
    let zeta = config.stsw.zeta;

    let fixed_trees = if config.resample_trees {
        None
    } else {
        Some(sample_tree_set(config.stsw.seed, l, d, k)?)
    };
    let trees_for = |epoch: usize| -> Result<Vec<SphericalTree>> {
        match &fixed_trees {
            Some(t) => Ok(t.clone()),
            None => sample_tree_set(mix_seed(config.stsw.seed, epoch as u64), l, d, k),
        }
    };
    // Fixed evaluation set for the logged loss (salted away from every
    // per-epoch training stream).
    let eval_trees = match &fixed_trees {
        Some(t) => t.clone(),
        None => sample_tree_set(mix_seed(config.stsw.seed, u64::MAX), l, d, k)?,
    };

    let mut coords = source0.flat_coords();
    let weights = source0.weights().to_vec();
    let mut records = Vec::with_capacity(config.epochs + 1);

    let current_measure = |coords: &[f64]| -> Result<DiscreteMeasure> {
        let supports = coords
            .chunks(ambient)
            .map(|c| UnitVector::new(c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        DiscreteMeasure::new(supports, weights.clone())
    };
    let evaluate = |coords: &[f64]| -> Result<(f64, Option<f64>)> {
        let m = current_measure(coords)?;
        let w2 = exact_w2_sphere(&m, target)?;
        let log_w2 = w2.max(f64::MIN_POSITIVE).ln();
        let nll = match density {
            Some(mix) => Some(mix.nll(m.supports())?),
            None => None,
        };
        Ok((log_w2, nll))
    };
    let should_eval = |epoch: usize| epoch % config.eval_every == 0 || epoch == config.epochs;
    let logged_value = |coords: &[f64]| -> Result<f64> {
        let prob = merged_from(coords, &weights, target)?;
        let total: f64 = eval_trees
            .par_iter()
            .map(|t| tree_value_grad(t, &prob, zeta, None))
            .sum();
        Ok(total / eval_trees.len() as f64)
    };
    let push_record = |records: &mut Vec<FlowRecord>, epoch: usize, coords: &[f64]| -> Result<()> {
        let (log_w2, nll) = if should_eval(epoch) {
            let (w, n) = evaluate(coords)?;
            (Some(w), n)
        } else {
            (None, None)
        };
        records.push(FlowRecord {
            epoch,
            stsw: logged_value(coords)?,
            log_w2,
            nll,
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        Ok(())
    };

    push_record(&mut records, 0, &coords)?;
    for epoch in 1..=config.epochs {
        let trees = trees_for(epoch)?;
        let prob = merged_from(&coords, &weights, target)?;
        let g = grad_of_problem(&prob, &trees, zeta)?;
        if !g.value.is_finite() || g.grads.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteGradient { epoch });
        }

        if config.learning_rate > 0.0 {
            for (j, row) in g.grads.iter().enumerate() {
                // A zero step must not churn the point: renormalizing an
                // already-unit row perturbs the last ulp, which is enough
                // to knock exactly-tied supports off a stationary point.
                if weights[j] <= 0.0 || row.iter().all(|gi| *gi == 0.0) {
                    continue;
                }
                let step = config.learning_rate / weights[j];
                let chunk = &mut coords[j * ambient..(j + 1) * ambient];
                let mut norm_sq = 0.0;
                for (ci, gi) in chunk.iter_mut().zip(row) {
                    *ci -= step * gi;
                    norm_sq += *ci * *ci;
                }
                if norm_sq.sqrt() < 1e-12 {
                    return Err(Error::NonFiniteGradient { epoch });
                }
                let inv = 1.0 / norm_sq.sqrt();
                for ci in chunk.iter_mut() {
                    *ci *= inv;
                }
            }
        }
        push_record(&mut records, epoch, &coords)?;
    }

    Ok(FlowResult {
        final_measure: current_measure(&coords)?,
        records,
    })
}
