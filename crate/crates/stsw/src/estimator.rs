//! Monte Carlo estimator: average the closed-form tree distance over `L`
//! independently sampled spherical trees.
//!
//! Determinism contract: tree `l` always draws from a ChaCha stream keyed
//! by `(seed, l)`, and the reduction sums per-tree values in tree order,
//! so results are bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::sphere::{DiscreteMeasure, UnitVector};
use crate::tree::{sample_tree, SphericalTree};
use crate::tw::{project_pair, tw_closed_form};

/// Full determinism contract for one estimator run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StswConfig {
    /// Number of sampled trees `L`.
    pub num_trees: usize,
    /// Number of rays per tree `k`.
    pub num_rays: usize,
    /// Splitting-map temperature `ζ`.
    pub zeta: f64,
    /// Seed for the per-tree ChaCha streams.
    pub seed: u64,
    /// Worker threads; 0 picks the global pool.
    pub threads: usize,
}

impl Default for StswConfig {
    fn default() -> Self {
        Self {
            num_trees: 200,
            num_rays: 10,
            zeta: 2.0,
            seed: 0,
            threads: 0,
        }
    }
}

impl StswConfig {
    fn validate(&self) -> Result<()> {
        if self.num_trees == 0 || self.num_rays == 0 {
            return Err(Error::InvalidParameter("L ≥ 1 and k ≥ 1 required".into()));
        }
        if !self.zeta.is_finite() {
            return Err(Error::InvalidParameter("ζ must be finite".into()));
        }
        Ok(())
    }
}

/// Estimator output: the mean, the per-tree values behind it, the config
/// that produced it, and the wall time of the tree loop.
#[derive(Clone, Debug)]
pub struct StswResult {
    pub value: f64,
    pub per_tree: Vec<f64>,
    pub config: StswConfig,
    pub wall_time_s: f64,
}

impl StswResult {
    /// Standard error of the Monte Carlo mean (sample std / √L).
    pub fn stderr(&self) -> f64 {
        let l = self.per_tree.len();
        if l < 2 {
            return 0.0;
        }
        let mean = self.value;
        let var: f64 = self
            .per_tree
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (l - 1) as f64;
        (var / l as f64).sqrt()
    }
}

/// SplitMix64 finalizer; used to derive independent seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for tree index `l` under `seed`: one ChaCha stream per tree.
fn tree_rng(seed: u64, l: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(l);
    rng
}

/// Draws `count` trees from the per-index streams of `seed`.
pub fn sample_tree_set(seed: u64, count: usize, d: usize, k: usize) -> Result<Vec<SphericalTree>> {
    (0..count)
        .map(|l| sample_tree(&mut tree_rng(seed, l as u64), d, k))
        .collect()
}

/// Rewrites `mu` and `nu` over one shared support list (the concatenation
/// of both lists, with zero weights for the foreign block).
pub fn merge_measures(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    if mu.ambient_dim() != nu.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.ambient_dim(),
            got: nu.ambient_dim(),
        });
    }
    let mut supports: Vec<UnitVector> = Vec::with_capacity(mu.n() + nu.n());
    supports.extend_from_slice(mu.supports());
    supports.extend_from_slice(nu.supports());
    let mut u = vec![0.0; supports.len()];
    let mut v = vec![0.0; supports.len()];
    u[..mu.n()].copy_from_slice(mu.weights());
    v[mu.n()..].copy_from_slice(nu.weights());
    Ok((
        DiscreteMeasure::new(supports.clone(), u)?,
        DiscreteMeasure::new(supports, v)?,
    ))
}

fn run_per_tree<F>(threads: usize, count: usize, eval: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let work = || (0..count).into_par_iter().map(&eval).collect::<Result<Vec<f64>>>();
    if threads == 0 {
        work()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(work)
    }
}

fn finish(per_tree: Vec<f64>, config: StswConfig, started: Instant) -> StswResult {
    // Ordered sum over tree index keeps the value independent of worker
    // scheduling.
    let value = per_tree.iter().sum::<f64>() / per_tree.len() as f64;
    StswResult {
        value,
        per_tree,
        config,
        wall_time_s: started.elapsed().as_secs_f64(),
    }
}

/// The Monte Carlo estimate between two measures: merge supports, sample
/// `L` trees from the seed, evaluate the closed form per tree, average.
pub fn stsw(mu: &DiscreteMeasure, nu: &DiscreteMeasure, config: &StswConfig) -> Result<StswResult> {
    config.validate()?;
    let (mu, nu) = merge_measures(mu, nu)?;
    let d = mu.sphere_dim();
    let started = Instant::now();
    let per_tree = run_per_tree(config.threads, config.num_trees, |l| {
        let tree = sample_tree(&mut tree_rng(config.seed, l as u64), d, config.num_rays)?;
        Ok(tw_closed_form(&project_pair(&tree, &mu, &nu, config.zeta)?))
    })?;
    Ok(finish(per_tree, config.clone(), started))
}

/// Fixed-tree variant: evaluates the provided trees instead of sampling.
/// Fully deterministic with no randomness; this is the form used by the
/// metric-axiom and invariance checks.
pub fn stsw_with_trees(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    trees: &[SphericalTree],
    zeta: f64,
) -> Result<StswResult> {
    if trees.is_empty() {
        return Err(Error::InvalidParameter("at least one tree required".into()));
    }
    let k = trees[0].num_rays();
    for t in trees {
        if t.ambient_dim() != mu.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: mu.ambient_dim(),
                got: t.ambient_dim(),
            });
        }
    }
    let (mu, nu) = merge_measures(mu, nu)?;
    let config = StswConfig {
        num_trees: trees.len(),
        num_rays: k,
        zeta,
        seed: 0,
        threads: 0,
    };
    let started = Instant::now();
    let per_tree = run_per_tree(0, trees.len(), |l| {
        Ok(tw_closed_form(&project_pair(&trees[l], &mu, &nu, zeta)?))
    })?;
    Ok(finish(per_tree, config, started))
}
