//! Command-line surface for spherical tree-sliced Wasserstein distances:
//! distance computation between point-cloud files, tree sampling, gradient
//! flows, oracle validation, and runtime benchmarking.
//!
//! Exit codes: 0 success, 1 check failure (`validate`), 2 usage or I/O
//! error.

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use stsw::estimator::{sample_tree_set, stsw, stsw_with_trees, StswConfig};
use stsw::flow::{run_flow, target_12vmf, FlowConfig};
use stsw::io::{
    load_point_cloud, save_point_cloud, save_trajectory, tree_to_json, RunManifest,
};
use stsw::oracle::exact_w1_tree;
use stsw::sphere::{random_orthogonal, sample_uniform_sphere, sample_vmf, DiscreteMeasure};
use stsw::split::beta;
use stsw::tree::sample_tree;
use stsw::tw::{project_pair, ray_graph, tw_closed_form, tw_on_explicit_tree};

#[derive(Parser)]
#[command(name = "stsw", version, about = "Tree-sliced Wasserstein distances on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the distance between two point-cloud CSV files.
    Distance(DistanceArgs),
    /// Sample one spherical tree and print it as JSON.
    SampleTree(SampleTreeArgs),
    /// Run a projected gradient flow toward a target distribution.
    Flow(FlowArgs),
    /// Run the oracle-equivalence and invariance checks.
    Validate(ValidateArgs),
    /// Time the estimator over parameter grids and fit runtime lines.
    Bench(BenchArgs),
}

#[derive(Args)]
struct DistanceArgs {
    /// First point cloud (CSV).
    #[arg(long)]
    input_a: PathBuf,
    /// Second point cloud (CSV).
    #[arg(long)]
    input_b: PathBuf,
    /// Number of sampled trees L.
    #[arg(long, default_value_t = 200)]
    trees: usize,
    /// Rays per tree k.
    #[arg(long, default_value_t = 10)]
    rays: usize,
    /// Splitting-map temperature ζ.
    #[arg(long, default_value_t = 2.0)]
    zeta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Optional path for the run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SampleTreeArgs {
    /// Sphere dimension d (points carry d+1 coordinates).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Rays per tree k.
    #[arg(long, default_value_t = 5)]
    rays: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FlowArgs {
    /// `vmf12` or a point-cloud CSV path.
    #[arg(long)]
    target: String,
    /// Source (and vmf12 target) sample count.
    #[arg(long, default_value_t = 2400)]
    samples: usize,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Learning rate γ (per unit mass).
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 200)]
    trees: usize,
    #[arg(long, default_value_t = 5)]
    rays: usize,
    #[arg(long, default_value_t = 2.0)]
    zeta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Epoch period of the exact W₂/NLL evaluations.
    #[arg(long, default_value_t = 100)]
    eval_every: usize,
    /// Output directory (trajectory.csv, final.csv, manifest.json).
    #[arg(long)]
    out: PathBuf,
    /// Keep one fixed tree set instead of resampling every epoch.
    #[arg(long, default_value_t = false)]
    fixed_trees: bool,
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Randomized instances per check.
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corrupt one comparison on purpose; the run must then fail.
    #[arg(long, default_value_t = false)]
    inject_fault: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Tree counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![200usize, 400, 600, 800, 1000, 1200, 1400, 1600, 1800, 2000])]
    trees_grid: Vec<usize>,
    /// Ray counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5usize, 10, 25, 50, 100, 150, 200, 300, 500])]
    rays_grid: Vec<usize>,
    /// Sample counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![500usize, 1000, 3000, 5000, 7000, 8000, 10000])]
    samples_grid: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Timing CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Distance(a) => cmd_distance(a),
        Command::SampleTree(a) => cmd_sample_tree(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

#[derive(Serialize)]
struct DistanceReport {
    stsw: f64,
    per_tree_mean: f64,
    per_tree_stderr: f64,
    trees: usize,
    rays: usize,
    zeta: f64,
    seed: u64,
    threads: usize,
}

fn cmd_distance(args: DistanceArgs) -> anyhow::Result<u8> {
    let started = Instant::now();
    let mu = load_point_cloud(&args.input_a)?;
    let nu = load_point_cloud(&args.input_b)?;
    let config = StswConfig {
        num_trees: args.trees,
        num_rays: args.rays,
        zeta: args.zeta,
        seed: args.seed,
        threads: args.threads,
    };
    let result = stsw(&mu, &nu, &config)?;
    let report = DistanceReport {
        stsw: result.value,
        per_tree_mean: result.value,
        per_tree_stderr: result.stderr(),
        trees: args.trees,
        rays: args.rays,
        zeta: args.zeta,
        seed: args.seed,
        threads: args.threads,
    };
    println!("{}", serde_json::to_string(&report)?);
    if let Some(path) = &args.manifest {
        let mut manifest = RunManifest::new(
            "distance",
            serde_json::json!({
                "input_a": args.input_a.display().to_string(),
                "input_b": args.input_b.display().to_string(),
                "trees": args.trees,
                "rays": args.rays,
                "zeta": args.zeta,
                "seed": args.seed,
                "threads": args.threads,
            }),
            args.seed,
        );
        manifest.wall_time_s = started.elapsed().as_secs_f64();
        manifest.save(path)?;
    }
    Ok(0)
}

fn cmd_sample_tree(args: SampleTreeArgs) -> anyhow::Result<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let tree = sample_tree(&mut rng, args.dim, args.rays)?;
    let json = tree_to_json(&tree);
    match &args.out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(0)
}

fn cmd_flow(args: FlowArgs) -> anyhow::Result<u8> {
    let started = Instant::now();
    std::fs::create_dir_all(&args.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);

    let (target, density) = if args.target == "vmf12" {
        let mix = target_12vmf();
        let samples = mix.sample(&mut rng, args.samples)?;
        (DiscreteMeasure::uniform(samples)?, Some(mix))
    } else {
        (load_point_cloud(Path::new(&args.target))?, None)
    };
    let source = DiscreteMeasure::uniform(sample_uniform_sphere(
        &mut rng,
        target.sphere_dim(),
        args.samples,
    )?)?;

    let config = FlowConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        stsw: StswConfig {
            num_trees: args.trees,
            num_rays: args.rays,
            zeta: args.zeta,
            seed: args.seed,
            threads: args.threads,
        },
        eval_every: args.eval_every,
        resample_trees: !args.fixed_trees,
    };
    let result = run_flow(&source, &target, density.as_ref(), &config)?;

    let trajectory_path = args.out.join("trajectory.csv");
    let final_path = args.out.join("final.csv");
    save_trajectory(&trajectory_path, &result.records)?;
    save_point_cloud(&final_path, &result.final_measure)?;

    let mut manifest = RunManifest::new(
        "flow",
        serde_json::json!({
            "target": args.target,
            "samples": args.samples,
            "epochs": args.epochs,
            "lr": args.lr,
            "trees": args.trees,
            "rays": args.rays,
            "zeta": args.zeta,
            "seed": args.seed,
            "eval_every": args.eval_every,
            "fixed_trees": args.fixed_trees,
            "threads": args.threads,
            "w2_ground_metric": "squared_geodesic",
        }),
        args.seed,
    );
    manifest.wall_time_s = started.elapsed().as_secs_f64();
    manifest.outputs = vec![
        trajectory_path.display().to_string(),
        final_path.display().to_string(),
    ];
    manifest.save(&args.out.join("manifest.json"))?;

    let last = result.records.last().expect("at least one record");
    println!(
        "final epoch {}: stsw {:.6e}, log_w2 {}, nll {}",
        last.epoch,
        last.stsw,
        last.log_w2.map(|v| format!("{v:.4}")).unwrap_or_default(),
        last.nll.map(|v| format!("{v:.2}")).unwrap_or_default(),
    );
    Ok(0)
}

struct Check {
    name: &'static str,
    max_err: f64,
    tolerance: f64,
}

fn cmd_validate(args: ValidateArgs) -> anyhow::Result<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut checks: Vec<Check> = Vec::new();
    let fault = if args.inject_fault { 1e-3 } else { 0.0 };

    let random_weights = |rng: &mut ChaCha8Rng, n: usize| -> Vec<f64> {
        let mut w: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(rng) + 1e-3).collect();
        let s: f64 = w.iter().sum();
        for v in &mut w {
            *v /= s;
        }
        let corr = 1.0 - w.iter().sum::<f64>();
        w[0] += corr;
        w
    };

    // Closed form against the exact LP, and against the explicit ray
    // graph, on shared random instances.
    let mut lp_err = 0.0f64;
    let mut graph_err = 0.0f64;
    let mut mass_err = 0.0f64;
    for i in 0..args.instances {
        let d = [2usize, 3, 5][i % 3];
        let n = 2 + (i % 5);
        let k = 1 + (i % 4);
        let zeta = [-5.0, 0.0, 2.0, 5.0][i % 4];
        let tree = sample_tree(&mut rng, d, k)?;
        let supports = sample_uniform_sphere(&mut rng, d, n)?;
        let mu = DiscreteMeasure::new(supports.clone(), random_weights(&mut rng, n))?;
        let nu = DiscreteMeasure::new(supports, random_weights(&mut rng, n))?;
        let closed = tw_closed_form(&project_pair(&tree, &mu, &nu, zeta)?) + fault;
        let lp = exact_w1_tree(&tree, &mu, &nu, zeta)?;
        lp_err = lp_err.max((closed - lp).abs());
        let (graph, gm, gn) = ray_graph(&tree, &mu, &nu, zeta)?;
        let explicit = tw_on_explicit_tree(&graph, &gm, &gn)?;
        graph_err = graph_err.max((closed - explicit).abs());
        let split = stsw::split::alpha(&tree, &mu, zeta)?;
        let total: f64 = (0..mu.n())
            .map(|j| split.row(j).iter().sum::<f64>() * mu.weights()[j])
            .sum();
        mass_err = mass_err.max((total - 1.0).abs());
    }
    checks.push(Check {
        name: "closed form vs exact LP",
        max_err: lp_err,
        tolerance: 1e-9,
    });
    checks.push(Check {
        name: "closed form vs explicit ray graph",
        max_err: graph_err,
        tolerance: 1e-10,
    });
    checks.push(Check {
        name: "projected mass conservation",
        max_err: mass_err,
        tolerance: 1e-10,
    });

    // Metric axioms on shared fixed trees.
    let trees = sample_tree_set(args.seed ^ 0x5eed, 16, 2, 4)?;
    let mut identity_err = 0.0f64;
    let mut symmetry_err = 0.0f64;
    let mut triangle_err = 0.0f64;
    for _ in 0..args.instances {
        let make = |rng: &mut ChaCha8Rng| -> anyhow::Result<DiscreteMeasure> {
            Ok(DiscreteMeasure::uniform(sample_uniform_sphere(rng, 2, 5)?)?)
        };
        let (m1, m2, m3) = (make(&mut rng)?, make(&mut rng)?, make(&mut rng)?);
        identity_err = identity_err.max(stsw_with_trees(&m1, &m1, &trees, 2.0)?.value.abs());
        let d12 = stsw_with_trees(&m1, &m2, &trees, 2.0)?.value;
        let d21 = stsw_with_trees(&m2, &m1, &trees, 2.0)?.value;
        symmetry_err = symmetry_err.max((d12 - d21).abs());
        let d23 = stsw_with_trees(&m2, &m3, &trees, 2.0)?.value;
        let d13 = stsw_with_trees(&m1, &m3, &trees, 2.0)?.value;
        triangle_err = triangle_err.max((d13 - d12 - d23).max(0.0));
    }
    checks.push(Check {
        name: "identity of indiscernibles",
        max_err: identity_err,
        tolerance: 1e-12,
    });
    checks.push(Check {
        name: "symmetry",
        max_err: symmetry_err,
        tolerance: 0.0,
    });
    checks.push(Check {
        name: "triangle inequality slack",
        max_err: triangle_err,
        tolerance: 1e-9,
    });

    // Splitting-map invariance under random rotations.
    let mut invariance_err = 0.0f64;
    for _ in 0..args.instances {
        let tree = sample_tree(&mut rng, 2, 4)?;
        let p = &sample_uniform_sphere(&mut rng, 2, 1)?[0];
        let g = random_orthogonal(&mut rng, 2)?;
        let b = beta(&tree, p)?;
        let gb = beta(&tree.transformed(&g)?, &g.apply(p)?)?;
        for (x, y) in b.iter().zip(&gb) {
            invariance_err = invariance_err.max((x - y).abs());
        }
    }
    checks.push(Check {
        name: "splitting-map rotation invariance",
        max_err: invariance_err,
        tolerance: 1e-9,
    });

    let mut failed = false;
    for c in &checks {
        let ok = c.max_err <= c.tolerance;
        failed |= !ok;
        println!(
            "{}  {:40} max error {:.3e} (tolerance {:.1e})",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            c.max_err,
            c.tolerance
        );
    }
    if args.instances == 0 {
        // Vacuous run: nothing sampled, nothing to fail.
        return Ok(0);
    }
    Ok(u8::from(failed))
}

fn fit_r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    1.0 - ss_res / ss_tot
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let d = args.dim;
    let max_n = args.samples_grid.iter().copied().max().unwrap_or(500).max(500);
    // One big cloud pair, sliced per grid point: vMF(κ=10) against uniform.
    let north = stsw::sphere::UnitVector::new({
        let mut c = vec![0.0; d + 1];
        c[d] = 1.0;
        c
    })?;
    let vmf_pool = sample_vmf(&mut rng, &north, 10.0, max_n)?;
    let uniform_pool = sample_uniform_sphere(&mut rng, d, max_n)?;

    let time_once = |l: usize, k: usize, n: usize, seed: u64| -> anyhow::Result<f64> {
        let mu = DiscreteMeasure::uniform(vmf_pool[..n].to_vec())?;
        let nu = DiscreteMeasure::uniform(uniform_pool[..n].to_vec())?;
        let config = StswConfig {
            num_trees: l,
            num_rays: k,
            zeta: 2.0,
            seed,
            threads: 0,
        };
        // Estimator-internal wall time: excludes cloud setup and file IO.
        let mut best = f64::INFINITY;
        for r in 0..args.repeats.max(1) {
            let result = stsw(&mu, &nu, &StswConfig { seed: seed + r as u64, ..config.clone() })?;
            best = best.min(result.wall_time_s);
        }
        Ok(best)
    };

    let mut csv = String::from("sweep,param,trees,rays,samples,dim,wall_time_s\n");
    let mut summary = Vec::new();
    let sweeps: [(&str, &[usize]); 3] = [
        ("trees", &args.trees_grid),
        ("rays", &args.rays_grid),
        ("samples", &args.samples_grid),
    ];
    for (name, grid) in sweeps {
        if grid.len() < 2 {
            continue;
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &value in grid {
            let (l, k, n) = match name {
                "trees" => (value, 10, 500),
                "rays" => (200, value, 500),
                _ => (200, 10, value),
            };
            let t = time_once(l, k, n, args.seed)?;
            xs.push(value as f64);
            ys.push(t);
            csv.push_str(&format!("{name},{value},{l},{k},{n},{d},{t}\n"));
        }
        let r2 = fit_r_squared(&xs, &ys);
        summary.push((name, r2));
        println!("sweep {name:8} R² = {r2:.4}");
    }
    if let Some(path) = &args.out {
        std::fs::write(path, csv)?;
        let mut manifest = RunManifest::new(
            "bench",
            serde_json::json!({
                "trees_grid": args.trees_grid,
                "rays_grid": args.rays_grid,
                "samples_grid": args.samples_grid,
                "repeats": args.repeats,
                "seed": args.seed,
                "dim": args.dim,
            }),
            args.seed,
        );
        manifest.outputs = vec![path.display().to_string()];
        manifest.save(&path.with_extension("manifest.json"))?;
    }
    Ok(0)
}
