use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stsw::estimator::StswConfig;
use stsw::flow::*;
use stsw::sphere::*;
use std::io::Write;

fn main() {
    for seed in [0u64, 1, 2] {
        let mix = target_12vmf();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = DiscreteMeasure::uniform(mix.sample(&mut rng, 2400).unwrap()).unwrap();
        let source =
            DiscreteMeasure::uniform(sample_uniform_sphere(&mut rng, 2, 2400).unwrap()).unwrap();
        let config = FlowConfig {
            learning_rate: 0.01,
            epochs: 500,
            stsw: StswConfig { num_trees: 200, num_rays: 5, zeta: 0.0, seed, threads: 0 },
            eval_every: 100,
            resample_trees: true,
        };
        let out = run_flow(&source, &target, Some(&mix), &config).unwrap();
        let mut f = std::fs::File::create(format!("/tmp/series_{seed}.txt")).unwrap();
        for r in &out.records {
            writeln!(f, "{} {} {}", r.epoch, r.stsw,
                r.log_w2.map(|v| v.to_string()).unwrap_or_default()).unwrap();
        }
        let last = out.records.last().unwrap();
        println!("seed {seed}: log_w2 {:.3}, nll {:.1}", last.log_w2.unwrap(), last.nll.unwrap());
    }
}
