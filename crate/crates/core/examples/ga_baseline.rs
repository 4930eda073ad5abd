//! Evolves a whole-project plan with a small GA on scenario #0 and
//! replays the best plan. The full-size run is `resflow ga`.
//!
//! `cargo run --release --example ga_baseline -- [generations] [population]`

use std::sync::Arc;

use resflow::exogenous::BaselineParams;
use resflow::ga::{decode, evolve, replay, GaConfig};
use resflow::reward::RewardWeights;
use resflow::scenario::builtin;

fn main() -> resflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = GaConfig {
        generations: args.next().map_or(64, |s| s.parse().expect("generations")),
        population: args.next().map_or(64, |s| s.parse().expect("population")),
        ..GaConfig::default()
    };
    let params = Arc::new(builtin(0)?);
    let baseline = Arc::new(BaselineParams::default());
    let weights = RewardWeights::AGENT1;
    let out = evolve(&cfg, params.clone(), baseline.clone(), &weights, |g| {
        if g.generation % 8 == 0 {
            println!(
                "generation {:>4}  best {:+.4}  mean {:+.4}",
                g.generation, g.best, g.mean
            );
        }
    })?;
    println!("best fitness {:+.4}", out.best_fitness);
    let plan = decode(&out.best, &params)?;
    for seed in cfg.evaluation_seeds() {
        let s = replay(&plan, params.clone(), baseline.clone(), seed, &weights)?.summary;
        println!(
            "replay seed {seed}: {} on day {}, progress {:.1}%",
            s.status,
            s.duration,
            100.0 * s.progress
        );
    }
    Ok(())
}
