//! Trains a full-policy agent on scenario #0 and evaluates it on five
//! seeds in mean-action mode.
//!
//! `cargo run --release --example train_sfpn -- [updates] [seed] [out_dir]`

use std::path::PathBuf;
use std::sync::Arc;

use resflow::agents::{ActMode, AgentKind};
use resflow::exogenous::BaselineParams;
use resflow::reward::RewardWeights;
use resflow::rollout::run_episode;
use resflow::scenario::builtin;
use resflow::trainer::{train, TrainConfig};

fn main() -> resflow::Result<()> {
    let mut args = std::env::args().skip(1);
    let updates = args.next().map_or(100, |s| s.parse().expect("updates"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let out: Option<PathBuf> = args.next().map(PathBuf::from);

    let params = Arc::new(builtin(0)?);
    let baseline = Arc::new(BaselineParams::default());
    let cfg = TrainConfig {
        updates,
        seed,
        ..TrainConfig::default()
    };
    let started = std::time::Instant::now();
    let outcome = train(
        AgentKind::Sfpn(1),
        params.clone(),
        baseline.clone(),
        cfg,
        out.as_deref(),
        |r| {
            if r.update % 10 == 0 {
                println!(
                    "update {:>4}  reward {:+.3}  days {:>5.1}  completed {:>4.0}%  entropy {:.2}",
                    r.update,
                    r.mean_reward,
                    r.mean_duration,
                    100.0 * r.completion_rate,
                    r.entropy
                );
            }
        },
    )?;
    println!("trained in {:.1?}", started.elapsed());

    for s in 1000..1005u64 {
        let r = run_episode(
            &outcome.agent,
            params.clone(),
            baseline.clone(),
            s,
            ActMode::Mean,
            &RewardWeights::AGENT1,
        )?
        .summary;
        println!(
            "eval seed {s}: {} in {} days, cost {:.0}, npv {:.0}, reward {:+.3}",
            r.status, r.duration, r.total_cost, r.npv, r.total_reward
        );
    }
    Ok(())
}
