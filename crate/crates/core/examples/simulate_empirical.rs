//! Runs the rule-based policy on the first three built-in scenarios and
//! prints one line per seed.

use std::sync::Arc;

use resflow::agents::{ActMode, Agent};
use resflow::exogenous::BaselineParams;
use resflow::reward::RewardWeights;
use resflow::rollout::run_episode;
use resflow::scenario::builtin;

fn main() -> resflow::Result<()> {
    let baseline = Arc::new(BaselineParams::default());
    for id in 0..=2u8 {
        let params = Arc::new(builtin(id)?);
        let agent = Agent::empirical((*params).clone());
        println!("scenario #{id}");
        for seed in 0..5u64 {
            let s = run_episode(
                &agent,
                params.clone(),
                baseline.clone(),
                seed,
                ActMode::Mean,
                &RewardWeights::AGENT1,
            )?
            .summary;
            println!(
                "  seed {seed}: {:<10} day {:>3}  progress {:>5.1}%  labor {:>9.0}  material {:>10.0}  total {:>10.0}  min cash {:>10.0}  reward {:+.3}",
                s.status,
                s.duration,
                100.0 * s.progress,
                s.labor_cost,
                s.material_cost,
                s.total_cost,
                s.min_cash,
                s.total_reward
            );
        }
    }
    Ok(())
}
