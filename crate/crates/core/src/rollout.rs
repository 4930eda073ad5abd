//! Whole-episode runs of an agent and their summaries.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{ActMode, Agent};
use crate::env::{Action, StepStatus};
use crate::episode::{DayLog, Simulation};
use crate::error::Result;
use crate::exogenous::BaselineParams;
use crate::reward::{reward, RewardWeights};
use crate::scenario::ModelParams;

/// Stream reserved for the policy's own sampling during evaluation.
const POLICY_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub status: String,
    pub completed: bool,
    /// days worked
    pub duration: usize,
    /// fraction of the total area with concrete placed
    pub progress: f64,
    pub labor_cost: f64,
    pub material_cost: f64,
    pub total_cost: f64,
    /// end minus start holding cash
    pub npv: f64,
    pub total_reward: f64,
    pub min_cash: f64,
}

pub struct EpisodeRun {
    pub summary: EpisodeSummary,
    pub log: Vec<DayLog>,
}

/// Runs one episode of `agent` to its end. Network agents sample from
/// their policy only in [`ActMode::Sample`].
pub fn run_episode(
    agent: &Agent,
    params: Arc<ModelParams>,
    baseline: Arc<BaselineParams>,
    seed: u64,
    mode: ActMode,
    weights: &RewardWeights,
) -> Result<EpisodeRun> {
    let mut sim = Simulation::new(params, baseline, seed)?;
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seed);
    policy_rng.set_stream(POLICY_STREAM);
    run_with(&mut sim, seed, weights, |sim| {
        let obs = sim.observe()?;
        Ok(agent.act(&obs, &mut policy_rng, mode)?.0)
    })
}

/// Runs `sim` to its end, asking `choose` for each day's action.
pub fn run_with<F>(
    sim: &mut Simulation,
    seed: u64,
    weights: &RewardWeights,
    mut choose: F,
) -> Result<EpisodeRun>
where
    F: FnMut(&mut Simulation) -> Result<Action>,
{
    let start_cash = sim.state.cash;
    let mut min_cash = start_cash;
    let mut total_reward = 0.0;
    let mut log = Vec::new();
    while !sim.is_done() {
        let action = choose(sim)?;
        let tr = sim.step(&action)?;
        let r = reward(&tr.prev, &sim.state, tr.status, weights, &sim.params);
        total_reward += r.total;
        min_cash = min_cash.min(sim.state.cash);
        log.push(DayLog::new(&tr, &sim.state, &r));
    }
    let s = &sim.state;
    let summary = EpisodeSummary {
        seed,
        status: sim.status.as_str().to_string(),
        completed: sim.status == StepStatus::Completed,
        duration: sim.duration(),
        progress: s.progress(&sim.params),
        labor_cost: s.labor_cost,
        material_cost: s.material_cost,
        total_cost: s.labor_cost + s.material_cost,
        npv: s.cash - start_cash,
        total_reward,
        min_cash,
    };
    Ok(EpisodeRun { summary, log })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_policy_episode_terminates() {
        let p = Arc::new(ModelParams::default());
        let agent = Agent::empirical((*p).clone());
        let run = run_episode(
            &agent,
            p.clone(),
            Arc::new(BaselineParams::default()),
            7,
            ActMode::Mean,
            &RewardWeights::AGENT1,
        )
        .unwrap();
        assert_eq!(run.log.len(), run.summary.duration);
        assert!(run.summary.duration <= p.max_days as usize);
        let s = &run.summary;
        assert!((s.total_cost - s.labor_cost - s.material_cost).abs() < 1e-6);
    }
}
