//! Shaped per-step reward: dense progress, deadline and cash terms plus
//! sparse failure, completion-time and savings terms.

use serde::{Deserialize, Serialize};

use crate::env::{State, StepStatus};
use crate::scenario::{ModelParams, CONCRETE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub progress: f64,
    pub labor_dense: f64,
    pub material_dense: f64,
    pub deadline_dense: f64,
    pub labor_sparse: f64,
    pub material_sparse: f64,
    pub deadline_sparse: f64,
    pub failure: f64,
}

impl RewardWeights {
    /// Full policy network, balanced cost weights.
    pub const AGENT1: Self = Self::preset(0.5, 0.25, 0.25, 0.5, 2.0, 2.0, 1.0, 0.15);
    /// Full policy network, labor-cost heavy.
    pub const AGENT2: Self = Self::preset(0.5, 1.0, 0.125, 0.5, 8.0, 1.0, 1.0, 0.15);
    /// Work-hour network.
    pub const AGENT3: Self = Self::preset(0.5, 2.0, 0.0, 0.5, 16.0, 0.0, 1.0, 0.15);
    /// Material network.
    pub const AGENT4: Self = Self::preset(0.5, 0.0, 0.25, 0.5, 0.0, 2.0, 1.0, 0.15);

    /// Weights in the order progress, W dense, M dense, D dense, W sparse,
    /// M sparse, D sparse, failure.
    #[allow(clippy::too_many_arguments)]
    pub const fn preset(
        progress: f64,
        labor_dense: f64,
        material_dense: f64,
        deadline_dense: f64,
        labor_sparse: f64,
        material_sparse: f64,
        deadline_sparse: f64,
        failure: f64,
    ) -> Self {
        Self {
            progress,
            labor_dense,
            material_dense,
            deadline_dense,
            labor_sparse,
            material_sparse,
            deadline_sparse,
            failure,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.progress,
            self.labor_dense,
            self.material_dense,
            self.deadline_dense,
            self.labor_sparse,
            self.material_sparse,
            self.deadline_sparse,
            self.failure,
        ]
        .iter()
        .all(|w| w.is_finite() && *w >= 0.0)
    }
}

/// The eight reward components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub progress: f64,
    pub deadline_dense: f64,
    pub labor_dense: f64,
    pub material_dense: f64,
    pub failure: f64,
    pub deadline_sparse: f64,
    pub labor_sparse: f64,
    pub material_sparse: f64,
    pub total: f64,
}

/// Reward for the transition `prev -> state`. `state.t` is the day after the
/// action, so `state.t - 1` is the number of days worked.
pub fn reward(
    prev: &State,
    state: &State,
    status: StepStatus,
    weights: &RewardWeights,
    params: &ModelParams,
) -> RewardBreakdown {
    let total_area = params.total_area();
    let max_t = params.max_days as f64;
    let t = state.t as f64;
    let milestones = params.total_milestone_pay();
    let cash_delta = (state.cash - prev.cash) / milestones;
    let completed = status == StepStatus::Completed;

    let deadline_dense = if t < 0.7 * max_t {
        0.0
    } else if t < 0.85 * max_t {
        -1.0 / max_t
    } else {
        -4.0 / max_t
    };
    // late completion only: finishing before 70% of the limit is not penalized
    let deadline_sparse = if completed {
        (0.7 - (t - 1.0) / max_t).min(0.0)
    } else {
        0.0
    };
    let (labor_sparse, material_sparse) = if completed {
        (
            (params.wage_ratio * milestones - state.labor_cost).max(0.0) / milestones,
            (params.material_ratio * milestones - state.material_cost).max(0.0) / milestones,
        )
    } else {
        (0.0, 0.0)
    };

    let mut r = RewardBreakdown {
        progress: (state.area[CONCRETE] - prev.area[CONCRETE]) / total_area,
        deadline_dense,
        labor_dense: params.wage_ratio * cash_delta,
        material_dense: params.material_ratio * cash_delta,
        failure: if status.is_failure() { -1.0 } else { 0.0 },
        deadline_sparse,
        labor_sparse,
        material_sparse,
        total: 0.0,
    };
    r.total = weights.progress * r.progress
        + weights.deadline_dense * r.deadline_dense
        + weights.labor_dense * r.labor_dense
        + weights.material_dense * r.material_dense
        + weights.failure * r.failure
        + weights.deadline_sparse * r.deadline_sparse
        + weights.labor_sparse * r.labor_sparse
        + weights.material_sparse * r.material_sparse;
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::init_state;
    use crate::exogenous::{sample_year, BaselineParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base() -> (ModelParams, State) {
        let p = ModelParams::default();
        let c = sample_year(
            &BaselineParams::default(),
            p.start_day,
            20,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let s = init_state(&p, &c).unwrap();
        (p, s)
    }

    #[test]
    fn one_floor_of_progress() {
        let (p, prev) = base();
        let mut s = prev.clone();
        s.t = 2;
        s.area[CONCRETE] = 600.0;
        let r = reward(&prev, &s, StepStatus::Running, &RewardWeights::AGENT1, &p);
        assert!((r.progress - 0.04).abs() < 1e-15);
    }

    #[test]
    fn failure_costs_weighted_penalty() {
        let (p, prev) = base();
        let mut s = prev.clone();
        s.t = 2;
        let r = reward(
            &prev,
            &s,
            StepStatus::FailedCost,
            &RewardWeights::AGENT1,
            &p,
        );
        assert_eq!(r.failure, -1.0);
        assert!((RewardWeights::AGENT1.failure * r.failure + 0.15).abs() < 1e-15);
    }

    #[test]
    fn late_days_carry_dense_deadline_penalty() {
        let (p, prev) = base();
        let mut s = prev.clone();
        s.t = 130;
        let r = reward(&prev, &s, StepStatus::Running, &RewardWeights::AGENT1, &p);
        assert!((r.deadline_dense + 4.0 / 150.0).abs() < 1e-15);
        s.t = 110;
        let r = reward(&prev, &s, StepStatus::Running, &RewardWeights::AGENT1, &p);
        assert!((r.deadline_dense + 1.0 / 150.0).abs() < 1e-15);
        s.t = 104;
        let r = reward(&prev, &s, StepStatus::Running, &RewardWeights::AGENT1, &p);
        assert_eq!(r.deadline_dense, 0.0);
    }

    #[test]
    fn early_completion_is_unpunished() {
        let (p, prev) = base();
        let mut s = prev.clone();
        s.t = 91;
        s.area[CONCRETE] = p.total_area();
        let r = reward(&prev, &s, StepStatus::Completed, &RewardWeights::AGENT1, &p);
        assert_eq!(r.deadline_sparse, 0.0);
        s.t = 121;
        let r = reward(&prev, &s, StepStatus::Completed, &RewardWeights::AGENT1, &p);
        assert!((r.deadline_sparse - (0.7 - 0.8)).abs() < 1e-12);
    }

    #[test]
    fn savings_bonus_on_completion() {
        let (p, prev) = base();
        let mut s = prev.clone();
        s.t = 90;
        s.labor_cost = 722_330.0;
        s.material_cost = 7_361_130.0;
        let r = reward(&prev, &s, StepStatus::Completed, &RewardWeights::AGENT1, &p);
        assert!((r.labor_sparse - (1e6 - 722_330.0) / 1e7).abs() < 1e-12);
        assert!((r.material_sparse - (9e6 - 7_361_130.0) / 1e7).abs() < 1e-12);
        let r = reward(&prev, &s, StepStatus::Running, &RewardWeights::AGENT1, &p);
        assert_eq!(r.labor_sparse, 0.0);
        assert_eq!(r.material_sparse, 0.0);
    }

    #[test]
    fn presets_are_valid() {
        for w in [
            RewardWeights::AGENT1,
            RewardWeights::AGENT2,
            RewardWeights::AGENT3,
            RewardWeights::AGENT4,
        ] {
            assert!(w.is_valid());
        }
    }
}
