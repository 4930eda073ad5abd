//! Decision policies: the static rule policy human managers use, and the
//! network agents (pure or hybrid with the rule policy).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::error::{Error, Result};
use crate::neural::{Architecture, NetworkBundle, PolicyHead};
use crate::observe::{ActionScaling, NormStats, Observation, OBS_DIM};
use crate::reward::RewardWeights;
use crate::scenario::{ModelParams, FORMWORK};

/// Observation slot holding the formwork stock.
const FORMWORK_STOCK_SLOT: usize = 7 + FORMWORK;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Hours per day that keep each trade at a third of a floor per day, with
/// one hour of slack.
pub fn empirical_work_hours(p: &ModelParams) -> [f64; 3] {
    let floor = p.floor_area();
    std::array::from_fn(|i| {
        let h = (floor / (3.0 * p.area_per_worker_hour[i] * p.workers[i])).ceil() + 1.0;
        h.clamp(p.min_work_hours, p.max_work_hours)
    })
}

/// Per-day material need for a third of a floor, plus one unit.
pub fn empirical_daily_need(p: &ModelParams, m: usize) -> f64 {
    (p.floor_area() / (3.0 * p.area_per_unit[m])).ceil() + 1.0
}

/// Rebar and concrete every day; formwork topped up by half the storage
/// capacity whenever stock drops below a day's need.
pub fn empirical_material_order(formwork_stock: f64, p: &ModelParams) -> [f64; 3] {
    let fw = if formwork_stock < empirical_daily_need(p, FORMWORK) {
        0.5 * p.max_stock[FORMWORK]
    } else {
        0.0
    };
    let raw = [empirical_daily_need(p, 0), fw, empirical_daily_need(p, 2)];
    std::array::from_fn(|i| raw[i].clamp(0.0, p.max_order[i]))
}

pub fn empirical_action(formwork_stock: f64, p: &ModelParams) -> Action {
    Action::new(
        empirical_work_hours(p),
        empirical_material_order(formwork_stock, p),
    )
}

/// Gaussian log-density summed over dimensions.
pub fn log_prob(a: &[f64], mean: &[f64], logstd: &[f64]) -> f64 {
    a.iter()
        .zip(mean)
        .zip(logstd)
        .map(|((a, m), s)| {
            let z = (a - m) * (-s).exp();
            -0.5 * LN_2PI - s - 0.5 * z * z
        })
        .sum()
}

/// Differential entropy of the diagonal Gaussian.
pub fn entropy(logstd: &[f64]) -> f64 {
    logstd.iter().map(|s| 0.5 * (LN_2PI + 1.0) + s).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Empirical,
    /// full policy network; the preset selects reward weights 1 or 2
    Sfpn(u8),
    /// work-hour network, rule-based orders
    Swpn,
    /// material network, rule-based work hours
    Smpn,
    /// work-hour and material networks side by side
    Dpn,
}

impl AgentKind {
    pub const ALL: [AgentKind; 6] = [
        AgentKind::Empirical,
        AgentKind::Sfpn(1),
        AgentKind::Sfpn(2),
        AgentKind::Swpn,
        AgentKind::Smpn,
        AgentKind::Dpn,
    ];

    /// Policy heads of the agent's networks, in action order.
    pub fn heads(self) -> &'static [PolicyHead] {
        match self {
            AgentKind::Empirical => &[],
            AgentKind::Sfpn(_) => &[PolicyHead::Full],
            AgentKind::Swpn => &[PolicyHead::WorkHours],
            AgentKind::Smpn => &[PolicyHead::Material],
            AgentKind::Dpn => &[PolicyHead::WorkHours, PolicyHead::Material],
        }
    }

    /// Reward weights each network trains on. The rule policy is scored
    /// with the balanced preset.
    pub fn reward_weights(self) -> Vec<RewardWeights> {
        match self {
            AgentKind::Empirical | AgentKind::Sfpn(1) => vec![RewardWeights::AGENT1],
            AgentKind::Sfpn(_) => vec![RewardWeights::AGENT2],
            AgentKind::Swpn => vec![RewardWeights::AGENT3],
            AgentKind::Smpn => vec![RewardWeights::AGENT4],
            AgentKind::Dpn => vec![RewardWeights::AGENT3, RewardWeights::AGENT4],
        }
    }

    /// Weights used to score whole-episode reward in reports.
    pub fn score_weights(self) -> RewardWeights {
        self.reward_weights()[0]
    }

    pub fn is_network(self) -> bool {
        !self.heads().is_empty()
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentKind::Empirical => f.write_str("empirical"),
            AgentKind::Sfpn(k) => write!(f, "sfpn{k}"),
            AgentKind::Swpn => f.write_str("swpn"),
            AgentKind::Smpn => f.write_str("smpn"),
            AgentKind::Dpn => f.write_str("dpn"),
        }
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "empirical" | "rule" => Ok(AgentKind::Empirical),
            "sfpn" | "sfpn1" => Ok(AgentKind::Sfpn(1)),
            "sfpn2" => Ok(AgentKind::Sfpn(2)),
            "swpn" => Ok(AgentKind::Swpn),
            "smpn" => Ok(AgentKind::Smpn),
            "dpn" => Ok(AgentKind::Dpn),
            _ => Err(Error::Usage(format!(
                "unknown agent `{s}` (expected empirical, sfpn1, sfpn2, swpn, smpn, dpn)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    Mean,
}

/// What one network produced for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub logstd: Vec<f64>,
    pub value: f64,
    /// normalized action actually taken
    pub action: Vec<f64>,
    pub logp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub kind: AgentKind,
    pub networks: Vec<NetworkBundle>,
    pub norm: NormStats,
    pub scaling: ActionScaling,
    pub params: ModelParams,
}

impl Agent {
    pub fn empirical(params: ModelParams) -> Self {
        Self::from_parts(AgentKind::Empirical, Vec::new(), params)
    }

    /// Fresh agent with randomly initialized networks.
    pub fn new<R: Rng + ?Sized>(
        kind: AgentKind,
        params: ModelParams,
        arch: Architecture,
        rng: &mut R,
    ) -> Self {
        let networks = kind
            .heads()
            .iter()
            .map(|&h| NetworkBundle::initialized(h, arch, rng))
            .collect();
        Self::from_parts(kind, networks, params)
    }

    pub fn from_parts(kind: AgentKind, networks: Vec<NetworkBundle>, params: ModelParams) -> Self {
        Self {
            kind,
            networks,
            norm: NormStats::new(OBS_DIM),
            scaling: ActionScaling::from_params(&params),
            params,
        }
    }

    pub fn normalize(&self, obs: &Observation) -> Vec<f64> {
        self.norm.normalize(obs.as_slice())
    }

    /// Chooses today's action from a raw observation.
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        rng: &mut R,
        mode: ActMode,
    ) -> Result<(Action, Vec<PolicyOutput>)> {
        if self.networks.is_empty() {
            return Ok((
                empirical_action(obs.0[FORMWORK_STOCK_SLOT], &self.params),
                Vec::new(),
            ));
        }
        let x = self.normalize(obs);
        self.act_normalized(obs, &x, rng, mode)
    }

    /// Like [`Agent::act`] with the normalized observation `x` supplied by
    /// the caller; `obs` still feeds the rule-based half.
    pub fn act_normalized<R: Rng + ?Sized>(
        &self,
        obs: &Observation,
        x: &[f64],
        rng: &mut R,
        mode: ActMode,
    ) -> Result<(Action, Vec<PolicyOutput>)> {
        let mut action = empirical_action(obs.0[FORMWORK_STOCK_SLOT], &self.params);
        let mut arr = action.to_array();
        let mut outs = Vec::with_capacity(self.networks.len());
        for net in &self.networks {
            let (out, _) = net.forward(x)?;
            let a: Vec<f64> = match mode {
                ActMode::Mean => out.mean.clone(),
                ActMode::Sample => out
                    .mean
                    .iter()
                    .zip(&net.logstd)
                    .map(|(m, s)| m + s.exp() * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            };
            for (k, i) in net.head.action_range().enumerate() {
                arr[i] = self.scaling.denormalize_dim(i, a[k]);
            }
            outs.push(PolicyOutput {
                logp: log_prob(&a, &out.mean, &net.logstd),
                mean: out.mean,
                logstd: net.logstd.clone(),
                value: out.value,
                action: a,
            });
        }
        action = Action::from_array(arr);
        Ok((action, outs))
    }

    /// Value estimates of every network for a raw observation.
    pub fn values(&self, obs: &Observation) -> Result<Vec<f64>> {
        let x = self.normalize(obs);
        self.networks
            .iter()
            .map(|n| n.forward(&x).map(|(o, _)| o.value))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rule_work_hours_scenario_zero() {
        assert_eq!(empirical_work_hours(&ModelParams::default()), [8.0; 3]);
    }

    #[test]
    fn rule_orders_scenario_zero() {
        let p = ModelParams::default();
        let b = empirical_material_order(5_000.0, &p);
        assert_eq!(b, [131.0, 0.0, 68.0]);
        let b = empirical_material_order(100.0, &p);
        assert_eq!(b[FORMWORK], 1_000.0);
    }

    #[test]
    fn log_prob_at_mean() {
        let lp = log_prob(&[0.3; 6], &[0.3; 6], &[0.0; 6]);
        assert!((lp + 5.513_631_199_228_036).abs() < 1e-12);
    }

    #[test]
    fn log_prob_one_sigma() {
        let s: f64 = -0.4;
        let lp = log_prob(&[0.1 + s.exp()], &[0.1], &[s]);
        assert!((lp - (-0.5 * LN_2PI - s - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        let (m, s) = (0.2, -0.3_f64);
        let h = 1e-3;
        let mut total = 0.0;
        let mut x = m - 12.0 * s.exp();
        while x < m + 12.0 * s.exp() {
            total += log_prob(&[x + 0.5 * h], &[m], &[s]).exp() * h;
            x += h;
        }
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn agent_names_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(k.to_string().parse::<AgentKind>().unwrap(), k);
        }
        assert!("ppo".parse::<AgentKind>().is_err());
    }

    #[test]
    fn hybrid_halves_follow_the_rule() {
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut obs = Observation([0.0; OBS_DIM]);
        obs.0[FORMWORK_STOCK_SLOT] = 300.0;
        let rule = empirical_action(300.0, &p);
        let swpn = Agent::new(
            AgentKind::Swpn,
            p.clone(),
            Architecture::default(),
            &mut rng,
        );
        let smpn = Agent::new(
            AgentKind::Smpn,
            p.clone(),
            Architecture::default(),
            &mut rng,
        );
        for _ in 0..20 {
            let (a, _) = swpn.act(&obs, &mut rng, ActMode::Sample).unwrap();
            assert_eq!(a.orders, rule.orders);
            assert!(a.within_bounds(&p));
            let (a, _) = smpn.act(&obs, &mut rng, ActMode::Sample).unwrap();
            assert_eq!(a.work_hours, rule.work_hours);
            assert!(a.within_bounds(&p));
        }
    }

    #[test]
    fn mean_mode_is_repeatable() {
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = Agent::new(AgentKind::Dpn, p, Architecture::default(), &mut rng);
        agent.networks[0].logstd = vec![1.5; 3];
        let obs = Observation([1.0; OBS_DIM]);
        let (a1, o1) = agent.act(&obs, &mut rng, ActMode::Mean).unwrap();
        let (a2, _) = agent.act(&obs, &mut rng, ActMode::Mean).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(o1.len(), 2);
    }
}
