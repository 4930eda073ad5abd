//! On-policy training: rollout collection, generalized advantage estimation
//! and clipped-surrogate policy updates.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{entropy, log_prob, ActMode, Agent, AgentKind};
use crate::checkpoint::Checkpoint;
use crate::env::StepStatus;
use crate::episode::Simulation;
use crate::error::{Error, Result};
use crate::exogenous::BaselineParams;
use crate::neural::{Adam, Architecture, BundleGrads, NetworkBundle};
use crate::observe::Observation;
use crate::reward::{reward, RewardWeights};
use crate::rollout::run_episode;
use crate::scenario::ModelParams;

const INIT_STREAM: u64 = 10;
const EPISODE_STREAM: u64 = 11;
const POLICY_STREAM: u64 = 12;
const BATCH_STREAM: u64 = 13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// samples collected per update
    pub horizon: usize,
    /// samples per minibatch
    pub batch: usize,
    /// passes over the collected samples per update
    pub epochs: usize,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    /// surrogate clip range
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub updates: usize,
    pub seed: u64,
    /// write a checkpoint every this many updates (and after the last)
    pub checkpoint_every: usize,
    pub normalize_advantages: bool,
    pub minibatching: Minibatching,
    pub arch: Architecture,
}

/// How each epoch picks its minibatches from the collected samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Minibatching {
    /// shuffle, then step on every consecutive chunk of `batch` samples
    Sweep,
    /// one uniform draw of `batch` samples, one step
    SingleDraw,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            horizon: 1024,
            batch: 128,
            epochs: 16,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 1e-4,
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            updates: 500,
            seed: 0,
            checkpoint_every: 20,
            normalize_advantages: true,
            minibatching: Minibatching::Sweep,
            arch: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(0.0..=1.0).contains(&self.gamma) {
            bad.push("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            bad.push("lambda must lie in [0, 1]");
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            bad.push("clip must be positive");
        }
        if self.batch == 0 || self.batch > self.horizon {
            bad.push("batch must lie in 1..=horizon");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            bad.push("learning_rate must be positive");
        }
        if self.checkpoint_every == 0 {
            bad.push("checkpoint_every must be positive");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }
}

/// Per-network slice of a rollout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stream {
    /// normalized actions taken
    pub actions: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub logp: Vec<f64>,
    /// value of the observation after the last sample, 0 if it was terminal
    pub bootstrap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    /// normalized observations as the policy saw them
    pub obs: Vec<Vec<f64>>,
    pub episode: Vec<u64>,
    /// the sample ended its episode
    pub terminal: Vec<bool>,
    pub streams: Vec<Stream>,
}

impl RolloutBuffer {
    pub fn new(streams: usize) -> Self {
        Self {
            streams: vec![Stream::default(); streams],
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn clear(&mut self) {
        let n = self.streams.len();
        *self = Self::new(n);
    }
}

/// Outcome of one finished training episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    /// cumulative reward of the first network's stream
    pub reward: f64,
    pub duration: usize,
    pub completed: bool,
}

/// Targets and advantages for one stream. Credit never crosses a terminal
/// sample; a running episode cut by the end of the buffer is bootstrapped.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    terminal: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = if terminal[t] {
            (0.0, 0.0)
        } else if t + 1 == n {
            (bootstrap, 0.0)
        } else {
            (values[t + 1], running)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * carry;
        adv[t] = running;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (targets, adv)
}

/// Clipped surrogate and its derivative with respect to the ratio.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// share of samples whose ratio left the clip range
    pub clip_fraction: f64,
}

/// Minibatch updates of one network on its stream.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut NetworkBundle,
    adam: &mut Adam,
    obs: &[Vec<f64>],
    stream: &Stream,
    targets: &[f64],
    advantages: &[f64],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<LossStats> {
    let n = obs.len();
    let batch = cfg.batch.min(n);
    if batch == 0 {
        return Ok(LossStats::default());
    }
    let adv: Vec<f64> = if cfg.normalize_advantages {
        let mean = advantages.iter().sum::<f64>() / n as f64;
        let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt().max(1e-8);
        advantages.iter().map(|a| (a - mean) / sd).collect()
    } else {
        advantages.to_vec()
    };
    let mut total = LossStats::default();
    let mut steps = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        let chunks: Vec<&[usize]> = match cfg.minibatching {
            Minibatching::Sweep => {
                order.shuffle(rng);
                order.chunks(batch).collect()
            }
            Minibatching::SingleDraw => {
                let (picked, _) = order.partial_shuffle(rng, batch);
                vec![&*picked]
            }
        };
        for idx in chunks {
            let stats = minibatch_step(net, adam, obs, stream, targets, &adv, idx, cfg)?;
            total.policy_loss += stats.policy_loss;
            total.value_loss += stats.value_loss;
            total.entropy += stats.entropy;
            total.clip_fraction += stats.clip_fraction;
            steps += 1;
        }
    }
    let k = steps.max(1) as f64;
    total.policy_loss /= k;
    total.value_loss /= k;
    total.entropy /= k;
    total.clip_fraction /= k;
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn minibatch_step(
    net: &mut NetworkBundle,
    adam: &mut Adam,
    obs: &[Vec<f64>],
    stream: &Stream,
    targets: &[f64],
    adv: &[f64],
    idx: &[usize],
    cfg: &TrainConfig,
) -> Result<LossStats> {
    let scale = 1.0 / idx.len() as f64;
    let mut grads = BundleGrads::zeros_like(net);
    let mut stats = LossStats::default();
    let sigma2: Vec<f64> = net.logstd.iter().map(|s| (2.0 * s).exp()).collect();
    let dim = net.logstd.len();
    let flat: Vec<f64> = idx.iter().flat_map(|&i| obs[i].iter().copied()).collect();
    let (out, cache) = net.forward_batch(&flat, idx.len())?;
    let mut d_mean = vec![0.0; idx.len() * dim];
    let mut d_value = vec![0.0; idx.len()];
    let mut d_logstd = vec![0.0; dim];
    for (r, &i) in idx.iter().enumerate() {
        let mean = &out.means[r * dim..(r + 1) * dim];
        let a = &stream.actions[i];
        let logp = log_prob(a, mean, &net.logstd);
        let ratio = (logp - stream.logp[i]).exp();
        let (surr, d_surr) = clipped_surrogate(ratio, adv[i], cfg.clip);
        if (ratio - 1.0).abs() > cfg.clip {
            stats.clip_fraction += scale;
        }
        let err = out.values[r] - targets[i];
        stats.policy_loss -= surr * scale;
        stats.value_loss += err * err * scale;
        // d(-surr)/dlogp, chained through logp = Σ log N(a; mean, σ)
        let g_logp = -d_surr * ratio * scale;
        for j in 0..dim {
            let z = a[j] - mean[j];
            d_mean[r * dim + j] = g_logp * z / sigma2[j];
            d_logstd[j] += g_logp * (z * z / sigma2[j] - 1.0);
        }
        d_value[r] = cfg.value_coef * 2.0 * err * scale;
    }
    net.backward_batch(&cache, &d_mean, &d_value, &d_logstd, &mut grads)?;
    stats.entropy = entropy(&net.logstd);
    for g in &mut grads.logstd {
        *g -= cfg.entropy_coef;
    }
    let loss =
        stats.policy_loss + cfg.value_coef * stats.value_loss - cfg.entropy_coef * stats.entropy;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!(
            "loss {loss} (policy {}, value {}, entropy {})",
            stats.policy_loss, stats.value_loss, stats.entropy
        )));
    }
    adam.step(&mut net.param_slices_mut(), &grads.slices())?;
    Ok(stats)
}

/// One point of the training curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateRecord {
    pub update: usize,
    pub mean_reward: f64,
    pub mean_duration: f64,
    pub completion_rate: f64,
    pub episodes: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

pub fn write_curve<W: Write>(rows: &[UpdateRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn stream_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Training state of one network agent.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub agent: Agent,
    params: Arc<ModelParams>,
    baseline: Arc<BaselineParams>,
    weights: Vec<RewardWeights>,
    optimizers: Vec<Adam>,
    sim: Option<Simulation>,
    pending: Option<Observation>,
    episode_id: u64,
    episode_reward: f64,
    episode_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
    batch_rng: ChaCha8Rng,
    pub updates_done: usize,
}

impl Trainer {
    pub fn new(
        kind: AgentKind,
        params: Arc<ModelParams>,
        baseline: Arc<BaselineParams>,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if !kind.is_network() {
            return Err(Error::Usage(format!(
                "agent `{kind}` has no network to train"
            )));
        }
        let agent = Agent::new(
            kind,
            (*params).clone(),
            cfg.arch,
            &mut stream_rng(cfg.seed, INIT_STREAM),
        );
        Ok(Self::from_agent(agent, params, baseline, cfg))
    }

    /// Continues training an existing agent.
    pub fn from_agent(
        agent: Agent,
        params: Arc<ModelParams>,
        baseline: Arc<BaselineParams>,
        cfg: TrainConfig,
    ) -> Self {
        let optimizers = agent
            .networks
            .iter()
            .map(|_| Adam::new(cfg.learning_rate))
            .collect();
        Self {
            weights: agent.kind.reward_weights(),
            optimizers,
            sim: None,
            pending: None,
            episode_id: 0,
            episode_reward: 0.0,
            episode_rng: stream_rng(cfg.seed, EPISODE_STREAM),
            policy_rng: stream_rng(cfg.seed, POLICY_STREAM),
            batch_rng: stream_rng(cfg.seed, BATCH_STREAM),
            updates_done: 0,
            agent,
            params,
            baseline,
            cfg,
        }
    }

    /// Observation of the current day, counted once in the normalization
    /// statistics however often it is read.
    fn current_obs(&mut self) -> Result<Observation> {
        if self.sim.is_none() {
            let seed = self.episode_rng.next_u64();
            self.sim = Some(Simulation::new(
                self.params.clone(),
                self.baseline.clone(),
                seed,
            )?);
            self.episode_reward = 0.0;
        }
        if let Some(o) = &self.pending {
            return Ok(o.clone());
        }
        let o = self.sim.as_mut().expect("created above").observe()?;
        self.agent.norm.update(o.as_slice());
        self.pending = Some(o.clone());
        Ok(o)
    }

    /// Gathers `horizon` samples, running episodes back to back. An episode
    /// cut by the horizon continues in the next collection.
    pub fn collect(&mut self) -> Result<(RolloutBuffer, Vec<EpisodeStats>)> {
        let mut buf = RolloutBuffer::new(self.agent.networks.len());
        let mut finished = Vec::new();
        while buf.len() < self.cfg.horizon {
            let obs = self.current_obs()?;
            let x = self.agent.normalize(&obs);
            let (action, outs) =
                self.agent
                    .act_normalized(&obs, &x, &mut self.policy_rng, ActMode::Sample)?;
            let sim = self.sim.as_mut().expect("created by current_obs");
            let tr = sim.step(&action)?;
            self.pending = None;
            let terminal = tr.status.is_terminal();
            buf.obs.push(x);
            buf.episode.push(self.episode_id);
            buf.terminal.push(terminal);
            for (k, out) in outs.into_iter().enumerate() {
                let r = reward(
                    &tr.prev,
                    &sim.state,
                    tr.status,
                    &self.weights[k],
                    &self.params,
                );
                if k == 0 {
                    self.episode_reward += r.total;
                }
                let s = &mut buf.streams[k];
                s.actions.push(out.action);
                s.values.push(out.value);
                s.rewards.push(r.total);
                s.logp.push(out.logp);
            }
            if terminal {
                finished.push(EpisodeStats {
                    reward: self.episode_reward,
                    duration: sim.duration(),
                    completed: tr.status == StepStatus::Completed,
                });
                self.sim = None;
                self.episode_id += 1;
            }
        }
        if self.sim.is_some() {
            let obs = self.current_obs()?;
            let values = self.agent.values(&obs)?;
            for (s, v) in buf.streams.iter_mut().zip(values) {
                s.bootstrap = v;
            }
        }
        Ok((buf, finished))
    }

    /// Advantage estimation and minibatch updates for every network.
    pub fn update(&mut self, buf: &RolloutBuffer) -> Result<Vec<LossStats>> {
        let mut out = Vec::with_capacity(buf.streams.len());
        for (k, s) in buf.streams.iter().enumerate() {
            let (targets, adv) = gae(
                &s.rewards,
                &s.values,
                &buf.terminal,
                s.bootstrap,
                self.cfg.gamma,
                self.cfg.lambda,
            );
            out.push(ppo_update(
                &mut self.agent.networks[k],
                &mut self.optimizers[k],
                &buf.obs,
                s,
                &targets,
                &adv,
                &self.cfg,
                &mut self.batch_rng,
            )?);
        }
        self.updates_done += 1;
        Ok(out)
    }

    /// One collect-and-update cycle.
    pub fn step(&mut self) -> Result<UpdateRecord> {
        let (mut buf, finished) = self.collect()?;
        let losses = self.update(&buf)?;
        buf.clear();
        let n = finished.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EpisodeStats) -> f64| {
            if finished.is_empty() {
                f64::NAN
            } else {
                finished.iter().map(f).sum::<f64>() / n
            }
        };
        Ok(UpdateRecord {
            update: self.updates_done,
            mean_reward: mean(&|e| e.reward),
            mean_duration: mean(&|e| e.duration as f64),
            completion_rate: mean(&|e| if e.completed { 1.0 } else { 0.0 }),
            episodes: finished.len(),
            policy_loss: losses[0].policy_loss,
            value_loss: losses[0].value_loss,
            entropy: losses[0].entropy,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_agent(&self.agent, self.updates_done as u64)
    }
}

pub fn checkpoint_path(dir: &Path, update: usize) -> PathBuf {
    dir.join(format!("checkpoint_{update:05}.bin"))
}

/// Highest-numbered checkpoint in `dir`.
pub fn latest_checkpoint(dir: &Path) -> Result<PathBuf> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut best: Option<PathBuf> = None;
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("checkpoint_")
            && name.ends_with(".bin")
            && best.as_ref().is_none_or(|b| p > *b)
        {
            best = Some(p);
        }
    }
    best.ok_or_else(|| Error::MissingCheckpoint(dir.join("checkpoint_*.bin")))
}

pub struct TrainOutcome {
    pub agent: Agent,
    pub curve: Vec<UpdateRecord>,
    pub checkpoints: Vec<PathBuf>,
}

/// Runs the configured number of updates. With `out_dir`, checkpoints and
/// `reward_curve.csv` are written there.
pub fn train<F>(
    kind: AgentKind,
    params: Arc<ModelParams>,
    baseline: Arc<BaselineParams>,
    cfg: TrainConfig,
    out_dir: Option<&Path>,
    mut progress: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&UpdateRecord),
{
    let mut trainer = Trainer::new(kind, params, baseline, cfg)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut curve = Vec::with_capacity(trainer.cfg.updates);
    let mut checkpoints = Vec::new();
    for u in 1..=trainer.cfg.updates {
        let rec = trainer.step()?;
        progress(&rec);
        curve.push(rec);
        if let Some(dir) = out_dir {
            if u % trainer.cfg.checkpoint_every == 0 || u == trainer.cfg.updates {
                let path = checkpoint_path(dir, u);
                trainer.checkpoint().save(&path)?;
                checkpoints.push(path);
            }
        }
    }
    if let Some(dir) = out_dir {
        let path = dir.join("reward_curve.csv");
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_curve(&curve, f)?;
    }
    Ok(TrainOutcome {
        agent: trainer.agent,
        curve,
        checkpoints,
    })
}

/// Held-out simulation seeds used to rank training runs; disjoint from the
/// usual evaluation seeds 0-4.
pub const VALIDATION_SEEDS: [u64; 5] = [1000, 1001, 1002, 1003, 1004];

/// Mean reward of mean-mode episodes on `seeds`, scored with the agent's
/// own weights.
pub fn validation_reward(
    agent: &Agent,
    params: &Arc<ModelParams>,
    baseline: &Arc<BaselineParams>,
    seeds: &[u64],
) -> Result<f64> {
    let weights = agent.kind.score_weights();
    let mut total = 0.0;
    for &seed in seeds {
        let run = run_episode(
            agent,
            params.clone(),
            baseline.clone(),
            seed,
            ActMode::Mean,
            &weights,
        )?;
        total += run.summary.total_reward;
    }
    Ok(total / seeds.len().max(1) as f64)
}

pub struct BestOf {
    pub seed: u64,
    pub outcome: TrainOutcome,
    /// (seed, validation reward) for every run, in run order
    pub scores: Vec<(u64, f64)>,
}

/// Trains once per seed and keeps the run whose final agent scores the
/// highest [`validation_reward`] on [`VALIDATION_SEEDS`]. With `out_dir`,
/// run `s` writes into `out_dir/seed_<s>`.
pub fn train_best_of<F>(
    kind: AgentKind,
    params: Arc<ModelParams>,
    baseline: Arc<BaselineParams>,
    cfg: TrainConfig,
    seeds: &[u64],
    out_dir: Option<&Path>,
    mut progress: F,
) -> Result<BestOf>
where
    F: FnMut(u64, &UpdateRecord),
{
    if seeds.is_empty() {
        return Err(Error::Usage(
            "best-of training needs at least one seed".into(),
        ));
    }
    let mut best: Option<(u64, f64, TrainOutcome)> = None;
    let mut scores = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let dir = out_dir.map(|d| d.join(format!("seed_{seed}")));
        let outcome = train(
            kind,
            params.clone(),
            baseline.clone(),
            TrainConfig {
                seed,
                ..cfg.clone()
            },
            dir.as_deref(),
            |r| progress(seed, r),
        )?;
        let score = validation_reward(&outcome.agent, &params, &baseline, &VALIDATION_SEEDS)?;
        scores.push((seed, score));
        if best.as_ref().is_none_or(|(_, b, _)| score > *b) {
            best = Some((seed, score, outcome));
        }
    }
    let (seed, _, outcome) = best.expect("at least one seed");
    Ok(BestOf {
        seed,
        outcome,
        scores,
    })
}
