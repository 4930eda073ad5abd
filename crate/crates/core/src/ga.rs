//! Genetic-algorithm baseline: the whole action trajectory as one bit string.
//!
//! Each day takes 14 bits, most significant bit first within every field:
//! three 2-bit work-hour codes, a 3-bit rebar code, a 3-bit formwork code
//! and a 2-bit concrete code.

use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::episode::Simulation;
use crate::error::{Error, Result};
use crate::exogenous::BaselineParams;
use crate::reward::RewardWeights;
use crate::rollout::{run_with, EpisodeRun};
use crate::scenario::ModelParams;

pub const BITS_PER_DAY: usize = 14;

const WH_LEVELS: [f64; 4] = [4.0, 8.0, 10.0, 12.0];
/// field widths in bits: wh ×3, rebar, formwork, concrete
const FIELDS: [usize; 6] = [2, 2, 2, 3, 3, 2];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chromosome(pub Vec<bool>);

impl Chromosome {
    pub fn len_for(params: &ModelParams) -> usize {
        params.max_days as usize * BITS_PER_DAY
    }

    pub fn zeros(params: &ModelParams) -> Self {
        Self(vec![false; Self::len_for(params)])
    }

    pub fn random<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Self {
        Self((0..Self::len_for(params)).map(|_| rng.random()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bits as a `0`/`1` string.
    pub fn to_bit_string(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Usage(format!("invalid chromosome character `{c}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

fn level_value(field: usize, code: usize, p: &ModelParams) -> f64 {
    let levels = (1usize << FIELDS[field]) - 1;
    match field {
        0..=2 => WH_LEVELS[code],
        _ => p.max_order[field - 3] * code as f64 / levels as f64,
    }
}

fn nearest_code(field: usize, value: f64, p: &ModelParams) -> usize {
    (0..1usize << FIELDS[field])
        .min_by(|&a, &b| {
            let da = (level_value(field, a, p) - value).abs();
            let db = (level_value(field, b, p) - value).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(0)
}

/// Decodes one action per day.
pub fn decode(ch: &Chromosome, params: &ModelParams) -> Result<Vec<Action>> {
    let expected = Chromosome::len_for(params);
    if ch.len() != expected {
        return Err(Error::ChromosomeLength {
            expected,
            got: ch.len(),
        });
    }
    Ok(ch
        .0
        .chunks_exact(BITS_PER_DAY)
        .map(|day| {
            let mut a = [0.0; 6];
            let mut pos = 0;
            for (f, &w) in FIELDS.iter().enumerate() {
                let code = day[pos..pos + w]
                    .iter()
                    .fold(0usize, |acc, &b| (acc << 1) | b as usize);
                a[f] = level_value(f, code, params);
                pos += w;
            }
            Action::from_array(a).clamped(params)
        })
        .collect())
}

/// Encodes actions at their nearest grid points. Missing days are padded
/// with the all-zero code.
pub fn encode(actions: &[Action], params: &ModelParams) -> Chromosome {
    let days = params.max_days as usize;
    let mut bits = Vec::with_capacity(days * BITS_PER_DAY);
    for d in 0..days {
        let a = actions.get(d).map(Action::to_array);
        for (f, &w) in FIELDS.iter().enumerate() {
            let code = a.map_or(0, |a| nearest_code(f, a[f], params));
            bits.extend((0..w).rev().map(|i| code >> i & 1 == 1));
        }
    }
    Chromosome(bits)
}

/// Runs the decoded trajectory once, ignoring observations.
pub fn replay(
    actions: &[Action],
    params: Arc<ModelParams>,
    baseline: Arc<BaselineParams>,
    seed: u64,
    weights: &RewardWeights,
) -> Result<EpisodeRun> {
    let mut sim = Simulation::new(params, baseline, seed)?;
    run_with(&mut sim, seed, weights, |sim| {
        let day = sim.duration();
        Ok(actions[day.min(actions.len() - 1)])
    })
}

/// Mean total reward of the trajectory over the given simulation seeds.
pub fn evaluate(
    ch: &Chromosome,
    params: &Arc<ModelParams>,
    baseline: &Arc<BaselineParams>,
    weights: &RewardWeights,
    seeds: &[u64],
) -> Result<f64> {
    let actions = decode(ch, params)?;
    let mut total = 0.0;
    for &s in seeds {
        total += replay(&actions, params.clone(), baseline.clone(), s, weights)?
            .summary
            .total_reward;
    }
    Ok(total / seeds.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover: f64,
    /// per-bit flip probability; `None` means one over the chromosome length
    pub mutation: Option<f64>,
    pub tournament: usize,
    pub elites: usize,
    /// simulation seeds each individual is scored on
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 256,
            generations: 1024,
            crossover: 0.8,
            mutation: None,
            tournament: 2,
            elites: 1,
            repetitions: 3,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.population < 2 {
            return bad("ga population must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return bad("ga crossover probability must lie in [0, 1]");
        }
        if let Some(m) = self.mutation {
            if !(0.0..=1.0).contains(&m) {
                return bad("ga mutation probability must lie in [0, 1]");
            }
        }
        if self.tournament == 0 || self.tournament > self.population {
            return bad("ga tournament size must lie in 1..=population");
        }
        if self.elites > self.population {
            return bad("ga elite count exceeds the population");
        }
        if self.repetitions == 0 {
            return bad("ga needs at least one evaluation repetition");
        }
        Ok(())
    }

    /// Simulation seeds shared by every individual, so that fitness is a
    /// fixed function of the chromosome within one run.
    pub fn evaluation_seeds(&self) -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(20);
        (0..self.repetitions).map(|_| rng.random()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// best fitness seen so far
    pub best: f64,
    /// population mean
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: Chromosome,
    pub best_fitness: f64,
    pub history: Vec<GenerationRecord>,
}

fn tournament<'a, R: Rng + ?Sized>(
    pop: &'a [(Chromosome, f64)],
    k: usize,
    rng: &mut R,
) -> &'a Chromosome {
    let mut best: Option<&(Chromosome, f64)> = None;
    for _ in 0..k {
        let c = pop.choose(rng).expect("non-empty population");
        if best.is_none_or(|b| c.1 > b.1) {
            best = Some(c);
        }
    }
    &best.expect("k >= 1").0
}

/// Evolves trajectories; `progress` sees every generation record, the
/// initial population being generation 0.
pub fn evolve(
    cfg: &GaConfig,
    params: Arc<ModelParams>,
    baseline: Arc<BaselineParams>,
    weights: &RewardWeights,
    mut progress: impl FnMut(&GenerationRecord),
) -> Result<GaOutcome> {
    cfg.validate()?;
    let len = Chromosome::len_for(&params);
    let p_mut = cfg.mutation.unwrap_or(1.0 / len as f64);
    let seeds = cfg.evaluation_seeds();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(21);

    let score = |pop: Vec<Chromosome>| -> Result<Vec<(Chromosome, f64)>> {
        pop.into_par_iter()
            .map(|c| {
                let f = evaluate(&c, &params, &baseline, weights, &seeds)?;
                Ok((c, f))
            })
            .collect()
    };
    let initial = (0..cfg.population)
        .map(|_| Chromosome::random(&params, &mut rng))
        .collect();
    let mut pop = score(initial)?;
    let mut history = Vec::with_capacity(cfg.generations + 1);
    let mut best = pop
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .expect("population >= 2");
    let record = |g: usize, pop: &[(Chromosome, f64)], best: f64| GenerationRecord {
        generation: g,
        best,
        mean: pop.iter().map(|x| x.1).sum::<f64>() / pop.len() as f64,
    };
    history.push(record(0, &pop, best.1));
    progress(&history[0]);

    for g in 1..=cfg.generations {
        pop.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut next: Vec<Chromosome> = pop[..cfg.elites].iter().map(|x| x.0.clone()).collect();
        let elite_count = next.len();
        while next.len() < cfg.population {
            let mut a = tournament(&pop, cfg.tournament, &mut rng).clone();
            let mut b = tournament(&pop, cfg.tournament, &mut rng).clone();
            if rng.random::<f64>() < cfg.crossover {
                let cut = rng.random_range(1..len);
                a.0[cut..].swap_with_slice(&mut b.0[cut..]);
            }
            for c in [&mut a, &mut b] {
                for bit in c.0.iter_mut() {
                    if rng.random::<f64>() < p_mut {
                        *bit = !*bit;
                    }
                }
            }
            next.push(a);
            if next.len() < cfg.population {
                next.push(b);
            }
        }
        // elites keep their score; their fitness is deterministic
        let kept: Vec<(Chromosome, f64)> = pop.drain(..elite_count).collect();
        let fresh = score(next.split_off(elite_count))?;
        pop = kept.into_iter().chain(fresh).collect();
        if let Some(top) = pop.iter().max_by(|a, b| a.1.total_cmp(&b.1)) {
            if top.1 > best.1 {
                best = top.clone();
            }
        }
        history.push(record(g, &pop, best.1));
        progress(&history[g]);
    }
    Ok(GaOutcome {
        best: best.0,
        best_fitness: best.1,
        history,
    })
}
