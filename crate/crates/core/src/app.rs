//! Command implementations behind the `resflow` binary.
//!
//! A run config file is the scenario config document with two optional
//! extra tables, `[train]` and `[ga]`, holding trainer and GA settings.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::agents::{ActMode, Agent, AgentKind};
use crate::checkpoint::Checkpoint;
use crate::episode::DayLog;
use crate::error::{Error, Result};
use crate::exogenous::BaselineParams;
use crate::ga::{self, GaConfig, GaOutcome};
use crate::report::RunReport;
use crate::reward::RewardWeights;
use crate::rollout::run_episode;
use crate::scenario::{config_from_table, load_scenario, parse_table, ModelParams, ScenarioSpec};
use crate::trainer::{self, BestOf, TrainConfig, UpdateRecord};

/// Everything a command needs besides its flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec: ScenarioSpec,
    pub exogenous: BaselineParams,
    pub train: TrainConfig,
    pub ga: GaConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spec: ScenarioSpec::builtin(0),
            exogenous: BaselineParams::default(),
            train: TrainConfig::default(),
            ga: GaConfig::default(),
        }
    }
}

fn section<T: serde::de::DeserializeOwned + Default>(
    table: &mut toml::Table,
    key: &str,
) -> Result<T> {
    match table.remove(key) {
        None => Ok(T::default()),
        Some(toml::Value::Table(t)) => t
            .try_into()
            .map_err(|e| Error::Config(format!("[{key}]: {e}"))),
        Some(_) => Err(Error::Config(format!("`{key}` must be a table"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = parse_table(text)?;
        let train: TrainConfig = section(&mut table, "train")?;
        let ga: GaConfig = section(&mut table, "ga")?;
        train.validate()?;
        ga.validate()?;
        let cf = config_from_table(table)?;
        load_scenario(&cf.spec)?;
        Ok(Self {
            spec: cf.spec,
            exogenous: cf.exogenous,
            train,
            ga,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Replaces the scenario id, keeping field overrides.
    pub fn with_scenario(mut self, id: Option<&str>) -> Self {
        if let Some(id) = id {
            self.spec.id = id.parse().expect("infallible");
        }
        self
    }

    pub fn params(&self) -> Result<ModelParams> {
        load_scenario(&self.spec)
    }

    pub fn scenario_name(&self) -> String {
        self.spec.id.to_string()
    }
}

/// Loads the agent to run: the rule policy, or a network agent from its
/// checkpoint.
pub fn load_agent(
    kind: Option<AgentKind>,
    checkpoint: Option<&Path>,
    params: &ModelParams,
) -> Result<Agent> {
    match (kind, checkpoint) {
        (Some(AgentKind::Empirical) | None, None) => Ok(Agent::empirical(params.clone())),
        (Some(k), None) => Err(Error::Usage(format!("agent {k} needs --checkpoint <file>"))),
        (k, Some(path)) => {
            let ck = Checkpoint::load(path)?;
            if let Some(k) = k {
                if k != ck.agent {
                    return Err(Error::Usage(format!(
                        "{} holds a {} agent, not {k}",
                        path.display(),
                        ck.agent
                    )));
                }
            }
            Ok(ck.into_agent(params.clone()))
        }
    }
}

pub fn write_daily_log(path: &Path, log: &[DayLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in log {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs one mean-action episode per seed. With `out`, writes
/// `daily_<seed>.csv` per seed plus `report.json` and `report.csv`.
pub fn simulate(
    cfg: &RunConfig,
    agent: &Agent,
    seeds: &[u64],
    out: Option<&Path>,
) -> Result<RunReport> {
    let params = Arc::new(cfg.params()?);
    let baseline = Arc::new(cfg.exogenous.clone());
    if let Some(dir) = out {
        ensure_dir(dir)?;
    }
    let mut episodes = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run = run_episode(
            agent,
            params.clone(),
            baseline.clone(),
            seed,
            ActMode::Mean,
            &agent.kind.score_weights(),
        )?;
        if let Some(dir) = out {
            write_daily_log(&dir.join(format!("daily_{seed}.csv")), &run.log)?;
        }
        episodes.push(run.summary);
    }
    let report = RunReport::new(&cfg.scenario_name(), &agent.kind.to_string(), episodes);
    if let Some(dir) = out {
        report.save_json(&dir.join("report.json"))?;
        report.save_csv(&dir.join("report.csv"))?;
    }
    Ok(report)
}

/// Trains one agent per seed and keeps the best (see
/// [`trainer::train_best_of`]). A single seed writes straight into `out`;
/// several seeds write `out/seed_<s>/` each plus `out/selection.json`.
pub fn train(
    cfg: &RunConfig,
    kind: AgentKind,
    seeds: &[u64],
    out: &Path,
    mut progress: impl FnMut(u64, &UpdateRecord),
) -> Result<BestOf> {
    ensure_dir(out)?;
    let params = Arc::new(cfg.params()?);
    let baseline = Arc::new(cfg.exogenous.clone());
    if let [seed] = seeds {
        let outcome = trainer::train(
            kind,
            params,
            baseline,
            TrainConfig {
                seed: *seed,
                ..cfg.train.clone()
            },
            Some(out),
            |r| progress(*seed, r),
        )?;
        let score = trainer::validation_reward(
            &outcome.agent,
            &Arc::new(cfg.params()?),
            &Arc::new(cfg.exogenous.clone()),
            &trainer::VALIDATION_SEEDS,
        )?;
        return Ok(BestOf {
            seed: *seed,
            outcome,
            scores: vec![(*seed, score)],
        });
    }
    let best = trainer::train_best_of(
        kind,
        params,
        baseline,
        cfg.train.clone(),
        seeds,
        Some(out),
        progress,
    )?;
    let selection = serde_json::json!({
        "selected_seed": best.seed,
        "validation_seeds": trainer::VALIDATION_SEEDS,
        "validation_rewards": best.scores.iter().map(|(s, r)| serde_json::json!({"seed": s, "reward": r})).collect::<Vec<_>>(),
    });
    let path = out.join("selection.json");
    std::fs::write(&path, serde_json::to_string_pretty(&selection)? + "\n")
        .map_err(|e| Error::io(&path, e))?;
    Ok(best)
}

pub struct GaRun {
    pub outcome: GaOutcome,
    /// the best trajectory replayed on each evaluation seed
    pub report: RunReport,
}

/// Evolves a trajectory and writes `history.csv`, `best_chromosome.txt`,
/// `best_daily.csv` (replay on the first evaluation seed) and
/// `report.json`/`report.csv` (replays on every evaluation seed).
pub fn run_ga(
    cfg: &RunConfig,
    out: Option<&Path>,
    progress: impl FnMut(&ga::GenerationRecord),
) -> Result<GaRun> {
    let params = Arc::new(cfg.params()?);
    let baseline = Arc::new(cfg.exogenous.clone());
    let weights = RewardWeights::AGENT1;
    let outcome = ga::evolve(
        &cfg.ga,
        params.clone(),
        baseline.clone(),
        &weights,
        progress,
    )?;
    let actions = ga::decode(&outcome.best, &params)?;
    let seeds = cfg.ga.evaluation_seeds();
    let mut episodes = Vec::new();
    let mut first_log = None;
    for &s in &seeds {
        let run = ga::replay(&actions, params.clone(), baseline.clone(), s, &weights)?;
        first_log.get_or_insert(run.log);
        episodes.push(run.summary);
    }
    let report = RunReport::new(&cfg.scenario_name(), "ga", episodes);
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let path = dir.join("history.csv");
        let mut w = csv::Writer::from_path(&path)?;
        for r in &outcome.history {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        let path = dir.join("best_chromosome.txt");
        std::fs::write(&path, outcome.best.to_bit_string() + "\n")
            .map_err(|e| Error::io(&path, e))?;
        write_daily_log(&dir.join("best_daily.csv"), &first_log.unwrap_or_default())?;
        report.save_json(&dir.join("report.json"))?;
        report.save_csv(&dir.join("report.csv"))?;
    }
    Ok(GaRun { outcome, report })
}

/// Finds the report of a run: a `report.json` file or a directory
/// holding one.
pub fn report_path(run: &Path) -> PathBuf {
    if run.is_dir() {
        run.join("report.json")
    } else {
        run.to_path_buf()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_config_sections() {
        let cfg = RunConfig::parse(
            "scenario = 2\ninit_cash = 950000\n[train]\nupdates = 7\n[ga]\npopulation = 10\n",
        )
        .unwrap();
        assert_eq!(cfg.train.updates, 7);
        assert_eq!(cfg.train.batch, 128);
        assert_eq!(cfg.ga.population, 10);
        let p = cfg.params().unwrap();
        assert_eq!(p.init_cash, 950_000.0);
        assert_eq!(p.start_day, 32);
    }

    #[test]
    fn scenario_flag_keeps_overrides() {
        let cfg = RunConfig::parse("init_cash = 2000000\n")
            .unwrap()
            .with_scenario(Some("3"));
        let p = cfg.params().unwrap();
        assert_eq!(p.init_cash, 2_000_000.0);
        assert_eq!(p.min_discount_ratio, 1.0);
    }

    #[test]
    fn bad_sections_are_rejected() {
        assert!(RunConfig::parse("train = 3\n").is_err());
        assert!(RunConfig::parse("[ga]\npopulation = 1\n").is_err());
        assert!(RunConfig::parse("[train]\nhorizon = \"x\"\n").is_err());
        assert!(RunConfig::parse("[train]\nhorizn = 64\n").is_err());
        assert!(RunConfig::parse("[ga]\npopulaton = 64\n").is_err());
        assert!(RunConfig::parse("[exogenous]\ninflaton = [0.1, 0.1, 0.1]\n").is_err());
        assert!(RunConfig::parse("init_cahs = 5\n").is_err());
    }

    #[test]
    fn network_agent_needs_a_checkpoint() {
        let p = ModelParams::default();
        let err = load_agent(Some(AgentKind::Smpn), None, &p).unwrap_err();
        assert!(err.to_string().contains("--checkpoint"));
        let err = load_agent(None, Some(Path::new("/no/such/ck.bin")), &p).unwrap_err();
        assert!(err.to_string().contains("/no/such/ck.bin"));
        assert_eq!(
            load_agent(None, None, &p).unwrap().kind,
            AgentKind::Empirical
        );
    }

    #[test]
    fn simulate_is_byte_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::default();
        let agent = Agent::empirical(cfg.params().unwrap());
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        let ra = simulate(&cfg, &agent, &[42], Some(&a)).unwrap();
        simulate(&cfg, &agent, &[42], Some(&b)).unwrap();
        assert!(ra.cost_identity_error() < 1e-6);
        for f in ["daily_42.csv", "report.json", "report.csv"] {
            assert_eq!(
                std::fs::read(a.join(f)).unwrap(),
                std::fs::read(b.join(f)).unwrap(),
                "{f}"
            );
        }
    }
}
