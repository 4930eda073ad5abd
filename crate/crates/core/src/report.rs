//! Run reports and cross-run comparison tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::EpisodeSummary;

/// Means over the episodes of one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub episodes: usize,
    pub completion_rate: f64,
    pub duration: f64,
    pub labor_cost: f64,
    pub material_cost: f64,
    pub total_cost: f64,
    pub npv: f64,
    pub mean_reward: f64,
}

impl Aggregate {
    pub fn from_episodes(eps: &[EpisodeSummary]) -> Self {
        let n = eps.len();
        if n == 0 {
            return Self::default();
        }
        let mean = |f: fn(&EpisodeSummary) -> f64| eps.iter().map(f).sum::<f64>() / n as f64;
        Self {
            episodes: n,
            completion_rate: mean(|e| e.completed as u8 as f64),
            duration: mean(|e| e.duration as f64),
            labor_cost: mean(|e| e.labor_cost),
            material_cost: mean(|e| e.material_cost),
            total_cost: mean(|e| e.total_cost),
            npv: mean(|e| e.npv),
            mean_reward: mean(|e| e.total_reward),
        }
    }

    fn metrics(&self) -> [f64; 7] {
        [
            self.completion_rate,
            self.duration,
            self.labor_cost,
            self.material_cost,
            self.total_cost,
            self.npv,
            self.mean_reward,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub agent: String,
    pub episodes: Vec<EpisodeSummary>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn new(scenario: &str, agent: &str, episodes: Vec<EpisodeSummary>) -> Self {
        Self {
            scenario: scenario.to_string(),
            agent: agent.to_string(),
            aggregate: Aggregate::from_episodes(&episodes),
            episodes,
        }
    }

    /// Largest relative violation of total = labor + material over the
    /// episodes and the aggregate.
    pub fn cost_identity_error(&self) -> f64 {
        let rel = |t: f64, l: f64, m: f64| (t - l - m).abs() / t.abs().max(1.0);
        let a = &self.aggregate;
        self.episodes
            .iter()
            .map(|e| rel(e.total_cost, e.labor_cost, e.material_cost))
            .fold(rel(a.total_cost, a.labor_cost, a.material_cost), f64::max)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Per-episode rows followed by a `mean` row.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "seed",
            "status",
            "completed",
            "duration",
            "progress",
            "labor_cost",
            "material_cost",
            "total_cost",
            "npv",
            "total_reward",
        ])?;
        for e in &self.episodes {
            w.write_record([
                e.seed.to_string(),
                e.status.clone(),
                e.completed.to_string(),
                e.duration.to_string(),
                e.progress.to_string(),
                e.labor_cost.to_string(),
                e.material_cost.to_string(),
                e.total_cost.to_string(),
                e.npv.to_string(),
                e.total_reward.to_string(),
            ])?;
        }
        let a = &self.aggregate;
        w.write_record([
            "mean".to_string(),
            String::new(),
            a.completion_rate.to_string(),
            a.duration.to_string(),
            String::new(),
            a.labor_cost.to_string(),
            a.material_cost.to_string(),
            a.total_cost.to_string(),
            a.npv.to_string(),
            a.mean_reward.to_string(),
        ])?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One line of a comparison table: a run's means and its relative gain
/// over the baseline run, `(run - baseline) / |baseline|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub run: String,
    pub scenario: String,
    pub agent: String,
    pub completion_rate: f64,
    pub duration: f64,
    pub labor_cost: f64,
    pub material_cost: f64,
    pub total_cost: f64,
    pub npv: f64,
    pub mean_reward: f64,
    pub gain_completion_rate: f64,
    pub gain_duration: f64,
    pub gain_labor_cost: f64,
    pub gain_material_cost: f64,
    pub gain_total_cost: f64,
    pub gain_npv: f64,
    pub gain_mean_reward: f64,
}

pub fn gain(value: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (value - baseline) / baseline.abs()
    }
}

pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// non-fatal problems such as mixed scenarios
    pub warnings: Vec<String>,
}

/// Compares named runs against `runs[baseline]`.
pub fn compare(runs: &[(String, RunReport)], baseline: usize) -> Result<Comparison> {
    let (_, base) = runs
        .get(baseline)
        .ok_or_else(|| Error::Usage(format!("baseline index {baseline} out of range")))?;
    let mut warnings = Vec::new();
    let b = base.aggregate.metrics();
    let rows = runs
        .iter()
        .map(|(name, r)| {
            if r.scenario != base.scenario {
                warnings.push(format!(
                    "run {name} is scenario {} but the baseline is scenario {}",
                    r.scenario, base.scenario
                ));
            }
            let m = r.aggregate.metrics();
            let g: Vec<f64> = m.iter().zip(&b).map(|(v, b)| gain(*v, *b)).collect();
            ComparisonRow {
                run: name.clone(),
                scenario: r.scenario.clone(),
                agent: r.agent.clone(),
                completion_rate: m[0],
                duration: m[1],
                labor_cost: m[2],
                material_cost: m[3],
                total_cost: m[4],
                npv: m[5],
                mean_reward: m[6],
                gain_completion_rate: g[0],
                gain_duration: g[1],
                gain_labor_cost: g[2],
                gain_material_cost: g[3],
                gain_total_cost: g[4],
                gain_npv: g[5],
                gain_mean_reward: g[6],
            }
        })
        .collect();
    Ok(Comparison { rows, warnings })
}

pub fn rows_to_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Usage(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ComparisonRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(seed: u64, done: bool, days: usize, labor: f64, material: f64) -> EpisodeSummary {
        EpisodeSummary {
            seed,
            status: if done { "completed" } else { "failed_cost" }.into(),
            completed: done,
            duration: days,
            progress: if done { 1.0 } else { 0.5 },
            labor_cost: labor,
            material_cost: material,
            total_cost: labor + material,
            npv: 1e6,
            total_reward: 0.5,
            min_cash: 0.0,
        }
    }

    #[test]
    fn aggregate_means() {
        let r = RunReport::new(
            "0",
            "empirical",
            vec![ep(0, true, 90, 2e6, 6e6), ep(1, false, 30, 1e6, 2e6)],
        );
        assert_eq!(r.aggregate.completion_rate, 0.5);
        assert_eq!(r.aggregate.duration, 60.0);
        assert_eq!(r.aggregate.total_cost, 5.5e6);
        assert!(r.cost_identity_error() < 1e-12);
    }

    #[test]
    fn gains_against_baseline() {
        let base = RunReport::new("0", "empirical", vec![ep(0, true, 100, 2e6, 6e6)]);
        let agent = RunReport::new("0", "smpn", vec![ep(0, true, 90, 2e6, 5e6)]);
        let c = compare(&[("a".into(), base), ("b".into(), agent)], 0).unwrap();
        assert!(c.warnings.is_empty());
        assert!((c.rows[1].gain_duration + 0.1).abs() < 1e-12);
        assert!((c.rows[1].gain_total_cost + 0.125).abs() < 1e-12);
    }

    #[test]
    fn single_run_has_zero_gains() {
        let r = RunReport::new("0", "empirical", vec![ep(0, true, 90, 2e6, 6e6)]);
        let c = compare(&[("only".into(), r)], 0).unwrap();
        let row = &c.rows[0];
        for g in [
            row.gain_completion_rate,
            row.gain_duration,
            row.gain_total_cost,
            row.gain_npv,
            row.gain_mean_reward,
        ] {
            assert_eq!(g, 0.0);
        }
    }

    #[test]
    fn mixed_scenarios_warn() {
        let a = RunReport::new("0", "empirical", vec![ep(0, true, 90, 2e6, 6e6)]);
        let b = RunReport::new("1", "empirical", vec![ep(0, true, 90, 2e6, 6e6)]);
        let c = compare(&[("a".into(), a), ("b".into(), b)], 0).unwrap();
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn json_and_csv_agree() {
        let a = RunReport::new("0", "empirical", vec![ep(0, true, 90, 2e6, 6e6)]);
        let b = RunReport::new("0", "sfpn1", vec![ep(3, true, 88, 1.9e6, 6.1e6)]);
        let rows = compare(&[("a".into(), a), ("b".into(), b)], 0)
            .unwrap()
            .rows;
        let json = serde_json::to_string(&rows).unwrap();
        let from_json: Vec<ComparisonRow> = serde_json::from_str(&json).unwrap();
        let from_csv = rows_from_csv(&rows_to_csv(&from_json).unwrap()).unwrap();
        assert_eq!(from_csv, rows);
    }
}
