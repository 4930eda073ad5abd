//! Builds a run config from TOML text: a tighter budget on top of
//! scenario #1, a shorter training schedule and a small GA. Then runs the
//! rule policy on it.

use resflow::agents::Agent;
use resflow::app::{simulate, RunConfig};

const CONFIG: &str = r#"
scenario = 1
init_cash = 800000

[exogenous]
inflation = [0.2, 0.05, 0.05]

[train]
updates = 50
horizon = 512

[ga]
population = 32
generations = 16
"#;

fn main() -> resflow::Result<()> {
    let cfg = RunConfig::parse(CONFIG)?;
    let params = cfg.params()?;
    println!(
        "scenario {}: start day {}, cash {}, train {} updates x {} steps, GA {} x {}",
        cfg.scenario_name(),
        params.start_day,
        params.init_cash,
        cfg.train.updates,
        cfg.train.horizon,
        cfg.ga.population,
        cfg.ga.generations
    );
    let report = simulate(&cfg, &Agent::empirical(params), &[0, 1, 2], None)?;
    for e in &report.episodes {
        println!(
            "seed {}: {} after {} days, progress {:.0}%",
            e.seed,
            e.status,
            e.duration,
            100.0 * e.progress
        );
    }
    Ok(())
}
