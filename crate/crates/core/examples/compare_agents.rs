//! Compares the rule policy with a trained checkpoint on scenario #0 and
//! prints the relative gains as CSV.
//!
//! `cargo run --release --example compare_agents -- <checkpoint.bin>`
//! Without a checkpoint, only the rule policy is listed.

use std::path::Path;

use resflow::agents::Agent;
use resflow::app::{load_agent, simulate, RunConfig};
use resflow::report::{compare, rows_to_csv};

fn main() -> resflow::Result<()> {
    let cfg = RunConfig::default();
    let params = cfg.params()?;
    let seeds = [0, 1, 2, 3, 4];
    let mut runs = vec![(
        "empirical".to_string(),
        simulate(&cfg, &Agent::empirical(params.clone()), &seeds, None)?,
    )];
    if let Some(ck) = std::env::args().nth(1) {
        let agent = load_agent(None, Some(Path::new(&ck)), &params)?;
        runs.push((ck, simulate(&cfg, &agent, &seeds, None)?));
    }
    let table = compare(&runs, 0)?;
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", rows_to_csv(&table.rows)?);
    Ok(())
}
