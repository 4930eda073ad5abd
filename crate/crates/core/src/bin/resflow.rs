use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use resflow::agents::AgentKind;
use resflow::app::{self, RunConfig};
use resflow::report::{compare, rows_to_csv, RunReport};
use resflow::scenario::list_builtins;
use resflow::{Error, Result};

#[derive(Parser)]
#[command(
    name = "resflow",
    version,
    about = "Construction resource-flow simulator"
)]
struct Cli {
    /// run config file (scenario overrides plus optional [exogenous], [train], [ga])
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// scenario id: 0-6, or a custom name for a fully specified config
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// master seed for training and the GA
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// run everything on one thread
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct EvalArgs {
    /// empirical, sfpn1, sfpn2, swpn, smpn or dpn
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// comma-separated simulation seeds
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    seeds: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run episodes and write daily logs and a report
    Simulate(EvalArgs),
    /// Run episodes and print the aggregate only
    Evaluate(EvalArgs),
    /// Train a network agent with PPO
    Train {
        #[arg(long)]
        agent: AgentKind,
        #[arg(long)]
        updates: Option<usize>,
        /// comma-separated training seeds; several seeds keep the best run
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
    },
    /// Evolve a whole-trajectory plan with the genetic algorithm
    Ga {
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long, default_value = "runs/ga")]
        out: PathBuf,
    },
    /// Built-in scenarios
    Scenarios {
        #[command(subcommand)]
        cmd: ScenarioCmd,
    },
    /// Compare run reports; the first run is the baseline
    Report {
        /// run directories or report.json files
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ScenarioCmd {
    List,
}

fn print_report(r: &RunReport) {
    for e in &r.episodes {
        println!(
            "seed {:>6}  {:<12} {:>4} days  progress {:>5.1}%  labor {:>12.0}  material {:>12.0}  total {:>12.0}  npv {:>12.0}  reward {:+.4}",
            e.seed, e.status, e.duration, 100.0 * e.progress, e.labor_cost, e.material_cost, e.total_cost, e.npv, e.total_reward
        );
    }
    let a = &r.aggregate;
    println!(
        "mean ({} episodes)  completed {:.0}%  {:.1} days  labor {:.0}  material {:.0}  total {:.0}  npv {:.0}  reward {:+.4}",
        a.episodes, 100.0 * a.completion_rate, a.duration, a.labor_cost, a.material_cost, a.total_cost, a.npv, a.mean_reward
    );
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.deterministic {
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global()
            .map_err(|e| Error::Usage(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    }
    .with_scenario(cli.scenario.as_deref());
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
        cfg.ga.seed = s;
    }
    match cli.cmd {
        Cmd::Simulate(a) => {
            let agent = app::load_agent(a.agent, a.checkpoint.as_deref(), &cfg.params()?)?;
            let r = app::simulate(&cfg, &agent, &a.seeds, a.out.as_deref())?;
            print_report(&r);
        }
        Cmd::Evaluate(a) => {
            let agent = app::load_agent(a.agent, a.checkpoint.as_deref(), &cfg.params()?)?;
            let r = app::simulate(&cfg, &agent, &a.seeds, None)?;
            print_report(&r);
            if let Some(p) = a.out {
                r.save_json(&p)?;
            }
        }
        Cmd::Train {
            agent,
            updates,
            seeds,
            out,
        } => {
            if let Some(u) = updates {
                cfg.train.updates = u;
            }
            let seeds = if seeds.is_empty() {
                vec![cfg.train.seed]
            } else {
                seeds
            };
            let best = app::train(&cfg, agent, &seeds, &out, |seed, r| {
                println!(
                    "seed {seed}  update {:>4}  reward {:+.4}  days {:>5.1}  completed {:>3.0}%  episodes {:>3}  entropy {:.3}",
                    r.update, r.mean_reward, r.mean_duration, 100.0 * r.completion_rate, r.episodes, r.entropy
                );
            })?;
            for (seed, score) in &best.scores {
                println!("seed {seed}: validation reward {score:+.4}");
            }
            println!("selected seed {}", best.seed);
            if let Some(c) = best.outcome.checkpoints.last() {
                println!("checkpoint {}", c.display());
            }
        }
        Cmd::Ga {
            generations,
            population,
            out,
        } => {
            if let Some(g) = generations {
                cfg.ga.generations = g;
            }
            if let Some(p) = population {
                cfg.ga.population = p;
            }
            let run = app::run_ga(&cfg, Some(&out), |r| {
                println!(
                    "generation {:>5}  best {:+.4}  mean {:+.4}",
                    r.generation, r.best, r.mean
                );
            })?;
            print_report(&run.report);
        }
        Cmd::Scenarios {
            cmd: ScenarioCmd::List,
        } => {
            for line in list_builtins() {
                println!("{line}");
            }
        }
        Cmd::Report { runs, format, out } => {
            let mut loaded = Vec::with_capacity(runs.len());
            for r in &runs {
                loaded.push((
                    r.display().to_string(),
                    RunReport::load_json(&app::report_path(r))?,
                ));
            }
            let c = compare(&loaded, 0)?;
            for w in &c.warnings {
                eprintln!("warning: {w}");
            }
            let text = match format {
                Format::Csv => rows_to_csv(&c.rows)?,
                Format::Json => serde_json::to_string_pretty(&c.rows)? + "\n",
            };
            write_or_print(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
