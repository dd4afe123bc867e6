use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use mc_budget::assign::{Algorithm, DEFAULT_SEARCH_CAP};
use mc_budget::experiment::{
    generate_trials, run_campaign, write_generated, Campaign, ExperimentConfig,
};
use mc_budget::gen::Scenario;
use mc_budget::io::{read_distribution, read_json, read_taskset, write_json, AssignmentFile};
use mc_budget::sched::SchedAlgo;
use mc_budget::sim::{simulate, SimConfig, DEFAULT_DURATION};
use mc_budget::Result;

#[derive(Parser)]
#[command(
    name = "mc-budget",
    version,
    about = "Execution-time budgets for mixed-criticality task sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assign budgets to a task set.
    Assign {
        #[arg(long, default_value = "vwcet")]
        algo: Algorithm,
        #[arg(long, default_value = "edf")]
        sched: SchedAlgo,
        /// Seed for the random ordering.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SEARCH_CAP)]
        opt_cap: u128,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate random task sets, one JSON file per kept trial.
    Gen {
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
        scenario: u8,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scheduler used by the discard rule.
        #[arg(long, default_value = "edf")]
        sched: SchedAlgo,
        /// Number of HI tasks, taken from the end of the set.
        #[arg(long, default_value_t = 0)]
        n_hi: usize,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Simulate a task set under a budget assignment.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long, default_value = "edf")]
        policy: SchedAlgo,
        #[arg(long, default_value_t = DEFAULT_DURATION)]
        duration_ticks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Let jobs run past their budget.
        #[arg(long)]
        no_enforcement: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an evaluation campaign.
    Experiment {
        #[arg(long, value_parser = parse_campaign)]
        campaign: Campaign,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
        scenario: u8,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Run the full 1000-trial campaign.
        #[arg(long, conflicts_with = "trials")]
        full: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated algorithm list; defaults depend on the campaign.
        #[arg(long, value_delimiter = ',')]
        algos: Option<Vec<Algorithm>>,
        #[arg(long, default_value = "edf")]
        sched: SchedAlgo,
        /// Tasks per set for the score and stop-ratio campaigns.
        #[arg(long, default_value_t = 6)]
        n: usize,
        /// Task counts swept by the runtime campaign, e.g. 4,5,6.
        #[arg(long, value_delimiter = ',')]
        task_counts: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Write wall_ns as 0 so raw rows are reproducible.
        #[arg(long)]
        no_wall_time: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print summary statistics of an execution-time distribution.
    Dist {
        /// JSON distribution or one sample per line.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "50,60,80,90,99")]
        percentiles: Vec<f64>,
    },
}

fn parse_campaign(s: &str) -> std::result::Result<Campaign, String> {
    match s.to_ascii_lowercase().as_str() {
        "scores" => Ok(Campaign::Scores),
        "runtime" => Ok(Campaign::Runtime),
        "stopratio" => Ok(Campaign::StopRatio),
        _ => Err(format!(
            "unknown campaign {s:?}, expected scores, runtime or stopratio"
        )),
    }
}

#[derive(Serialize)]
struct DistStats {
    support: usize,
    samples: u64,
    min: u64,
    max: u64,
    mean: f64,
    vwcet_percent: f64,
    skewness: Option<f64>,
    percentiles: Vec<(f64, u64)>,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Assign {
            algo,
            sched,
            seed,
            opt_cap,
            input,
            output,
        } => {
            let tasks = read_taskset(&input)?;
            let result = algo.run(&tasks, sched, seed, opt_cap)?;
            let file = AssignmentFile::new(&tasks, algo.as_str(), sched.as_str(), &result);
            match output {
                Some(path) => write_json(&path, &file)?,
                None => print_json(&file)?,
            }
            if !file.feasible {
                eprintln!("no feasible assignment");
            }
        }
        Command::Gen {
            n,
            scenario,
            trials,
            seed,
            sched,
            n_hi,
            jobs,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::new(Campaign::Scores);
            cfg.gen.n_tasks = n;
            cfg.gen.n_hi = n_hi;
            cfg.gen.scenario = Scenario::from_index(scenario)?;
            cfg.trials = trials;
            cfg.seed = seed;
            cfg.sched = sched;
            cfg.jobs = jobs;
            let (kept, discards) = generate_trials(&cfg)?;
            write_generated(&cfg, &kept, &discards, &out_dir)?;
            eprintln!("kept {} of {trials} trials", kept.len());
        }
        Command::Simulate {
            input,
            assignment,
            policy,
            duration_ticks,
            seed,
            no_enforcement,
            out,
        } => {
            let tasks = read_taskset(&input)?;
            let b = read_json::<AssignmentFile>(&assignment)?.assignment()?;
            let mut cfg = SimConfig::new(policy, duration_ticks, seed);
            if no_enforcement {
                cfg = cfg.without_enforcement();
            }
            let report = simulate(&tasks, &b, &cfg)?;
            match out {
                Some(path) => write_json(&path, &report)?,
                None => print_json(&report)?,
            }
        }
        Command::Experiment {
            campaign,
            scenario,
            trials,
            full,
            seed,
            algos,
            sched,
            n,
            task_counts,
            jobs,
            no_wall_time,
            out_dir,
        } => {
            let mut cfg = ExperimentConfig::new(campaign);
            cfg.gen.n_tasks = n;
            cfg.gen.scenario = Scenario::from_index(scenario)?;
            cfg.trials = if full { 1000 } else { trials };
            cfg.seed = seed;
            cfg.sched = sched;
            cfg.jobs = jobs;
            cfg.record_wall_time = !no_wall_time;
            if let Some(a) = algos {
                cfg.algorithms = a;
            }
            if let Some(t) = task_counts {
                cfg.task_counts = t;
            }
            let result = run_campaign(&cfg)?;
            result.write(&cfg, &out_dir)?;
            eprintln!(
                "kept {} trials, {} discarded; results in {}",
                result.kept_trials,
                result.discards.len(),
                out_dir.display()
            );
        }
        Command::Dist { input, percentiles } => {
            let dist = read_distribution(&input)?;
            let percentiles = percentiles
                .iter()
                .map(|&q| dist.percentile(q).map(|v| (q, v)))
                .collect::<Result<Vec<_>>>()?;
            print_json(&DistStats {
                support: dist.values().len(),
                samples: dist.total(),
                min: dist.min(),
                max: dist.max(),
                mean: dist.mean(),
                vwcet_percent: 100.0 * dist.vwcet(),
                skewness: dist.skewness().ok(),
                percentiles,
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
