use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use dnlrl::envs::make_env;
use dnlrl::experiment::plots::emit_plots;
use dnlrl::experiment::run::{evaluate, resume_trial, run_experiment};
use dnlrl::experiment::{Checkpoint, ExperimentConfig};
use dnlrl::policy::SampleMode;
use dnlrl::rules::{extract_policy, format_policy, write_rules_jsonl, RewardSummary};
use dnlrl::trainers::Trainer;

/// Train and inspect differentiable neural-logic RL agents.
#[derive(Parser)]
#[command(name = "dnlrl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of an experiment described by a TOML config.
    Train {
        #[arg(required_unless_present = "resume")]
        config: Option<PathBuf>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the number of trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the episode budget.
        #[arg(long)]
        episodes: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Continue a saved trial instead of starting fresh (uses the
        /// checkpoint's own config; `--episodes` sets the new total).
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Play episodes with a saved agent and report mean ± std reward.
    Evaluate {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Take the most probable action instead of sampling.
        #[arg(long)]
        greedy: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the logic program held by a saved agent.
    Extract {
        checkpoint: PathBuf,
        #[arg(long)]
        keep: Option<f64>,
        #[arg(long)]
        confident: Option<f64>,
        /// Print one JSON record per rule instead of the text report.
        #[arg(long)]
        json: bool,
    },
    /// Write reward-curve CSVs for run directories (and an overlay for several).
    Plot {
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        /// Where the overlay goes (default: the first run's parent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            out,
            trials,
            episodes,
            seed,
            resume,
        } => {
            if let Some(ck) = resume {
                let ck_cfg = Checkpoint::load(&ck)?.config;
                let run = resume_trial(&ck, episodes.unwrap_or(ck_cfg.episodes))?;
                print_run_summary(run.seed, run.summary, run.records.len(), run.wall_clock_secs);
                return Ok(());
            }
            let config = config.expect("required without --resume");
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let runs = run_experiment(&cfg)?;
            for r in &runs {
                print_run_summary(r.seed, r.summary, r.records.len(), r.wall_clock_secs);
            }
            println!("artifacts in {}", cfg.output_dir.display());
        }
        Command::Evaluate {
            checkpoint,
            episodes,
            greedy,
            seed,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let mut env = make_env(&ck.config.environment, ck.config.max_steps)?;
            let mode = if greedy { SampleMode::Greedy } else { SampleMode::Stochastic };
            let rewards = evaluate(&ck.agent, env.as_mut(), episodes, mode, seed)?;
            match RewardSummary::of(&rewards) {
                Some(s) => println!("mean reward: {:.1} ± {:.1} over {} episodes", s.mean, s.std, s.episodes),
                None => println!("no episodes played"),
            }
        }
        Command::Extract {
            checkpoint,
            keep,
            confident,
            json,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let Some(policy) = ck.agent.policy() else {
                bail!("this checkpoint's agent has no logic policy");
            };
            let rules = extract_policy(
                policy,
                keep.unwrap_or(ck.config.rules.keep),
                confident.unwrap_or(ck.config.rules.confident),
            )?;
            if json {
                write_rules_jsonl(&rules, std::io::stdout().lock())?;
            } else {
                let stats = RewardSummary::last(&ck.rewards(), ck.config.summary_window);
                let title = format!("Policy rules for {}", ck.config.variant);
                print!("{}", format_policy(&title, policy.actions(), &rules, stats));
            }
        }
        Command::Plot { run_dirs, out } => {
            let out = out
                .or_else(|| run_dirs[0].parent().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let dirs: Vec<&std::path::Path> = run_dirs.iter().map(|p| p.as_path()).collect();
            for p in emit_plots(&dirs, &out)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn print_run_summary(seed: u64, summary: Option<RewardSummary>, episodes: usize, secs: f64) {
    match summary {
        Some(s) => println!(
            "seed {seed}: {episodes} episodes, mean reward: {:.1} ± {:.1} (last {}), {secs:.1} s",
            s.mean, s.std, s.episodes
        ),
        None => println!("seed {seed}: no episodes run"),
    }
}
