use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, CHECKPOINT_VERSION};
use super::config::ExperimentConfig;
use super::plots::{curve, overlay, write_csv, CsvRow};
use crate::envs::{make_env, Environment};
use crate::error::Result;
use crate::policy::SampleMode;
use crate::rules::{extract_policy, format_policy, write_rules_jsonl, ExtractedRule, RewardSummary};
use crate::trainers::{Agent, Trainer, Transition, UpdateMetrics};

/// Evaluation episodes draw their start states from a seed range disjoint from training.
pub const EVAL_SEED_OFFSET: u64 = 1 << 40;

/// Reset seed for episode `episode` of the trial seeded `seed`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(episode as u64)
}

/// One row of `metrics.csv`. Losses are means over the updates made during
/// the episode and are empty when no update happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub reward: f64,
    pub steps: usize,
    pub updates: usize,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub entropy: Option<f64>,
    pub alpha: Option<f64>,
}

impl CsvRow for EpisodeRecord {
    const HEADER: &'static [&'static str] = &[
        "episode",
        "reward",
        "steps",
        "updates",
        "critic_loss",
        "actor_loss",
        "entropy",
        "alpha",
    ];
}

#[derive(Default)]
struct MetricMeans {
    n: usize,
    sums: [f64; 4],
    counts: [usize; 4],
}

impl MetricMeans {
    fn add(&mut self, m: UpdateMetrics) {
        self.n += 1;
        for (i, v) in [m.critic_loss, m.actor_loss, m.entropy, m.alpha].into_iter().enumerate() {
            if let Some(v) = v {
                self.sums[i] += v;
                self.counts[i] += 1;
            }
        }
    }

    fn mean(&self, i: usize) -> Option<f64> {
        (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64)
    }
}

/// A single trial in progress: environment, agent and history.
pub struct Session {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub env: Box<dyn Environment>,
    pub agent: Agent,
    pub records: Vec<EpisodeRecord>,
    /// Cumulative wall-clock seconds after each episode of this process.
    pub timings: Vec<(usize, f64)>,
    started: Instant,
}

impl Session {
    pub fn new(config: &ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            env: make_env(&config.environment, config.max_steps)?,
            agent: config.build_agent(seed)?,
            config: config.clone(),
            seed,
            records: Vec::new(),
            timings: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        Ok(Self {
            env: make_env(&ck.config.environment, ck.config.max_steps)?,
            agent: ck.agent,
            config: ck.config,
            seed: ck.seed,
            records: ck.records,
            timings: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            seed: self.seed,
            schema: self.config.schema().expect("validated config"),
            actions: self.env.action_names(),
            agent: self.agent.clone(),
            records: self.records.clone(),
        }
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reward).collect()
    }

    pub fn summary(&self) -> Option<RewardSummary> {
        RewardSummary::last(&self.rewards(), self.config.summary_window)
    }

    fn target_reached(&self) -> bool {
        match self.config.stop_at_mean {
            Some(target) => {
                self.records.len() >= self.config.summary_window
                    && self.summary().is_some_and(|s| s.mean >= target)
            }
            None => false,
        }
    }

    /// Runs one learning episode and appends its record.
    pub fn train_episode(&mut self) -> Result<&EpisodeRecord> {
        let episode = self.records.len();
        let mut state = self.env.reset(episode_seed(self.seed, episode));
        let mut total = 0.0;
        let mut steps = 0;
        let mut means = MetricMeans::default();
        loop {
            let action = self.agent.act(&state, SampleMode::Stochastic)?;
            let r = self.env.step(action)?;
            total += r.reward;
            steps += 1;
            let over = r.episode_over();
            self.agent.observe(Transition {
                state: std::mem::replace(&mut state, r.state.clone()),
                action,
                reward: r.reward,
                next_state: r.state,
                done: r.done,
                truncated: r.truncated,
            })?;
            if let Some(m) = self.agent.update()?.metrics() {
                means.add(m);
            }
            if over {
                break;
            }
        }
        self.records.push(EpisodeRecord {
            episode,
            reward: total,
            steps,
            updates: means.n,
            critic_loss: means.mean(0),
            actor_loss: means.mean(1),
            entropy: means.mean(2),
            alpha: means.mean(3),
        });
        self.timings.push((episode, self.started.elapsed().as_secs_f64()));
        Ok(self.records.last().expect("just pushed"))
    }

    /// Trains until `episodes` have been recorded in total or the stop target is met.
    pub fn train_until(&mut self, episodes: usize) -> Result<()> {
        while self.records.len() < episodes && !self.target_reached() {
            let rec = self.train_episode()?;
            if (rec.episode + 1) % 50 == 0 {
                let (ep, reward) = (rec.episode, rec.reward);
                log::info!(
                    "seed {} episode {} reward {:.1} last-{} mean {:.1}",
                    self.seed,
                    ep + 1,
                    reward,
                    self.config.summary_window,
                    self.summary().map_or(0.0, |s| s.mean)
                );
            }
        }
        Ok(())
    }

    pub fn extract_rules(&self) -> Result<Vec<ExtractedRule>> {
        match self.agent.policy() {
            Some(p) => extract_policy(p, self.config.rules.keep, self.config.rules.confident),
            None => Ok(Vec::new()),
        }
    }

    pub fn rules_report(&self, rules: &[ExtractedRule]) -> String {
        let title = format!("Policy rules for {} ({} on {})", self.config.variant, self.config.trainer, self.config.environment);
        if self.agent.policy().is_none() {
            return format!("{title}\nthis agent has no logic policy to extract\n");
        }
        format_policy(&title, &self.env.action_names(), rules, self.summary())
    }

    /// Writes every artifact of the trial into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<RunRecord> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), self.config.to_toml())?;
        write_csv(&self.records, &dir.join("metrics.csv"))?;
        let timing: Vec<TimingRow> = self
            .timings
            .iter()
            .map(|&(episode, wall_clock_secs)| TimingRow {
                episode,
                wall_clock_secs,
            })
            .collect();
        write_csv(&timing, &dir.join("timing.csv"))?;
        let rewards = self.rewards();
        write_csv(&curve(&rewards), &dir.join("curve.csv"))?;
        let rules = self.extract_rules()?;
        fs::write(dir.join("rules.txt"), self.rules_report(&rules))?;
        write_rules_jsonl(&rules, fs::File::create(dir.join("rules.jsonl"))?)?;
        let checkpoint = dir.join("checkpoint.json");
        self.checkpoint().save(&checkpoint)?;
        Ok(RunRecord {
            seed: self.seed,
            dir: dir.to_path_buf(),
            records: self.records.clone(),
            summary: self.summary(),
            rules,
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            checkpoint,
        })
    }
}

#[derive(Serialize)]
struct TimingRow {
    episode: usize,
    wall_clock_secs: f64,
}

impl CsvRow for TimingRow {
    const HEADER: &'static [&'static str] = &["episode", "wall_clock_secs"];
}

#[derive(Serialize)]
struct SummaryRow {
    seed: u64,
    episodes: usize,
    mean: Option<f64>,
    std: Option<f64>,
    best_mean: Option<f64>,
    rules: usize,
    wall_clock_secs: f64,
}

impl CsvRow for SummaryRow {
    const HEADER: &'static [&'static str] =
        &["seed", "episodes", "mean", "std", "best_mean", "rules", "wall_clock_secs"];
}

/// Outcome of one trial.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub dir: PathBuf,
    pub records: Vec<EpisodeRecord>,
    pub summary: Option<RewardSummary>,
    pub rules: Vec<ExtractedRule>,
    pub wall_clock_secs: f64,
    pub checkpoint: PathBuf,
}

impl RunRecord {
    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.reward).collect()
    }
}

/// Trains one trial with the given seed and writes it to `dir`.
pub fn run_trial(config: &ExperimentConfig, seed: u64, dir: &Path) -> Result<RunRecord> {
    let mut session = Session::new(config, seed)?;
    session.train_until(config.episodes)?;
    session.write_artifacts(dir)
}

/// Continues a saved trial up to `episodes` total, rewriting its directory.
pub fn resume_trial(checkpoint: &Path, episodes: usize) -> Result<RunRecord> {
    let dir = checkpoint.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut session = Session::from_checkpoint(Checkpoint::load(checkpoint)?)?;
    session.train_until(episodes)?;
    session.write_artifacts(&dir)
}

/// Runs every trial (`seed`, `seed + 1`, …) into `output_dir/seed-<n>` and
/// writes the resolved config, a summary and a multi-seed overlay.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let root = &config.output_dir;
    fs::create_dir_all(root)?;
    fs::write(root.join("config.toml"), config.to_toml())?;
    let mut runs = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        let seed = config.seed + t as u64;
        let run = run_trial(config, seed, &root.join(format!("seed-{seed}")))?;
        if let Some(s) = run.summary {
            log::info!("seed {seed}: mean reward {:.1} ± {:.1} over {} episodes", s.mean, s.std, run.records.len());
        }
        runs.push(run);
    }
    let rows: Vec<SummaryRow> = runs
        .iter()
        .map(|r| SummaryRow {
            seed: r.seed,
            episodes: r.records.len(),
            mean: r.summary.map(|s| s.mean),
            std: r.summary.map(|s| s.std),
            best_mean: best_window_mean(&r.rewards(), config.summary_window),
            rules: r.rules.len(),
            wall_clock_secs: r.wall_clock_secs,
        })
        .collect();
    write_csv(&rows, &root.join("summary.csv"))?;
    let curves: Vec<Vec<f64>> = runs.iter().map(|r| r.rewards()).collect();
    write_csv(&overlay(&curves), &root.join("overlay.csv"))?;
    Ok(runs)
}

/// Highest mean over any full trailing window of `window` episodes.
pub fn best_window_mean(rewards: &[f64], window: usize) -> Option<f64> {
    if rewards.len() < window || window == 0 {
        return None;
    }
    let mut sum: f64 = rewards[..window].iter().sum();
    let mut best = sum;
    for i in window..rewards.len() {
        sum += rewards[i] - rewards[i - window];
        best = best.max(sum);
    }
    Some(best / window as f64)
}

/// Plays `episodes` episodes without learning; the agent is cloned so its
/// random state is untouched.
pub fn evaluate(agent: &Agent, env: &mut dyn Environment, episodes: usize, mode: SampleMode, seed: u64) -> Result<Vec<f64>> {
    let mut agent = agent.clone();
    (0..episodes)
        .map(|e| {
            let mut state = env.reset(episode_seed(seed, e).wrapping_add(EVAL_SEED_OFFSET));
            let mut total = 0.0;
            loop {
                let r = env.step(agent.act(&state, mode)?)?;
                total += r.reward;
                if r.episode_over() {
                    return Ok(total);
                }
                state = r.state;
            }
        })
        .collect()
}

/// Rewards of a uniform-random policy over the same evaluation seeds.
pub fn random_policy_rewards(env: &mut dyn Environment, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = env.n_actions();
    (0..episodes)
        .map(|e| {
            env.reset(episode_seed(seed, e).wrapping_add(EVAL_SEED_OFFSET));
            let mut total = 0.0;
            loop {
                let r = env.step(rng.random_range(0..n))?;
                total += r.reward;
                if r.episode_over() {
                    return Ok(total);
                }
            }
        })
        .collect()
}

/// States visited by the agent acting in `mode`, up to `n` of them.
pub fn collect_states(agent: &Agent, env: &mut dyn Environment, n: usize, mode: SampleMode, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut agent = agent.clone();
    let mut out = Vec::with_capacity(n);
    let mut e = 0;
    while out.len() < n {
        let mut state = env.reset(episode_seed(seed, e).wrapping_add(EVAL_SEED_OFFSET));
        e += 1;
        while out.len() < n {
            out.push(state.clone());
            let r = env.step(agent.act(&state, mode)?)?;
            if r.episode_over() {
                break;
            }
            state = r.state;
        }
    }
    Ok(out)
}
