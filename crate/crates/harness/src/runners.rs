//! Experiment loops: continual classification, reinforcement learning and
//! serial recall.

use std::time::Instant;

use cogkit_core::gate::{ContextWindow, Metric};
use cogkit_core::hrr::{cleanup, cosine, SymbolLexicon};
use cogkit_core::memory::WorkingMemoryBuffer;
use cogkit_core::{Agent, AgentConfig, EpsilonClock, RoutingDirective};
use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::controllers::{AgentClassifier, AgentPolicy, Classifier, Policy};
use crate::envs::{MazeEnv, RpsEnv};
use crate::idx::load_idx;
use crate::metrics::{MetricsWriter, RunDir};
use crate::split_mnist::{make_split_mnist, TaskStream};
use crate::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ContinualReport {
    /// `accuracy[i][j]`: accuracy on task `j` after training task `i`, `j <= i`.
    pub accuracy: Vec<Vec<f64>>,
    /// Mean final accuracy over tasks.
    pub acc: f64,
    /// Mean over tasks of best-ever minus final accuracy.
    pub forgetting: f64,
}

impl ContinualReport {
    pub fn final_accuracy(&self, task: usize) -> f64 {
        self.accuracy.last().map_or(0.0, |row| row[task])
    }
}

fn summarize(accuracy: Vec<Vec<f64>>) -> ContinualReport {
    let Some(last) = accuracy.last() else {
        return ContinualReport {
            accuracy,
            acc: 0.0,
            forgetting: 0.0,
        };
    };
    let n = last.len() as f64;
    let acc = last.iter().sum::<f64>() / n;
    let forgetting = (0..last.len())
        .map(|j| {
            let best = accuracy[j..].iter().map(|row| row[j]).fold(f64::MIN, f64::max);
            best - last[j]
        })
        .sum::<f64>()
        / n;
    ContinualReport {
        accuracy,
        acc,
        forgetting,
    }
}

/// Trains tasks in order, evaluating every seen task after each one.
pub fn run_continual_with(
    learner: &mut impl Classifier,
    stream: &TaskStream,
    mut metrics: Option<&mut MetricsWriter>,
) -> Result<ContinualReport> {
    let mut accuracy = Vec::with_capacity(stream.len());
    let mut step = 0u64;
    for (i, task) in stream.tasks.iter().enumerate() {
        learner.begin_task(task)?;
        for e in &task.train {
            learner.train(&e.x, e.label)?;
            step += 1;
        }
        let row: Vec<f64> = stream.tasks[..=i]
            .iter()
            .map(|t| learner.evaluate(t))
            .collect::<Result<_>>()?;
        if let Some(m) = metrics.as_deref_mut() {
            for (j, a) in row.iter().enumerate() {
                m.row(step, j.to_string(), "accuracy", *a)?;
            }
            m.flush()?;
        }
        accuracy.push(row);
    }
    let report = summarize(accuracy);
    if let Some(m) = metrics {
        m.row(step, "all", "acc", report.acc)?;
        m.row(step, "all", "forgetting", report.forgetting)?;
        m.flush()?;
    }
    Ok(report)
}

pub fn load_stream(cfg: &ExperimentConfig) -> Result<TaskStream> {
    let images = load_idx(&cfg.images)?;
    let labels = load_idx(&cfg.labels)?;
    Ok(make_split_mnist(
        &images,
        &labels,
        &cfg.pairs,
        cfg.per_task_train,
        cfg.per_task_test,
        cfg.agent.seed,
    )?)
}

/// Largest distance of a full-window context mean from the centroid of
/// all such means, over the first `samples` training inputs of task 0.
pub fn context_spread(stream: &TaskStream, samples: usize, window: usize, metric: Metric) -> Result<f64> {
    let first = stream
        .tasks
        .first()
        .ok_or_else(|| HarnessError::Config("empty task stream".into()))?;
    let dim = stream.input_dim();
    let mut ctx = ContextWindow::new(window, dim)?;
    let mut means = Vec::new();
    for e in first.train.iter().take(samples) {
        ctx.push(&e.x)?;
        if ctx.is_full() {
            means.push(ctx.mean());
        }
    }
    if means.is_empty() {
        return Err(HarnessError::Config(format!(
            "calibration needs at least {window} samples, task 0 offers {}",
            first.train.len().min(samples)
        )));
    }
    let centroid = means.iter().fold(Array1::zeros(dim), |acc, m| acc + m) / means.len() as f64;
    Ok(means
        .iter()
        .map(|m| metric.distance(m, &centroid))
        .fold(0.0, f64::max))
}

/// Agent config for a stream: input size checked, theta calibrated.
pub fn continual_agent_config(cfg: &ExperimentConfig, stream: &TaskStream) -> Result<AgentConfig> {
    let mut a = cfg.agent.clone();
    if a.sensory_sizes[0] != stream.input_dim() {
        return Err(HarnessError::Config(format!(
            "sensory input layer has {} units but examples have {} pixels",
            a.sensory_sizes[0],
            stream.input_dim()
        )));
    }
    if cfg.theta_scale > 0.0 {
        let spread = context_spread(stream, cfg.calibration_samples, a.context_window, a.gate.metric)?;
        a.gate.theta = cfg.theta_scale * spread;
    }
    Ok(a)
}

pub fn run_continual(cfg: &ExperimentConfig, out: Option<&RunDir>) -> Result<ContinualReport> {
    let started = Instant::now();
    let stream = load_stream(cfg)?;
    let agent = Agent::new(continual_agent_config(cfg, &stream)?)?;
    let mut learner = AgentClassifier::new(agent, cfg.readout);
    let mut metrics = out.map(RunDir::metrics).transpose()?;
    let report = run_continual_with(&mut learner, &stream, metrics.as_mut())?;
    if let Some(m) = metrics.as_mut() {
        let units = learner.agent.gate().active_count() as f64;
        m.row(stream.tasks.iter().map(|t| t.train.len() as u64).sum(), "all", "gate_units", units)?;
        m.flush()?;
    }
    if let Some(dir) = out {
        finish_run(dir, cfg, &learner.agent, started)?;
    }
    Ok(report)
}

fn finish_run(dir: &RunDir, cfg: &ExperimentConfig, agent: &Agent, started: Instant) -> Result<()> {
    dir.write_config(&cfg.to_text())?;
    let snap = agent.snapshot()?.to_bytes();
    let p = dir.root.join("agent.cmca");
    std::fs::write(&p, snap).map_err(|e| HarnessError::io(&p, e))?;
    dir.write_meta(cfg.agent.seed, &cfg.hash(), started.elapsed().as_secs_f64())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Rps,
    Maze,
}

impl EnvKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rps" => Some(EnvKind::Rps),
            "maze" => Some(EnvKind::Maze),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RlReport {
    /// Mean payoff over the scored rounds, or success rate over the scored
    /// episodes.
    pub score: f64,
    /// Per-round payoff or per-episode success (1 or 0).
    pub trace: Vec<f64>,
}

const BLOCK: usize = 100;

pub fn run_rps_with(
    policy: &mut impl Policy,
    env: &mut RpsEnv,
    rounds: usize,
    score_from: usize,
    mut metrics: Option<&mut MetricsWriter>,
) -> Result<RlReport> {
    let mut trace = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let obs = env.observation();
        let a = policy.act(&obs)?;
        let (r, _) = env.step(a)?;
        policy.feedback(r, round + 1 == rounds)?;
        trace.push(r);
        if let Some(m) = metrics.as_deref_mut() {
            if (round + 1) % BLOCK == 0 || round + 1 == rounds {
                let block = &trace[round - round % BLOCK..];
                m.row(round as u64 + 1, "rps", "payoff_block_mean", mean(block))?;
                m.flush()?;
            }
        }
    }
    let score = mean(&trace[score_from.min(rounds)..]);
    if let Some(m) = metrics {
        m.row(rounds as u64, "rps", "score", score)?;
        m.flush()?;
    }
    Ok(RlReport { score, trace })
}

pub fn run_maze_with(
    policy: &mut impl Policy,
    env: &mut MazeEnv,
    episodes: usize,
    score_last: usize,
    mut metrics: Option<&mut MetricsWriter>,
) -> Result<RlReport> {
    let mut trace = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut obs = env.reset();
        let mut ret = 0.0;
        loop {
            let a = policy.act(&obs)?;
            let (o, r, done) = env.step(a)?;
            policy.feedback(r, done)?;
            ret += r;
            obs = o;
            if done {
                break;
            }
        }
        let success = env.reached_goal() as u8 as f64;
        trace.push(success);
        if let Some(m) = metrics.as_deref_mut() {
            let step = ep as u64 + 1;
            m.row(step, "maze", "return", ret)?;
            m.row(step, "maze", "length", env.steps() as f64)?;
            m.row(step, "maze", "success", success)?;
            m.flush()?;
        }
    }
    let score = mean(&trace[episodes.saturating_sub(score_last)..]);
    if let Some(m) = metrics {
        m.row(episodes as u64, "maze", "score", score)?;
        m.flush()?;
    }
    Ok(RlReport { score, trace })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Seed of the environment's own generator, distinct from the agent's.
pub fn env_seed(seed: u64) -> u64 {
    seed ^ 0x5eed_0e4f
}

pub fn rps_env(cfg: &ExperimentConfig) -> Result<RpsEnv> {
    Ok(RpsEnv::new(cfg.rps_opponent, env_seed(cfg.agent.seed))?)
}

pub fn maze_env(cfg: &ExperimentConfig) -> Result<MazeEnv> {
    Ok(MazeEnv::new(
        cfg.maze_height,
        cfg.maze_width,
        &cfg.maze_walls,
        (0, 0),
        (cfg.maze_height - 1, cfg.maze_width - 1),
        cfg.maze_step_limit,
    )?)
}

/// Agent config for an environment: observation and action sizes follow
/// the environment; the gate holds one unit with every route off, so the
/// motor sees perception only.
pub fn rl_agent_config(cfg: &ExperimentConfig, kind: EnvKind) -> Result<AgentConfig> {
    let mut a = cfg.agent.clone();
    let (obs, actions) = match kind {
        EnvKind::Rps => (3, 3),
        EnvKind::Maze => (cfg.maze_height * cfg.maze_width, 4),
    };
    a.sensory_sizes[0] = obs;
    a.motor.sizes[0] = actions;
    a.gate.max_units = 1;
    a.gate.routing = RoutingDirective::ALL_OFF;
    if kind == EnvKind::Maze {
        a.epsilon_clock = EpsilonClock::Episodes;
    }
    a.validate()?;
    Ok(a)
}

pub fn run_rl(cfg: &ExperimentConfig, kind: EnvKind, out: Option<&RunDir>) -> Result<RlReport> {
    let started = Instant::now();
    let agent = Agent::new(rl_agent_config(cfg, kind)?)?;
    let mut policy = AgentPolicy::new(agent);
    let mut metrics = out.map(RunDir::metrics).transpose()?;
    let report = match kind {
        EnvKind::Rps => run_rps_with(&mut policy, &mut rps_env(cfg)?, cfg.rps_rounds, cfg.rps_score_from, metrics.as_mut())?,
        EnvKind::Maze => run_maze_with(
            &mut policy,
            &mut maze_env(cfg)?,
            cfg.maze_episodes,
            cfg.maze_score_last,
            metrics.as_mut(),
        )?,
    };
    drop(metrics);
    if let Some(dir) = out {
        finish_run(dir, cfg, &policy.agent, started)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecallReport {
    /// Accuracy at serial positions `1..=length`.
    pub by_position: Vec<f64>,
    /// Mean cosine between each position's probe and its true item; shows
    /// the recency gradient even when accuracy saturates.
    pub mean_cosine: Vec<f64>,
}

/// Encodes random lists of distinct lexicon symbols into working memory
/// and scores cleanup recall at every serial position.
pub fn run_recall(cfg: &ExperimentConfig, out: Option<&RunDir>) -> Result<RecallReport> {
    let started = Instant::now();
    let (n, len) = (cfg.recall_lexicon, cfg.recall_length);
    if len == 0 || len > n {
        return Err(HarnessError::Config(format!(
            "recall lists of {len} distinct items need 1 <= length <= lexicon size {n}"
        )));
    }
    let seed = cfg.agent.seed;
    let names: Vec<String> = (0..n).map(|i| format!("item-{i}")).collect();
    let lex = SymbolLexicon::with_names(&names, cfg.agent.d, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = vec![0usize; len];
    let mut cos = vec![0.0; len];
    let mut wm = WorkingMemoryBuffer::new(cfg.agent.d, cfg.agent.wm_rho)?;
    let mut metrics = out.map(RunDir::metrics).transpose()?;
    for _ in 0..cfg.recall_lists {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let list = &order[..len];
        wm.clear();
        for &i in list {
            wm.encode(lex.require(&names[i])?)?;
        }
        for (p, &i) in list.iter().enumerate() {
            let probe = wm.probe(p + 1)?;
            if cleanup(&probe, &lex, 1)?[0].0 == names[i] {
                hits[p] += 1;
            }
            cos[p] += cosine(&probe, lex.require(&names[i])?)?;
        }
    }
    let lists = cfg.recall_lists.max(1) as f64;
    let by_position: Vec<f64> = hits.iter().map(|&h| h as f64 / lists).collect();
    let mean_cosine: Vec<f64> = cos.iter().map(|c| c / lists).collect();
    if let Some(m) = metrics.as_mut() {
        for (p, a) in by_position.iter().enumerate() {
            m.row(cfg.recall_lists as u64, (p + 1).to_string(), "recall_accuracy", *a)?;
            m.row(cfg.recall_lists as u64, (p + 1).to_string(), "probe_cosine", mean_cosine[p])?;
        }
        m.flush()?;
    }
    drop(metrics);
    if let Some(dir) = out {
        dir.write_config(&cfg.to_text())?;
        dir.write_meta(seed, &cfg.hash(), started.elapsed().as_secs_f64())?;
    }
    Ok(RecallReport {
        by_position,
        mean_cosine,
    })
}
