//! Learners driven by the runners: the agent adapters and the random and
//! oracle stubs that bracket every metric.

use std::collections::HashMap;

use cogkit_core::Agent;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Readout;
use crate::envs::MazeEnv;
use crate::split_mnist::Task;
use crate::Result;

/// Learner for a labelled task stream.
pub trait Classifier {
    fn begin_task(&mut self, task: &Task) -> Result<()>;
    fn train(&mut self, x: &Array1<f64>, label: usize) -> Result<()>;
    /// Accuracy on the task's test split.
    fn evaluate(&mut self, task: &Task) -> Result<f64>;
}

/// Actor in an environment loop.
pub trait Policy {
    fn act(&mut self, obs: &Array1<f64>) -> Result<usize>;
    /// Outcome of the last action; `done` ends the episode.
    fn feedback(&mut self, reward: f64, done: bool) -> Result<()>;
}

pub struct AgentClassifier {
    pub agent: Agent,
    pub readout: Readout,
}

impl AgentClassifier {
    pub fn new(agent: Agent, readout: Readout) -> Self {
        Self { agent, readout }
    }
}

impl Classifier for AgentClassifier {
    fn begin_task(&mut self, task: &Task) -> Result<()> {
        Ok(self.agent.set_goal(&format!("task-{}", task.id))?)
    }

    fn train(&mut self, x: &Array1<f64>, label: usize) -> Result<()> {
        match self.readout {
            Readout::Rl => {
                // One-step episode: the action is the guess, the verdict is terminal.
                let a = self.agent.cycle(x, 0.0, false)?;
                self.agent.finish(if a == label { 1.0 } else { -1.0 })?;
            }
            Readout::Supervised => self.agent.train_supervised(x, label)?,
        }
        Ok(())
    }

    /// Primes the evaluation context with the first window of test inputs
    /// so the gate sees a full task context before the first prediction.
    fn evaluate(&mut self, task: &Task) -> Result<f64> {
        self.agent.begin_eval();
        let w = self.agent.config().context_window.min(task.test.len());
        for e in &task.test[..w] {
            self.agent.prime_eval(&e.x)?;
        }
        let mut correct = 0;
        for e in &task.test {
            if self.agent.predict(&e.x)? == e.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / task.test.len().max(1) as f64)
    }
}

/// Uniform guesses.
pub struct RandomClassifier {
    rng: ChaCha8Rng,
    classes: usize,
}

impl RandomClassifier {
    pub fn new(classes: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            classes,
        }
    }
}

impl Classifier for RandomClassifier {
    fn begin_task(&mut self, _: &Task) -> Result<()> {
        Ok(())
    }

    fn train(&mut self, _: &Array1<f64>, _: usize) -> Result<()> {
        Ok(())
    }

    fn evaluate(&mut self, task: &Task) -> Result<f64> {
        let correct = task
            .test
            .iter()
            .filter(|e| self.rng.random_range(0..self.classes) == e.label)
            .count();
        Ok(correct as f64 / task.test.len().max(1) as f64)
    }
}

/// Memorizes every test example it is shown, keyed by exact pixel bits.
#[derive(Default)]
pub struct OracleClassifier {
    table: HashMap<(usize, Vec<u64>), usize>,
}

fn key(task: usize, x: &Array1<f64>) -> (usize, Vec<u64>) {
    (task, x.iter().map(|v| v.to_bits()).collect())
}

impl Classifier for OracleClassifier {
    fn begin_task(&mut self, task: &Task) -> Result<()> {
        for e in &task.test {
            self.table.insert(key(task.id, &e.x), e.label);
        }
        Ok(())
    }

    fn train(&mut self, _: &Array1<f64>, _: usize) -> Result<()> {
        Ok(())
    }

    fn evaluate(&mut self, task: &Task) -> Result<f64> {
        let correct = task
            .test
            .iter()
            .filter(|e| self.table.get(&key(task.id, &e.x)) == Some(&e.label))
            .count();
        Ok(correct as f64 / task.test.len().max(1) as f64)
    }
}

/// Routes environment feedback into cognitive cycles: a reward is held
/// until the next cycle learns from it, and episode ends become terminal
/// transitions.
pub struct AgentPolicy {
    pub agent: Agent,
    reward: f64,
}

impl AgentPolicy {
    pub fn new(agent: Agent) -> Self {
        Self { agent, reward: 0.0 }
    }
}

impl Policy for AgentPolicy {
    fn act(&mut self, obs: &Array1<f64>) -> Result<usize> {
        Ok(self.agent.cycle(obs, self.reward, false)?)
    }

    fn feedback(&mut self, reward: f64, done: bool) -> Result<()> {
        if done {
            self.agent.finish(reward)?;
            self.reward = 0.0;
        } else {
            self.reward = reward;
        }
        Ok(())
    }
}

pub struct RandomPolicy {
    rng: ChaCha8Rng,
    actions: usize,
}

impl RandomPolicy {
    pub fn new(actions: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            actions,
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _: &Array1<f64>) -> Result<usize> {
        Ok(self.rng.random_range(0..self.actions))
    }

    fn feedback(&mut self, _: f64, _: bool) -> Result<()> {
        Ok(())
    }
}

/// Always plays the best pure response to a known opponent policy.
pub struct RpsOracle {
    action: usize,
}

impl RpsOracle {
    pub fn new(expected_payoffs: [f64; 3]) -> Self {
        let action = (0..3)
            .max_by(|&a, &b| expected_payoffs[a].total_cmp(&expected_payoffs[b]).then(b.cmp(&a)))
            .expect("three actions");
        Self { action }
    }
}

impl Policy for RpsOracle {
    fn act(&mut self, _: &Array1<f64>) -> Result<usize> {
        Ok(self.action)
    }

    fn feedback(&mut self, _: f64, _: bool) -> Result<()> {
        Ok(())
    }
}

/// Follows a shortest path computed from the full maze layout.
pub struct MazeOracle {
    maze: MazeEnv,
}

impl MazeOracle {
    pub fn new(maze: MazeEnv) -> Self {
        Self { maze }
    }
}

impl Policy for MazeOracle {
    fn act(&mut self, obs: &Array1<f64>) -> Result<usize> {
        let cell = self.maze.cell_of(obs);
        Ok(cell.and_then(|c| self.maze.shortest_move(c)).unwrap_or(0))
    }

    fn feedback(&mut self, _: f64, _: bool) -> Result<()> {
        Ok(())
    }
}
