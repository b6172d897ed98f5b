//! Rock-paper-scissors and grid-maze environments.

use std::collections::VecDeque;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("action {action} out of range for {n} actions")]
    InvalidAction { action: usize, n: usize },
    #[error("episode is over; call reset first")]
    EpisodeOver,
    #[error("opponent policy must be three non-negative probabilities summing to 1, got {0:?}")]
    BadOpponent(Vec<f64>),
    #[error("invalid maze: {0}")]
    BadMaze(String),
}

pub const ROCK: usize = 0;
pub const PAPER: usize = 1;
pub const SCISSORS: usize = 2;

/// `+1` win, `0` tie, `-1` loss under rock < paper < scissors < rock.
pub fn rps_payoff(agent: usize, opponent: usize) -> f64 {
    match (agent + 3 - opponent) % 3 {
        0 => 0.0,
        1 => 1.0,
        _ => -1.0,
    }
}

pub fn one_hot(n: usize, i: usize) -> Array1<f64> {
    let mut v = Array1::zeros(n);
    v[i] = 1.0;
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct RpsEnv {
    opponent: [f64; 3],
    rng: ChaCha8Rng,
    round: u64,
    last_opponent: Option<usize>,
}

impl RpsEnv {
    pub fn new(opponent: [f64; 3], seed: u64) -> Result<Self, EnvError> {
        let sum: f64 = opponent.iter().sum();
        if opponent.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(EnvError::BadOpponent(opponent.to_vec()));
        }
        Ok(Self {
            opponent,
            rng: ChaCha8Rng::seed_from_u64(seed),
            round: 0,
            last_opponent: None,
        })
    }

    pub fn opponent(&self) -> [f64; 3] {
        self.opponent
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// One-hot of the opponent's previous move; zeros before round one.
    pub fn observation(&self) -> Array1<f64> {
        self.last_opponent
            .map_or_else(|| Array1::zeros(3), |o| one_hot(3, o))
    }

    /// Plays one round; returns `(reward, opponent_action)`.
    pub fn step(&mut self, action: usize) -> Result<(f64, usize), EnvError> {
        if action > 2 {
            return Err(EnvError::InvalidAction { action, n: 3 });
        }
        let u: f64 = self.rng.random();
        let o = if u < self.opponent[0] {
            ROCK
        } else if u < self.opponent[0] + self.opponent[1] {
            PAPER
        } else {
            SCISSORS
        };
        self.round += 1;
        self.last_opponent = Some(o);
        Ok((rps_payoff(action, o), o))
    }

    /// Expected payoff of each pure response to the opponent policy.
    pub fn expected_payoffs(&self) -> [f64; 3] {
        std::array::from_fn(|a| (0..3).map(|o| self.opponent[o] * rps_payoff(a, o)).sum())
    }
}

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

pub const STEP_REWARD: f64 = -0.01;
pub const GOAL_REWARD: f64 = 1.0;

/// Grid world with one start and one reachable goal.
#[derive(Clone, Debug, PartialEq)]
pub struct MazeEnv {
    height: usize,
    width: usize,
    walls: Vec<bool>,
    start: (usize, usize),
    goal: (usize, usize),
    step_limit: usize,
    pos: (usize, usize),
    steps: usize,
    done: bool,
}

impl MazeEnv {
    pub fn new(
        height: usize,
        width: usize,
        walls: &[(usize, usize)],
        start: (usize, usize),
        goal: (usize, usize),
        step_limit: usize,
    ) -> Result<Self, EnvError> {
        let bad = |m: String| Err(EnvError::BadMaze(m));
        if height == 0 || width == 0 {
            return bad("grid must be non-empty".into());
        }
        if step_limit == 0 {
            return bad("step limit must be >= 1".into());
        }
        let mut grid = vec![false; height * width];
        for &(r, c) in walls {
            if r >= height || c >= width {
                return bad(format!("wall ({r},{c}) outside {height}x{width} grid"));
            }
            grid[r * width + c] = true;
        }
        for (name, (r, c)) in [("start", start), ("goal", goal)] {
            if r >= height || c >= width || grid[r * width + c] {
                return bad(format!("{name} ({r},{c}) is outside the grid or on a wall"));
            }
        }
        if start == goal {
            return bad("start and goal coincide".into());
        }
        let env = Self {
            height,
            width,
            walls: grid,
            start,
            goal,
            step_limit,
            pos: start,
            steps: 0,
            done: false,
        };
        if env.distances()[env.index(start)].is_none() {
            return bad("goal unreachable from start".into());
        }
        Ok(env)
    }

    /// Four walls around the centre of a 5x5 grid, start and goal in
    /// opposite corners.
    pub fn default_5x5(step_limit: usize) -> Self {
        Self::new(5, 5, &DEFAULT_WALLS, (0, 0), (4, 4), step_limit).expect("default maze is valid")
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn index(&self, (r, c): (usize, usize)) -> usize {
        r * self.width + c
    }

    pub fn observation(&self) -> Array1<f64> {
        one_hot(self.cells(), self.index(self.pos))
    }

    pub fn reset(&mut self) -> Array1<f64> {
        self.pos = self.start;
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn target(&self, (r, c): (usize, usize), action: usize) -> Option<(usize, usize)> {
        let t = match action {
            UP => (r.checked_sub(1)?, c),
            DOWN => (r + 1, c),
            LEFT => (r, c.checked_sub(1)?),
            _ => (r, c + 1),
        };
        (t.0 < self.height && t.1 < self.width && !self.walls[self.index(t)]).then_some(t)
    }

    /// Moves unless blocked; returns `(observation, reward, done)`.
    pub fn step(&mut self, action: usize) -> Result<(Array1<f64>, f64, bool), EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        if action > 3 {
            return Err(EnvError::InvalidAction { action, n: 4 });
        }
        if let Some(t) = self.target(self.pos, action) {
            self.pos = t;
        }
        self.steps += 1;
        // Every move pays the step cost, the goal move included.
        let mut reward = STEP_REWARD;
        if self.pos == self.goal {
            self.done = true;
            reward += GOAL_REWARD;
        }
        if self.steps >= self.step_limit {
            self.done = true;
        }
        Ok((self.observation(), reward, self.done))
    }

    pub fn reached_goal(&self) -> bool {
        self.pos == self.goal
    }

    /// Shortest path length to the goal from every cell (BFS).
    pub fn distances(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cells()];
        let mut queue = VecDeque::from([self.goal]);
        dist[self.index(self.goal)] = Some(0);
        while let Some(p) = queue.pop_front() {
            let d = dist[self.index(p)].expect("queued cells have a distance");
            for a in 0..4 {
                // Moves are symmetric, so neighbours of p reach p in one step.
                if let Some(n) = self.target(p, a) {
                    if dist[self.index(n)].is_none() {
                        dist[self.index(n)] = Some(d + 1);
                        queue.push_back(n);
                    }
                }
            }
        }
        dist
    }

    /// A move that shortens the path to the goal, lowest action index first.
    pub fn shortest_move(&self, pos: (usize, usize)) -> Option<usize> {
        let dist = self.distances();
        let here = dist[self.index(pos)]?;
        (0..4).find(|&a| {
            self.target(pos, a)
                .and_then(|t| dist[self.index(t)])
                .is_some_and(|d| d + 1 == here)
        })
    }

    /// Decodes a one-hot observation back into a cell.
    pub fn cell_of(&self, obs: &Array1<f64>) -> Option<(usize, usize)> {
        let i = obs.iter().position(|&v| v == 1.0)?;
        Some((i / self.width, i % self.width))
    }
}

pub const DEFAULT_WALLS: [(usize, usize); 4] = [(1, 1), (1, 3), (3, 1), (3, 3)];

/// Parses `"1-1,1-3"` into `(row, col)` cells; empty text is no walls.
pub fn parse_cells(text: &str) -> Option<Vec<(usize, usize)>> {
    if text.trim().is_empty() {
        return Some(Vec::new());
    }
    text.split(',')
        .map(|p| {
            let (r, c) = p.trim().split_once('-')?;
            Some((r.trim().parse().ok()?, c.trim().parse().ok()?))
        })
        .collect()
}

pub fn format_cells(cells: &[(usize, usize)]) -> String {
    cells
        .iter()
        .map(|(r, c)| format!("{r}-{c}"))
        .collect::<Vec<_>>()
        .join(",")
}
