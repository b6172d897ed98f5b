//! Experiment configuration: agent settings plus protocol settings.

use std::path::{Path, PathBuf};

use cogkit_core::config::{format_kv, join_list, KvMap};
use cogkit_core::AgentConfig;
use sha2::{Digest, Sha256};

use crate::envs::{format_cells, parse_cells, DEFAULT_WALLS};
use crate::split_mnist::{format_pairs, parse_pairs, DEFAULT_PAIRS};
use crate::{HarnessError, Result};

/// How class labels reach the motor readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Readout {
    /// Action = predicted class, reward `+1` correct, `-1` wrong.
    Rl,
    Supervised,
}

impl Readout {
    pub fn name(self) -> &'static str {
        match self {
            Readout::Rl => "rl",
            Readout::Supervised => "supervised",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rl" => Some(Readout::Rl),
            "supervised" => Some(Readout::Supervised),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub agent: AgentConfig,
    /// Dataset paths; relative paths resolve against the config file.
    pub images: PathBuf,
    pub labels: PathBuf,
    pub pairs: Vec<(u8, u8)>,
    pub per_task_train: usize,
    pub per_task_test: usize,
    pub readout: Readout,
    /// When positive, `gate_theta` is replaced by this multiple of the
    /// calibrated context spread.
    pub theta_scale: f64,
    pub calibration_samples: usize,
    pub rps_rounds: usize,
    pub rps_opponent: [f64; 3],
    /// Rounds before this index are excluded from the payoff score.
    pub rps_score_from: usize,
    pub maze_height: usize,
    pub maze_width: usize,
    pub maze_walls: Vec<(usize, usize)>,
    pub maze_episodes: usize,
    pub maze_step_limit: usize,
    /// Success rate is scored over this many final episodes.
    pub maze_score_last: usize,
    pub recall_lexicon: usize,
    pub recall_length: usize,
    pub recall_lists: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            agent: AgentConfig::default(),
            images: PathBuf::from("data/mnist/mnist10k-images-idx3-ubyte"),
            labels: PathBuf::from("data/mnist/mnist10k-labels-idx1-ubyte"),
            pairs: DEFAULT_PAIRS.to_vec(),
            per_task_train: 500,
            per_task_test: 500,
            readout: Readout::Rl,
            theta_scale: 0.0,
            calibration_samples: 100,
            rps_rounds: 2000,
            rps_opponent: [0.8, 0.1, 0.1],
            rps_score_from: 1000,
            maze_height: 5,
            maze_width: 5,
            maze_walls: DEFAULT_WALLS.to_vec(),
            maze_episodes: 500,
            maze_step_limit: 50,
            maze_score_last: 100,
            recall_lexicon: 16,
            recall_length: 7,
            recall_lists: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn to_text(&self) -> String {
        let mut pairs = self.agent.to_pairs();
        pairs.extend([
            ("images".into(), self.images.display().to_string()),
            ("labels".into(), self.labels.display().to_string()),
            ("pairs".into(), format_pairs(&self.pairs)),
            ("per_task_train".into(), self.per_task_train.to_string()),
            ("per_task_test".into(), self.per_task_test.to_string()),
            ("readout".into(), self.readout.name().into()),
            ("theta_scale".into(), self.theta_scale.to_string()),
            ("calibration_samples".into(), self.calibration_samples.to_string()),
            ("rps_rounds".into(), self.rps_rounds.to_string()),
            ("rps_opponent".into(), join_list(&self.rps_opponent)),
            ("rps_score_from".into(), self.rps_score_from.to_string()),
            ("maze_height".into(), self.maze_height.to_string()),
            ("maze_width".into(), self.maze_width.to_string()),
            ("maze_walls".into(), format_cells(&self.maze_walls)),
            ("maze_episodes".into(), self.maze_episodes.to_string()),
            ("maze_step_limit".into(), self.maze_step_limit.to_string()),
            ("maze_score_last".into(), self.maze_score_last.to_string()),
            ("recall_lexicon".into(), self.recall_lexicon.to_string()),
            ("recall_length".into(), self.recall_length.to_string()),
            ("recall_lists".into(), self.recall_lists.to_string()),
        ]);
        format_kv(pairs)
    }

    /// Parses config text over the defaults; unknown keys are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = KvMap::parse(text)?;
        let mut c = Self::default();
        c.agent.apply(&mut kv)?;
        if let Some(p) = kv.take_raw("images") {
            c.images = p.into();
        }
        if let Some(p) = kv.take_raw("labels") {
            c.labels = p.into();
        }
        if let Some(p) = kv.take_with("pairs", parse_pairs)? {
            c.pairs = p;
        }
        kv.take_into("per_task_train", &mut c.per_task_train)?;
        kv.take_into("per_task_test", &mut c.per_task_test)?;
        if let Some(r) = kv.take_with("readout", Readout::parse)? {
            c.readout = r;
        }
        kv.take_into("theta_scale", &mut c.theta_scale)?;
        kv.take_into("calibration_samples", &mut c.calibration_samples)?;
        kv.take_into("rps_rounds", &mut c.rps_rounds)?;
        if let Some(o) = kv.take_list::<f64>("rps_opponent")? {
            c.rps_opponent = o
                .try_into()
                .map_err(|v: Vec<f64>| HarnessError::Config(format!("rps_opponent needs 3 values, got {}", v.len())))?;
        }
        kv.take_into("rps_score_from", &mut c.rps_score_from)?;
        kv.take_into("maze_height", &mut c.maze_height)?;
        kv.take_into("maze_width", &mut c.maze_width)?;
        if let Some(w) = kv.take_with("maze_walls", parse_cells)? {
            c.maze_walls = w;
        }
        kv.take_into("maze_episodes", &mut c.maze_episodes)?;
        kv.take_into("maze_step_limit", &mut c.maze_step_limit)?;
        kv.take_into("maze_score_last", &mut c.maze_score_last)?;
        kv.take_into("recall_lexicon", &mut c.recall_lexicon)?;
        kv.take_into("recall_length", &mut c.recall_length)?;
        kv.take_into("recall_lists", &mut c.recall_lists)?;
        kv.finish()?;
        c.agent.validate()?;
        Ok(c)
    }

    /// Reads a config file and resolves dataset paths against its folder.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut c = Self::from_text(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.images, &mut c.labels] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(c)
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }

    /// Forces every gating mask to all ones.
    pub fn ungated(mut self) -> Self {
        self.agent.gate.density = 1.0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.agent.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trips() {
        let mut c = ExperimentConfig::default();
        c.pairs = vec![(0, 1), (2, 3)];
        c.readout = Readout::Supervised;
        c.rps_opponent = [0.6, 0.3, 0.1];
        c.maze_walls.clear();
        c.theta_scale = 1.25;
        let back = ExperimentConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(back.with_seed(9).hash(), c.hash());
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(ExperimentConfig::from_text("bogus = 1").is_err());
        assert!(ExperimentConfig::from_text("readout = maybe").is_err());
        assert!(ExperimentConfig::from_text("rps_opponent = 0.5,0.5").is_err());
        assert!(ExperimentConfig::from_text("d = 0").is_err());
    }

    #[test]
    fn comments_and_partial_files() {
        let c = ExperimentConfig::from_text("# desk scale\nd = 64\nper_task_train = 10 # small\n").unwrap();
        assert_eq!(c.agent.d, 64);
        assert_eq!(c.per_task_train, 10);
        assert_eq!(c.per_task_test, 500);
    }
}
