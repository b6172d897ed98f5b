//! Split-MNIST task streams.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::idx::IdxArray;

pub const DEFAULT_PAIRS: [(u8, u8); 5] = [(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)];

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("label {0} does not occur in the dataset")]
    LabelAbsent(u8),
    #[error("task {task} needs {needed} examples but labels {labels:?} only have {available}")]
    NotEnough {
        task: usize,
        labels: (u8, u8),
        needed: usize,
        available: usize,
    },
    #[error("images and labels disagree: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("label file must hold one byte per item")]
    LabelShape,
}

/// One input in `[0, 1]^n` with its within-task label.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub x: Array1<f64>,
    pub label: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub id: usize,
    /// Original dataset labels mapped to `0` and `1`.
    pub labels: (u8, u8),
    pub train: Vec<Example>,
    pub test: Vec<Example>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
}

impl TaskStream {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.tasks
            .first()
            .and_then(|t| t.train.first().or(t.test.first()))
            .map_or(0, |e| e.x.len())
    }
}

/// Parses `"0-1,2-3"` into label pairs.
pub fn parse_pairs(text: &str) -> Option<Vec<(u8, u8)>> {
    text.split(',')
        .map(|p| {
            let (a, b) = p.trim().split_once('-')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        })
        .collect()
}

pub fn format_pairs(pairs: &[(u8, u8)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("{a}-{b}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Filters each label pair, remaps labels to `{0, 1}`, scales pixels to
/// `[0, 1]` and draws disjoint train and test subsamples from a
/// seed-shuffled pool.
pub fn make_split_mnist(
    images: &IdxArray,
    labels: &IdxArray,
    pairs: &[(u8, u8)],
    per_task_train: usize,
    per_task_test: usize,
    seed: u64,
) -> Result<TaskStream, DatasetError> {
    if labels.item_size() != 1 {
        return Err(DatasetError::LabelShape);
    }
    if images.len() != labels.len() {
        return Err(DatasetError::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    for &(a, b) in pairs {
        for l in [a, b] {
            if !labels.data.contains(&l) {
                return Err(DatasetError::LabelAbsent(l));
            }
        }
    }
    let mut tasks = Vec::with_capacity(pairs.len());
    for (id, &(a, b)) in pairs.iter().enumerate() {
        let mut pool: Vec<usize> = (0..labels.len())
            .filter(|&i| labels.data[i] == a || labels.data[i] == b)
            .collect();
        let needed = per_task_train + per_task_test;
        if pool.len() < needed {
            return Err(DatasetError::NotEnough {
                task: id,
                labels: (a, b),
                needed,
                available: pool.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id as u64);
        pool.shuffle(&mut rng);
        let example = |i: usize| Example {
            x: images.item(i).iter().map(|&p| p as f64 / 255.0).collect(),
            label: (labels.data[i] == b) as usize,
        };
        tasks.push(Task {
            id,
            labels: (a, b),
            train: pool[..per_task_train].iter().map(|&i| example(i)).collect(),
            test: pool[per_task_train..needed].iter().map(|&i| example(i)).collect(),
        });
    }
    Ok(TaskStream { tasks })
}
