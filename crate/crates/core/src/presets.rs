//! Per-dataset hyper-parameters used for the benchmark runs.

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::ensemble::EnsembleConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: &'static str,
    pub task: Task,
    pub n_trees: usize,
    pub max_depth: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Preset {
    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig::new(
            self.task,
            self.n_trees,
            self.max_depth,
            self.epochs,
            self.learning_rate,
            self.batch_size,
        )
    }
}

const fn preset(
    name: &'static str,
    task: Task,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    max_depth: usize,
) -> Preset {
    Preset {
        name,
        task,
        n_trees: 10,
        max_depth,
        epochs,
        learning_rate,
        batch_size,
    }
}

pub const PRESETS: [Preset; 8] = [
    preset("boston", Task::Regression, 300, 0.006, 21, 5),
    preset("ca-housing", Task::Regression, 200, 0.006, 826, 5),
    preset("diabetes", Task::Regression, 50, 0.0001, 1, 5),
    preset("yield", Task::Regression, 300, 0.008, 1857, 5),
    preset("iris", Task::Classification, 100, 0.006, 6, 3),
    preset("digits", Task::Classification, 300, 0.003, 72, 3),
    preset("wine", Task::Classification, 50, 0.004, 8, 3),
    preset("breast-cancer", Task::Classification, 100, 0.006, 7, 4),
];

pub fn preset_by_name(name: &str) -> Result<Preset> {
    let key = name.to_ascii_lowercase().replace('_', "-");
    PRESETS
        .iter()
        .find(|p| p.name == key)
        .copied()
        .ok_or_else(|| Error::InvalidParameter(format!("unknown preset {name:?}")))
}
