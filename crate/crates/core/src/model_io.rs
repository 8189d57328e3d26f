//! JSON and CSV artifacts: single models, ensembles, cost histories.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ScalingParams, Task};
use crate::ensemble::{DjinnEnsemble, InitScheme};
use crate::error::{Error, Result};
use crate::net::Network;

/// `{"widths", "weights", "biases", "task", "scaler"}`; weights are row-major
/// per layer, one row per receiving neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(flatten)]
    pub network: Network,
    pub task: Task,
    pub scaler: ScalingParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_scaler: Option<ScalingParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub scheme: InitScheme,
    pub task: Task,
    pub member_seeds: Vec<u64>,
    pub models: Vec<ModelFile>,
}

impl From<&DjinnEnsemble> for EnsembleFile {
    fn from(e: &DjinnEnsemble) -> Self {
        EnsembleFile {
            scheme: e.scheme,
            task: e.task,
            member_seeds: e.member_seeds.clone(),
            models: e
                .members
                .iter()
                .map(|net| ModelFile {
                    network: net.clone(),
                    task: e.task,
                    scaler: e.scaler.clone(),
                    target_scaler: e.target_scaler.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<EnsembleFile> for DjinnEnsemble {
    type Error = Error;

    fn try_from(file: EnsembleFile) -> Result<Self> {
        let first = file.models.first().ok_or(Error::Empty("ensemble file has no models"))?;
        if file.member_seeds.len() != file.models.len() {
            return Err(Error::DimensionMismatch {
                what: "ensemble member seeds",
                expected: file.models.len(),
                found: file.member_seeds.len(),
            });
        }
        let (scaler, target_scaler) = (first.scaler.clone(), first.target_scaler.clone());
        if file
            .models
            .iter()
            .any(|m| m.scaler != scaler || m.target_scaler != target_scaler || m.task != file.task)
        {
            return Err(Error::InvalidParameter(
                "ensemble members disagree on task or scaling".into(),
            ));
        }
        Ok(DjinnEnsemble {
            scheme: file.scheme,
            task: file.task,
            member_seeds: file.member_seeds,
            members: file.models.into_iter().map(|m| m.network).collect(),
            scaler,
            target_scaler,
        })
    }
}

pub fn ensemble_to_json(ensemble: &DjinnEnsemble) -> Result<String> {
    Ok(serde_json::to_string_pretty(&EnsembleFile::from(ensemble))?)
}

pub fn ensemble_from_json(text: &str) -> Result<DjinnEnsemble> {
    serde_json::from_str::<EnsembleFile>(text)?.try_into()
}

/// Networks in a model or ensemble JSON document, with the file's task.
pub fn networks_from_json(text: &str) -> Result<(Task, Vec<Network>)> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("models").is_some() {
        let e = ensemble_from_json(text)?;
        Ok((e.task, e.members))
    } else {
        let m: ModelFile = serde_json::from_value(value)?;
        Ok((m.task, vec![m.network]))
    }
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_text(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::ensemble::{fit_ensemble, EnsembleConfig};
    use ndarray::Array2;

    fn small_ensemble() -> DjinnEnsemble {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * (j + 3)) % 7) as f64);
        let y = Array2::from_shape_fn((30, 1), |(i, _)| x[[i, 0]] * 2.0 - x[[i, 1]]);
        let ds = Dataset::new(x, y, Task::Regression).unwrap();
        fit_ensemble(
            &ds,
            &EnsembleConfig::new(Task::Regression, 3, 3, 3, 0.01, 10),
            InitScheme::Djinn,
            0,
        )
        .unwrap()
        .ensemble
    }

    #[test]
    fn ensemble_round_trip() {
        let e = small_ensemble();
        let json = ensemble_to_json(&e).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let model = &v["models"][0];
        for key in ["widths", "weights", "biases", "task", "scaler"] {
            assert!(model.get(key).is_some(), "missing {key}");
        }
        assert_eq!(ensemble_from_json(&json).unwrap(), e);
        let (task, nets) = networks_from_json(&json).unwrap();
        assert_eq!((task, nets.len()), (Task::Regression, 3));
        let single = serde_json::to_string(&v["models"][1]).unwrap();
        assert_eq!(networks_from_json(&single).unwrap().1[0], e.members[1]);
    }

    #[test]
    fn rejects_malformed_documents() {
        assert!(ensemble_from_json("{}").is_err());
        let mut v: serde_json::Value = serde_json::from_str(&ensemble_to_json(&small_ensemble()).unwrap()).unwrap();
        v["models"][0]["widths"][0] = serde_json::json!(5);
        assert!(ensemble_from_json(&v.to_string()).is_err());
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_text(&p, "x\n").unwrap();
        assert_eq!(read_text(&p).unwrap(), "x\n");
        assert!(!dir.path().join("a.partial").exists());
        assert!(matches!(read_text(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
