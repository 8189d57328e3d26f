//! Tabular datasets, min-max feature scaling and seeded train/test splits.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::InvalidParameter(format!("unknown task `{other}`"))),
        }
    }
}

/// Features plus targets for one supervised problem.
///
/// Classification targets are a single column of class indices stored as
/// `f64`; regression targets may have several columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    targets: Array2<f64>,
    task: Task,
    n_classes: usize,
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    /// Original label text for each class index (classification only).
    pub class_labels: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, targets: Array2<f64>, task: Task) -> Result<Self> {
        let n = features.nrows();
        if n < 2 {
            return Err(Error::Empty("a dataset needs at least two samples"));
        }
        if targets.nrows() != n {
            return Err(Error::DimensionMismatch {
                what: "target rows",
                expected: n,
                found: targets.nrows(),
            });
        }
        if targets.ncols() == 0 {
            return Err(Error::Empty("no target columns"));
        }
        if features.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        let n_classes = match task {
            Task::Regression => 0,
            Task::Classification => {
                if targets.ncols() != 1 {
                    return Err(Error::InvalidParameter(
                        "classification takes exactly one target column".into(),
                    ));
                }
                let mut max = 0usize;
                for &t in targets.iter() {
                    if t < 0.0 || t.fract() != 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "class label {t} is not a non-negative integer"
                        )));
                    }
                    max = max.max(t as usize);
                }
                max + 1
            }
        };
        let feature_names = (0..features.ncols()).map(|i| format!("x{i}")).collect();
        let target_names = (0..targets.ncols()).map(|i| format!("y{i}")).collect();
        let class_labels = (0..n_classes).map(|c| c.to_string()).collect();
        Ok(Dataset {
            features,
            targets,
            task,
            n_classes,
            feature_names,
            target_names,
            class_labels,
        })
    }

    /// Classification dataset from integer labels; `n_classes` may exceed the
    /// largest label present.
    pub fn classification(features: Array2<f64>, labels: &[usize], n_classes: usize) -> Result<Self> {
        let targets = Array2::from_shape_fn((labels.len(), 1), |(i, _)| labels[i] as f64);
        let mut ds = Dataset::new(features, targets, Task::Classification)?;
        if n_classes < ds.n_classes {
            return Err(Error::InvalidParameter(format!(
                "n_classes {n_classes} smaller than observed {}",
                ds.n_classes
            )));
        }
        ds.n_classes = n_classes;
        ds.class_labels = (0..n_classes).map(|c| c.to_string()).collect();
        Ok(ds)
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn targets(&self) -> ArrayView2<'_, f64> {
        self.targets.view()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    /// Number of classes; zero for regression.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Width of a network output layer for this problem.
    pub fn n_outputs(&self) -> usize {
        match self.task {
            Task::Regression => self.targets.ncols(),
            Task::Classification => self.n_classes,
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        self.targets.column(0).iter().map(|&v| v as usize).collect()
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            targets: self.targets.select(Axis(0), indices),
            ..self.clone_meta()
        }
    }

    /// Same targets and metadata with replaced features.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        if features.nrows() != self.n_samples() {
            return Err(Error::DimensionMismatch {
                what: "feature rows",
                expected: self.n_samples(),
                found: features.nrows(),
            });
        }
        Ok(Dataset {
            features,
            targets: self.targets.clone(),
            ..self.clone_meta()
        })
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            features: Array2::zeros((0, 0)),
            targets: Array2::zeros((0, 0)),
            task: self.task,
            n_classes: self.n_classes,
            feature_names: self.feature_names.clone(),
            target_names: self.target_names.clone(),
            class_labels: self.class_labels.clone(),
        }
    }
}

/// Reads a headed CSV file. Every column not named in `target_columns`
/// becomes a feature, in header order.
pub fn load_csv(path: impl AsRef<Path>, target_columns: &[&str], task: Task) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&text, target_columns, task)
}

pub fn parse_csv(text: &str, target_columns: &[&str], task: Task) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Empty("CSV has no header"));
    }
    if target_columns.is_empty() {
        return Err(Error::InvalidParameter("no target column given".into()));
    }
    let mut target_idx = Vec::with_capacity(target_columns.len());
    for name in target_columns {
        let idx = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn((*name).to_owned()))?;
        target_idx.push(idx);
    }
    if task == Task::Classification && target_idx.len() != 1 {
        return Err(Error::InvalidParameter(
            "classification takes exactly one target column".into(),
        ));
    }
    let feature_idx: Vec<usize> = (0..header.len()).filter(|i| !target_idx.contains(i)).collect();

    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_labels = Vec::new();
    let mut rows = 0usize;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::Csv(format!(
                "row {row} has {} cells, header has {}",
                record.len(),
                header.len()
            )));
        }
        let numeric = |c: usize| -> Result<f64> {
            record[c]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row,
                    column: header[c].clone(),
                })
        };
        for &c in &feature_idx {
            features.push(numeric(c)?);
        }
        match task {
            Task::Regression => {
                for &c in &target_idx {
                    targets.push(numeric(c)?);
                }
            }
            Task::Classification => {
                let label = record[target_idx[0]].to_owned();
                let next = class_index.len();
                let idx = *class_index.entry(label.clone()).or_insert_with(|| {
                    class_labels.push(label);
                    next
                });
                targets.push(idx as f64);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Empty("CSV has no data rows"));
    }
    let features = Array2::from_shape_vec((rows, feature_idx.len()), features).expect("row-major buffer matches shape");
    let targets = Array2::from_shape_vec((rows, target_idx.len()), targets).expect("row-major buffer matches shape");
    let mut ds = Dataset::new(features, targets, task)?;
    ds.feature_names = feature_idx.iter().map(|&i| header[i].clone()).collect();
    ds.target_names = target_idx.iter().map(|&i| header[i].clone()).collect();
    if task == Task::Classification {
        ds.n_classes = class_labels.len();
        ds.class_labels = class_labels;
    }
    Ok(ds)
}

/// Per-feature minimum and maximum observed on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_scaler(train_features: ArrayView2<'_, f64>) -> Result<ScalingParams> {
    if train_features.nrows() == 0 {
        return Err(Error::Empty("cannot fit a scaler on zero rows"));
    }
    let fold = |init: f64, f: fn(f64, f64) -> f64| -> Vec<f64> {
        train_features
            .axis_iter(Axis(1))
            .map(|col| col.iter().copied().fold(init, f))
            .collect()
    };
    Ok(ScalingParams {
        min: fold(f64::INFINITY, f64::min),
        max: fold(f64::NEG_INFINITY, f64::max),
    })
}

impl ScalingParams {
    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    /// `(x - min) / (max - min)` without clipping; constant columns map to 0.
    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "scaler columns",
                expected: self.n_features(),
                found: features.ncols(),
            });
        }
        let mut out = features.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            let span = hi - lo;
            if span > 0.0 {
                col.mapv_inplace(|x| (x - lo) / span);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }

    /// Maps scaled values back; constant columns return their single value.
    pub fn invert(&self, scaled: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if scaled.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                what: "scaler columns",
                expected: self.n_features(),
                found: scaled.ncols(),
            });
        }
        let lo = Array1::from(self.min.clone());
        let span = Array1::from_iter(self.min.iter().zip(&self.max).map(|(a, b)| b - a));
        Ok(&scaled * &span + &lo)
    }
}

pub fn apply_scaler(features: ArrayView2<'_, f64>, params: &ScalingParams) -> Result<Array2<f64>> {
    params.apply(features)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded train/test partitions. Permutation `i` is an independent shuffle
/// driven by `seed + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub test_fraction: f64,
    pub permutations: Vec<Permutation>,
}

pub fn make_splits(n_samples: usize, n_permutations: usize, test_fraction: f64, seed: u64) -> Result<SplitPlan> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples to split, got {n_samples}"
        )));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    if n_permutations == 0 {
        return Err(Error::InvalidParameter("need at least one permutation".into()));
    }
    let n_test = ((test_fraction * n_samples as f64).round() as usize).clamp(1, n_samples - 1);
    let permutations = (0..n_permutations as u64)
        .map(|i| {
            let mut order: Vec<usize> = (0..n_samples).collect();
            order.shuffle(&mut rng(seed.wrapping_add(i), Stream::Split));
            let mut test = order[..n_test].to_vec();
            let mut train = order[n_test..].to_vec();
            test.sort_unstable();
            train.sort_unstable();
            Permutation { train, test }
        })
        .collect();
    Ok(SplitPlan {
        seed,
        test_fraction,
        permutations,
    })
}

impl Dataset {
    /// `n` distinct rows drawn without replacement, kept in their original order.
    pub fn sample_rows(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n < 2 || n > self.n_samples() {
            return Err(Error::InvalidParameter(format!(
                "cannot sample {n} of {} rows",
                self.n_samples()
            )));
        }
        let mut rows = rand::seq::index::sample(&mut rng(seed, Stream::Subsample), self.n_samples(), n).into_vec();
        rows.sort_unstable();
        Ok(self.subset(&rows))
    }
}

impl SplitPlan {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
