//! Scores, the pooled two-sample t-test, and cross-validated reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{fit_scaler, Dataset, Permutation, ScalingParams, SplitPlan, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionScores {
    pub mse: f64,
    pub mae: f64,
    pub explained_variance: f64,
}

/// MSE and MAE over every element; explained variance averaged over outputs.
pub fn regression_metrics(y_true: ArrayView2<'_, f64>, y_pred: ArrayView2<'_, f64>) -> Result<RegressionScores> {
    if y_true.dim() != y_pred.dim() {
        return Err(Error::DimensionMismatch {
            what: "prediction rows",
            expected: y_true.nrows(),
            found: y_pred.nrows(),
        });
    }
    if y_true.nrows() < 2 {
        return Err(Error::Empty("regression metrics need at least two rows"));
    }
    let residual = &y_true - &y_pred;
    let n = residual.len() as f64;
    let mse = residual.iter().map(|r| r * r).sum::<f64>() / n;
    let mae = residual.iter().map(|r| r.abs()).sum::<f64>() / n;
    let mut ev = 0.0;
    for (truth, res) in y_true.columns().into_iter().zip(residual.columns()) {
        let var_y = variance(truth.iter().copied());
        if var_y == 0.0 {
            return Err(Error::UndefinedMetric("explained variance of a constant target"));
        }
        ev += 1.0 - variance(res.iter().copied()) / var_y;
    }
    Ok(RegressionScores {
        mse,
        mae,
        explained_variance: ev / y_true.ncols() as f64,
    })
}

fn variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (sum, n) = values.clone().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    let mean = sum / n as f64;
    values.map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationScores {
    pub recall: f64,
    pub precision: f64,
    pub accuracy: f64,
}

/// Macro-averaged recall and precision; a class whose denominator is zero
/// contributes 0.
pub fn classification_metrics(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<ClassificationScores> {
    if y_true.is_empty() {
        return Err(Error::Empty("classification metrics of no rows"));
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            what: "predicted labels",
            expected: y_true.len(),
            found: y_pred.len(),
        });
    }
    if let Some(&bad) = y_true.iter().chain(y_pred).find(|&&c| c >= n_classes) {
        return Err(Error::InvalidParameter(format!(
            "label {bad} outside {n_classes} classes"
        )));
    }
    let mut hits = vec![0usize; n_classes];
    let mut actual = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        actual[t] += 1;
        predicted[p] += 1;
        if t == p {
            hits[t] += 1;
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let k = n_classes as f64;
    Ok(ClassificationScores {
        recall: (0..n_classes).map(|c| ratio(hits[c], actual[c])).sum::<f64>() / k,
        precision: (0..n_classes).map(|c| ratio(hits[c], predicted[c])).sum::<f64>() / k,
        accuracy: hits.iter().sum::<usize>() as f64 / y_true.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

/// Two-tailed pooled-variance Student's t-test.
pub fn ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidParameter(
            "t-test needs at least two scores per sample".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test scores"));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let ss = |s: &[f64], m: f64| s.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    let df = na + nb - 2.0;
    let pooled = (ss(a, ma) + ss(b, mb)) / df;
    let diff = ma - mb;
    if pooled == 0.0 {
        return Ok(if diff == 0.0 {
            TTest {
                t: 0.0,
                df,
                p_value: 1.0,
            }
        } else {
            TTest {
                t: diff.signum() * f64::INFINITY,
                df,
                p_value: f64::MIN_POSITIVE,
            }
        });
    }
    let t = diff / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let p = regularized_incomplete_beta(df / (df + t * t), df / 2.0, 0.5).clamp(f64::MIN_POSITIVE, 1.0);
    Ok(TTest { t, df, p_value: p })
}

pub fn ttest_pvalue(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(ttest(a, b)?.p_value)
}

/// `I_x(a, b)` by Lentz's continued fraction, using the symmetry relation
/// where the fraction converges slowly.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_fraction(1.0 - x, b, a) / b
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - (a + b) * x / (a + 1.0));
    let mut h = d;
    for m in 1..500 {
        let m = m as f64;
        let even = m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
        d = 1.0 / guard(1.0 + even * d);
        c = guard(1.0 + even / c);
        h *= d * c;
        let odd = -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
        d = 1.0 / guard(1.0 + odd * d);
        c = guard(1.0 + odd / c);
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Mean, population standard deviation and raw per-permutation values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub raw: Vec<f64>,
}

impl Summary {
    pub fn of(raw: Vec<f64>) -> Summary {
        let n = raw.len().max(1) as f64;
        let mean = raw.iter().sum::<f64>() / n;
        let std = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Summary { mean, std, raw }
    }
}

/// Metric names in report order.
pub fn metric_names(task: Task) -> &'static [&'static str] {
    match task {
        Task::Regression => &["mse", "mae", "ev"],
        Task::Classification => &["recall", "precision", "accuracy"],
    }
}

/// The score compared across models by the t-test.
pub fn tested_metric(task: Task) -> &'static str {
    match task {
        Task::Regression => "mse",
        Task::Classification => "accuracy",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub name: String,
    pub metrics: BTreeMap<String, Summary>,
}

impl ModelScores {
    pub fn metric(&self, name: &str) -> Option<&Summary> {
        self.metrics.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub permutations: usize,
    pub models: Vec<ModelScores>,
    /// Name of the model every other one is tested against.
    pub reference: String,
    /// p-value of each non-reference model against the reference.
    pub p_values: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn new(task: Task, models: Vec<ModelScores>, reference: &str) -> Result<Self> {
        let reference_scores = models
            .iter()
            .find(|m| m.name == reference)
            .ok_or_else(|| Error::InvalidParameter(format!("no model named {reference}")))?;
        let key = tested_metric(task);
        let base = &reference_scores.metrics[key].raw;
        let mut p_values = BTreeMap::new();
        for m in models.iter().filter(|m| m.name != reference) {
            p_values.insert(m.name.clone(), ttest_pvalue(&m.metrics[key].raw, base)?);
        }
        Ok(EvalReport {
            task,
            permutations: base.len(),
            models,
            reference: reference.to_string(),
            p_values,
        })
    }

    pub fn model(&self, name: &str) -> Option<&ModelScores> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned plain-text table, one row per model.
    pub fn to_table(&self) -> String {
        let names = metric_names(self.task);
        let mut header = vec!["model".to_string()];
        header.extend(names.iter().map(|n| n.to_uppercase()));
        header.push(format!("p ({})", tested_metric(self.task)));
        let mut rows = vec![header];
        for m in &self.models {
            let mut row = vec![m.name.clone()];
            for n in names {
                let s = &m.metrics[*n];
                row.push(format!("{:.4} ± {:.4}", s.mean, s.std));
            }
            row.push(match self.p_values.get(&m.name) {
                Some(p) => format!("{p:.3e}"),
                None => "-".into(),
            });
            rows.push(row);
        }
        let cols = rows[0].len();
        let width: Vec<usize> = (0..cols)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&width)
                .map(|(cell, w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

/// What a model returns for the test rows of one permutation.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    /// Regression outputs in target units.
    Values(Array2<f64>),
    Labels(Vec<usize>),
}

/// Training rows and scaled test features of one permutation.
pub struct Fold<'a> {
    pub index: usize,
    pub permutation: &'a Permutation,
    /// Training rows with features scaled by `scaler`.
    pub train: Dataset,
    pub test_features: Array2<f64>,
    pub scaler: ScalingParams,
}

/// Splits the dataset once per permutation, fits the scaler on the training
/// rows only, and scores the model's test predictions.
pub fn crossval_evaluate<F>(name: &str, dataset: &Dataset, plan: &SplitPlan, mut model: F) -> Result<ModelScores>
where
    F: FnMut(&Fold<'_>) -> Result<Predictions>,
{
    if plan.permutations.is_empty() {
        return Err(Error::Empty("split plan has no permutations"));
    }
    let task = dataset.task();
    let mut raw: BTreeMap<String, Vec<f64>> = metric_names(task).iter().map(|n| (n.to_string(), Vec::new())).collect();
    for (index, permutation) in plan.permutations.iter().enumerate() {
        let fold = make_fold(dataset, index, permutation)?;
        let test = dataset.subset(&permutation.test);
        let scored: Vec<f64> = match (task, model(&fold)?) {
            (Task::Regression, Predictions::Values(pred)) => {
                let s = regression_metrics(test.targets(), pred.view())?;
                vec![s.mse, s.mae, s.explained_variance]
            }
            (Task::Classification, Predictions::Labels(labels)) => {
                let s = classification_metrics(&test.labels(), &labels, dataset.n_classes())?;
                vec![s.recall, s.precision, s.accuracy]
            }
            _ => {
                return Err(Error::InvalidParameter(
                    "prediction kind does not match the task".into(),
                ))
            }
        };
        for (n, v) in metric_names(task).iter().zip(scored) {
            raw.get_mut(*n).expect("metric key").push(v);
        }
    }
    Ok(ModelScores {
        name: name.to_string(),
        metrics: raw.into_iter().map(|(k, v)| (k, Summary::of(v))).collect(),
    })
}

pub fn make_fold<'a>(dataset: &Dataset, index: usize, permutation: &'a Permutation) -> Result<Fold<'a>> {
    let train_raw = dataset.subset(&permutation.train);
    let scaler = fit_scaler(train_raw.features())?;
    let train = train_raw.with_features(scaler.apply(train_raw.features())?)?;
    let test_features = scaler.apply(dataset.subset(&permutation.test).features())?;
    Ok(Fold {
        index,
        permutation,
        train,
        test_features,
        scaler,
    })
}
