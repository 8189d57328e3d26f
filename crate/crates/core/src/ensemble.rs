//! Forest → mapped networks → trained networks, and ensemble averaging.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::baselines::{random_dense_init, random_sparse_init, SparsityBudget};
use crate::data::{fit_scaler, Dataset, ScalingParams, SplitPlan, Task};
use crate::error::{Error, Result};
use crate::mapping::{init_stats, map_and_prune, Architecture, InitStats, InitializedNetwork};
use crate::metrics::{make_fold, regression_metrics, Summary};
use crate::net::{argmax_rows, predict, train_monitored, CostHistory, Network, TrainingConfig};
use crate::tree::{fit_forest, ForestConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    Djinn,
    RandomDense,
    RandomSparse,
}

impl InitScheme {
    pub const ALL: [InitScheme; 3] = [InitScheme::Djinn, InitScheme::RandomDense, InitScheme::RandomSparse];

    pub fn as_str(self) -> &'static str {
        match self {
            InitScheme::Djinn => "djinn",
            InitScheme::RandomDense => "random_dense",
            InitScheme::RandomSparse => "random_sparse",
        }
    }
}

impl std::fmt::Display for InitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "djinn" => Ok(InitScheme::Djinn),
            "random_dense" | "dense" => Ok(InitScheme::RandomDense),
            "random_sparse" | "sparse" => Ok(InitScheme::RandomSparse),
            other => Err(Error::InvalidParameter(format!("unknown init scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub forest: ForestConfig,
    pub training: TrainingConfig,
    /// Train regression members on targets min-max scaled with training-row
    /// statistics; predictions are mapped back to target units.
    pub scale_targets: bool,
    /// Worker threads for member training; 1 trains sequentially.
    pub jobs: usize,
}

impl EnsembleConfig {
    pub fn new(
        task: Task,
        n_trees: usize,
        max_depth: usize,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
    ) -> Self {
        EnsembleConfig {
            forest: ForestConfig::new(n_trees, max_depth, task),
            training: TrainingConfig::new(task, epochs, learning_rate, batch_size),
            scale_targets: true,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DjinnEnsemble {
    pub scheme: InitScheme,
    pub task: Task,
    pub members: Vec<Network>,
    pub member_seeds: Vec<u64>,
    /// Feature scaler fit on the training rows.
    pub scaler: ScalingParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_scaler: Option<ScalingParams>,
}

/// What happened to one member during the build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub seed: u64,
    pub architecture: Architecture,
    /// Nonzero and unity counts of the initial weights actually used.
    pub stats: InitStats,
    pub history: CostHistory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEnsemble {
    pub ensemble: DjinnEnsemble,
    pub records: Vec<MemberRecord>,
}

/// Initial weights for every member. The random schemes reuse the DJINN
/// architecture of the same tree, and the sparse one its nonzero counts
/// raised to the row/column cover minimum.
pub fn initialize_members(
    train: &Dataset,
    forest_config: &ForestConfig,
    scheme: InitScheme,
    base_seed: u64,
) -> Result<Vec<(u64, InitializedNetwork)>> {
    let forest = fit_forest(
        train.features(),
        train.targets(),
        train.task(),
        forest_config,
        base_seed,
    )?;
    let n_out = train.n_outputs();
    forest
        .trees
        .iter()
        .zip(&forest.seeds)
        .map(|(tree, &seed)| {
            let mapped = map_and_prune(tree, n_out, seed)?;
            let init = match scheme {
                InitScheme::Djinn => mapped,
                InitScheme::RandomDense => random_dense_init(&mapped.architecture, seed)?,
                InitScheme::RandomSparse => {
                    let budget = SparsityBudget::from_stats(&init_stats(&mapped)).clamped_to(&mapped.architecture);
                    random_sparse_init(&mapped.architecture, &budget, seed)?
                }
            };
            Ok((seed, init))
        })
        .collect()
}

/// Training targets: class-index column, or (optionally scaled) values.
fn training_targets(data: &Dataset, target_scaler: Option<&ScalingParams>) -> Result<Array2<f64>> {
    match target_scaler {
        Some(s) => s.apply(data.targets()),
        None => Ok(data.targets().to_owned()),
    }
}

/// Builds and trains an ensemble on feature-scaled training rows. `monitor`
/// optionally supplies scaled test rows whose cost is tracked per epoch.
pub fn build_and_train(
    train: &Dataset,
    scaler: ScalingParams,
    config: &EnsembleConfig,
    scheme: InitScheme,
    base_seed: u64,
    monitor: Option<&Dataset>,
) -> Result<TrainedEnsemble> {
    config.training.validate(train.n_samples())?;
    if config.jobs == 0 {
        return Err(Error::InvalidParameter("jobs must be at least 1".into()));
    }
    let task = train.task();
    let target_scaler = match (task, config.scale_targets) {
        (Task::Regression, true) => Some(fit_scaler(train.targets())?),
        _ => None,
    };
    let y = training_targets(train, target_scaler.as_ref())?;
    let monitor_y = monitor
        .map(|m| training_targets(m, target_scaler.as_ref()))
        .transpose()?;
    let members = initialize_members(train, &config.forest, scheme, base_seed)?;

    let run = |(seed, init): (u64, InitializedNetwork)| -> Result<(Network, MemberRecord)> {
        let stats = init_stats(&init);
        let architecture = init.architecture.clone();
        let mut net = init.network;
        let training = config.training.with_seed(seed);
        let watch = monitor.zip(monitor_y.as_ref()).map(|(m, my)| (m.features(), my.view()));
        let history = train_monitored(&mut net, train.features(), y.view(), &training, watch)?;
        Ok((
            net,
            MemberRecord {
                seed,
                architecture,
                stats,
                history,
            },
        ))
    };
    let trained: Vec<(Network, MemberRecord)> = if config.jobs == 1 {
        members.into_iter().map(run).collect::<Result<_>>()?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| members.into_par_iter().map(run).collect::<Result<_>>())?
    };
    let (nets, records): (Vec<Network>, Vec<MemberRecord>) = trained.into_iter().unzip();
    Ok(TrainedEnsemble {
        ensemble: DjinnEnsemble {
            scheme,
            task,
            member_seeds: records.iter().map(|r| r.seed).collect(),
            members: nets,
            scaler,
            target_scaler,
        },
        records,
    })
}

/// Fits the feature scaler on `train` and builds the ensemble on the scaled rows.
pub fn fit_ensemble(
    train: &Dataset,
    config: &EnsembleConfig,
    scheme: InitScheme,
    base_seed: u64,
) -> Result<TrainedEnsemble> {
    let scaler = fit_scaler(train.features())?;
    let scaled = train.with_features(scaler.apply(train.features())?)?;
    build_and_train(&scaled, scaler, config, scheme, base_seed, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    /// Regression: mean output in target units. Classification: mean class
    /// probabilities.
    pub values: Array2<f64>,
    /// Argmax of the mean probabilities; empty for regression.
    pub labels: Vec<usize>,
}

impl DjinnEnsemble {
    /// Per-member outputs for already scaled features, in target units.
    pub fn member_outputs(&self, scaled: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        self.members
            .iter()
            .map(|net| {
                let out = predict(net, scaled, self.task)?;
                match &self.target_scaler {
                    Some(s) => s.invert(out.view()),
                    None => Ok(out),
                }
            })
            .collect()
    }

    pub fn predict_scaled(&self, scaled: ArrayView2<'_, f64>) -> Result<EnsemblePrediction> {
        let outputs = self.member_outputs(scaled)?;
        Ok(aggregate(&outputs, self.task))
    }

    /// Applies the stored feature scaler first.
    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Result<EnsemblePrediction> {
        self.predict_scaled(self.scaler.apply(features)?.view())
    }
}

pub fn predict_ensemble(ensemble: &DjinnEnsemble, features: ArrayView2<'_, f64>) -> Result<EnsemblePrediction> {
    ensemble.predict(features)
}

/// Mean of member outputs; for classification these are probabilities and
/// the label is their argmax.
pub fn aggregate(outputs: &[Array2<f64>], task: Task) -> EnsemblePrediction {
    let mut values = outputs[0].clone();
    for o in &outputs[1..] {
        values += o;
    }
    values /= outputs.len() as f64;
    let labels = match task {
        Task::Regression => Vec::new(),
        Task::Classification => argmax_rows(values.view()),
    };
    EnsemblePrediction { values, labels }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_trees: usize,
    /// Test MSE divided by the one-tree test MSE of the same permutation.
    pub normalized_mse: Summary,
}

/// Normalized cross-validated MSE for each ensemble size. One ensemble of the
/// largest size is trained per permutation; member `i` depends only on seed
/// `base_seed + i`, so its prefixes are exactly the smaller ensembles.
pub fn sweep_tree_count(
    dataset: &Dataset,
    plan: &SplitPlan,
    counts: &[usize],
    config: &EnsembleConfig,
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    if dataset.task() != Task::Regression {
        return Err(Error::InvalidParameter(
            "tree-count sweep scores MSE and needs a regression task".into(),
        ));
    }
    if counts.is_empty() || counts[0] == 0 || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "tree counts must be positive and strictly ascending".into(),
        ));
    }
    let largest = *counts.last().expect("non-empty");
    let mut cfg = *config;
    cfg.forest.n_trees = largest;
    let mut per_count = vec![Vec::new(); counts.len()];
    for (index, permutation) in plan.permutations.iter().enumerate() {
        let fold = make_fold(dataset, index, permutation)?;
        let trained = build_and_train(
            &fold.train,
            fold.scaler.clone(),
            &cfg,
            InitScheme::Djinn,
            base_seed,
            None,
        )?;
        let outputs = trained.ensemble.member_outputs(fold.test_features.view())?;
        let truth = dataset.subset(&permutation.test);
        let mse_of = |k: usize| -> Result<f64> {
            let pred = aggregate(&outputs[..k], Task::Regression);
            Ok(regression_metrics(truth.targets(), pred.values.view())?.mse)
        };
        let single = mse_of(1)?;
        for (slot, &k) in per_count.iter_mut().zip(counts) {
            slot.push(if k == 1 { 1.0 } else { mse_of(k)? / single });
        }
    }
    Ok(counts
        .iter()
        .zip(per_count)
        .map(|(&n_trees, raw)| SweepRow {
            n_trees,
            normalized_mse: Summary::of(raw),
        })
        .collect())
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("n_trees,normalized_mse_mean,normalized_mse_std\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.n_trees, r.normalized_mse.mean, r.normalized_mse.std
        ));
    }
    out
}

/// Mean class probabilities or values across members, kept for callers that
/// already hold raw member outputs.
pub fn mean_outputs(outputs: &[Array2<f64>]) -> Array2<f64> {
    let stacked: Vec<ArrayView2<'_, f64>> = outputs.iter().map(|o| o.view()).collect();
    ndarray::stack(Axis(0), &stacked)
        .expect("equal shapes")
        .mean_axis(Axis(0))
        .expect("non-empty")
}
