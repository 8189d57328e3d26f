//! Cross-validated runs of whole pipelines on fixed permutations.

use serde::{Deserialize, Serialize};

use crate::bayesopt::{search_architecture, SearchConfig, SearchSpace, Trial};
use crate::data::{Dataset, SplitPlan, Task};
use crate::ensemble::{build_and_train, EnsembleConfig, EnsemblePrediction, InitScheme, MemberRecord};
use crate::error::{Error, Result};
use crate::mapping::{map_and_prune, InitializedNetwork};
use crate::metrics::{crossval_evaluate, EvalReport, ModelScores, Predictions};
use crate::net::{argmax_rows, train, CostHistory, Network, TrainingConfig};
use crate::synthetic::{truth_table, Gate};
use crate::tree::{fit_tree, DecisionTree, TreeConfig};

fn to_predictions(task: Task, p: EnsemblePrediction) -> Predictions {
    match task {
        Task::Regression => Predictions::Values(p.values),
        Task::Classification => Predictions::Labels(p.labels),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRun {
    pub scheme: InitScheme,
    pub scores: ModelScores,
    /// Member records per permutation.
    pub records: Vec<Vec<MemberRecord>>,
}

impl SchemeRun {
    /// Member-averaged cost history of each permutation.
    pub fn permutation_histories(&self) -> Vec<CostHistory> {
        self.records
            .iter()
            .map(|members| CostHistory::mean(&members.iter().map(|m| m.history.clone()).collect::<Vec<_>>()))
            .collect()
    }

    /// Cost history averaged over members and permutations.
    pub fn mean_history(&self) -> CostHistory {
        CostHistory::mean(&self.permutation_histories())
    }
}

/// Trains one ensemble per permutation and scores it on that permutation's
/// test rows. With `track_test_cost`, test cost is recorded every epoch.
pub fn evaluate_scheme(
    name: &str,
    dataset: &Dataset,
    plan: &SplitPlan,
    config: &EnsembleConfig,
    scheme: InitScheme,
    seed: u64,
    track_test_cost: bool,
) -> Result<SchemeRun> {
    let task = dataset.task();
    let mut records = Vec::with_capacity(plan.permutations.len());
    let scores = crossval_evaluate(name, dataset, plan, |fold| {
        let monitor = if track_test_cost {
            Some(
                dataset
                    .subset(&fold.permutation.test)
                    .with_features(fold.test_features.clone())?,
            )
        } else {
            None
        };
        let trained = build_and_train(&fold.train, fold.scaler.clone(), config, scheme, seed, monitor.as_ref())?;
        let prediction = trained.ensemble.predict_scaled(fold.test_features.view())?;
        records.push(trained.records);
        Ok(to_predictions(task, prediction))
    })?;
    Ok(SchemeRun {
        scheme,
        scores,
        records,
    })
}

/// Every scheme on identical folds and seeds; p-values against the first.
pub fn compare_schemes(
    dataset: &Dataset,
    plan: &SplitPlan,
    config: &EnsembleConfig,
    schemes: &[InitScheme],
    seed: u64,
) -> Result<(EvalReport, Vec<SchemeRun>)> {
    if schemes.is_empty() {
        return Err(Error::Empty("no schemes to compare"));
    }
    let mut runs = Vec::with_capacity(schemes.len());
    for (i, &scheme) in schemes.iter().enumerate() {
        let mut name = scheme.as_str().to_string();
        if schemes[..i].contains(&scheme) {
            name = format!("{name}_{}", i + 1);
        }
        runs.push(evaluate_scheme(&name, dataset, plan, config, scheme, seed, true)?);
    }
    let reference = runs[0].scores.name.clone();
    let report = EvalReport::new(
        dataset.task(),
        runs.iter().map(|r| r.scores.clone()).collect(),
        &reference,
    )?;
    Ok((report, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchPermutation {
    pub space: SearchSpace,
    pub best: Trial,
    pub trials: Vec<Trial>,
    /// Hidden widths of every DJINN member on the same permutation.
    pub djinn_architectures: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchComparison {
    pub report: EvalReport,
    pub permutations: Vec<SearchPermutation>,
}

/// DJINN ensembles against the architecture search on the same folds. The
/// search depth and width bounds come from that fold's DJINN members; every
/// candidate is trained with the ensemble's training settings.
pub fn compare_with_search(
    dataset: &Dataset,
    plan: &SplitPlan,
    config: &EnsembleConfig,
    budget: usize,
    seed: u64,
) -> Result<SearchComparison> {
    let task = dataset.task();
    let mut searches = Vec::new();
    let mut djinn_predictions = Vec::new();
    let searched = crossval_evaluate("bayesopt", dataset, plan, |fold| {
        let trained = build_and_train(&fold.train, fold.scaler.clone(), config, InitScheme::Djinn, seed, None)?;
        djinn_predictions.push(to_predictions(
            task,
            trained.ensemble.predict_scaled(fold.test_features.view())?,
        ));
        let architectures: Vec<_> = trained.records.iter().map(|r| r.architecture.clone()).collect();
        let space = SearchSpace::from_architectures(&architectures)?;
        let result = search_architecture(
            &fold.train,
            &space,
            &SearchConfig::new(budget, seed.wrapping_add(fold.index as u64)),
            &config.training,
            config.scale_targets,
        )?;
        let prediction = match task {
            Task::Regression => Predictions::Values(result.best_model.predict_values(fold.test_features.view())?),
            Task::Classification => Predictions::Labels(result.best_model.predict_labels(fold.test_features.view())?),
        };
        searches.push(SearchPermutation {
            space,
            best: result.best,
            trials: result.trials,
            djinn_architectures: architectures.into_iter().map(|a| a.hidden).collect(),
        });
        Ok(prediction)
    })?;
    let mut cached = djinn_predictions.into_iter();
    let djinn = crossval_evaluate("djinn", dataset, plan, |_| {
        cached.next().ok_or(Error::Empty("missing DJINN prediction"))
    })?;
    let report = EvalReport::new(task, vec![djinn, searched], "djinn")?;
    Ok(SearchComparison {
        report,
        permutations: searches,
    })
}

/// One gate mapped from its exact tree and trained on the truth table.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRun {
    pub gate: Gate,
    pub tree: DecisionTree,
    pub initial: InitializedNetwork,
    pub trained: Network,
    pub history: CostHistory,
    pub predicted: Vec<usize>,
    pub correct: usize,
}

/// Full-batch Adam on the truth table of `gate`.
pub fn train_gate(gate: Gate, seed: u64, epochs: usize, learning_rate: f64) -> Result<GateRun> {
    let table = truth_table(gate);
    let tree = fit_tree(
        table.features(),
        table.targets(),
        Task::Classification,
        &TreeConfig::new(8),
        seed,
    )?;
    let initial = map_and_prune(&tree, 2, seed)?;
    let mut trained = initial.network.clone();
    let cfg = TrainingConfig::new(Task::Classification, epochs, learning_rate, table.n_samples()).with_seed(seed);
    let history = train(&mut trained, table.features(), table.targets(), &cfg)?;
    let predicted = argmax_rows(trained.forward(table.features())?.view());
    let correct = predicted.iter().zip(table.labels()).filter(|(p, t)| **p == *t).count();
    Ok(GateRun {
        gate,
        tree,
        initial,
        trained,
        history,
        predicted,
        correct,
    })
}
