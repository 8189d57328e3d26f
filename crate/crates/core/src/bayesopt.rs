//! Gaussian-process Bayesian optimization over hidden-layer widths.

use std::collections::HashSet;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::random_dense_init;
use crate::data::{fit_scaler, make_splits, Dataset, ScalingParams, Task};
use crate::error::{Error, Result};
use crate::mapping::Architecture;
use crate::net::{argmax_rows, cost, predict, train, Network, TrainingConfig};
use crate::rng::{rng, Stream};

/// Inclusive width bounds, one pair per hidden layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub bounds: Vec<(usize, usize)>,
}

impl SearchSpace {
    pub fn new(bounds: Vec<(usize, usize)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Empty("search space needs at least one layer"));
        }
        if let Some(&(lo, hi)) = bounds.iter().find(|(lo, hi)| *lo == 0 || hi < lo) {
            return Err(Error::InvalidParameter(format!("invalid width bounds [{lo}, {hi}]")));
        }
        Ok(SearchSpace { bounds })
    }

    pub fn uniform(n_layers: usize, lower: usize, upper: usize) -> Result<Self> {
        SearchSpace::new(vec![(lower, upper); n_layers])
    }

    /// Same depth as the deepest mapped network; widths in
    /// `[2, 2 * widest mapped hidden layer]`.
    pub fn from_architectures(architectures: &[Architecture]) -> Result<Self> {
        let n_layers = architectures
            .iter()
            .map(|a| a.hidden.len())
            .max()
            .ok_or(Error::Empty("no architectures"))?;
        let widest = architectures
            .iter()
            .flat_map(|a| a.hidden.iter().copied())
            .max()
            .unwrap_or(1);
        SearchSpace::uniform(n_layers, 2, (2 * widest).max(2))
    }

    pub fn n_layers(&self) -> usize {
        self.bounds.len()
    }

    /// Number of distinct width vectors, saturating.
    pub fn cardinality(&self) -> u128 {
        self.bounds
            .iter()
            .fold(1u128, |acc, (lo, hi)| acc.saturating_mul((hi - lo + 1) as u128))
    }

    pub fn contains(&self, widths: &[usize]) -> bool {
        widths.len() == self.bounds.len() && widths.iter().zip(&self.bounds).all(|(w, (lo, hi))| lo <= w && w <= hi)
    }

    fn to_unit(&self, widths: &[usize]) -> Vec<f64> {
        widths
            .iter()
            .zip(&self.bounds)
            .map(|(&w, &(lo, hi))| {
                if hi == lo {
                    0.0
                } else {
                    (w - lo) as f64 / (hi - lo) as f64
                }
            })
            .collect()
    }

    /// Maps a point of the unit cube onto the integer grid.
    fn snap(&self, u: &[f64]) -> Vec<usize> {
        u.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| (lo + (v * (hi - lo + 1) as f64) as usize).min(hi))
            .collect()
    }

    fn random_point(&self, rng: &mut impl Rng) -> Vec<usize> {
        self.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
    }

    /// Every point in mixed-radix order.
    fn enumerate(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for &(lo, hi) in &self.bounds {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (lo..=hi).map(move |w| {
                        let mut p = prefix.clone();
                        p.push(w);
                        p
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub iteration: usize,
    pub widths: Vec<usize>,
    pub objective: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Total objective evaluations.
    pub budget: usize,
    pub initial_design: usize,
    pub candidates: usize,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        SearchConfig {
            budget,
            initial_design: 10,
            candidates: 1000,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult<M> {
    pub best: Trial,
    pub best_model: M,
    pub trials: Vec<Trial>,
}

/// `k`-th element of the van der Corput sequence in `base`.
fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while k > 0 {
        out += (k % base) as f64 * scale;
        k /= base;
        scale *= inv;
    }
    out
}

fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().all(|p| !c.is_multiple_of(*p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Squared-exponential GP on standardized observations.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    chol: Array2<f64>,
    length_scale: f64,
    signal_variance: f64,
    y_mean: f64,
    y_std: f64,
}

const LENGTH_SCALES: [f64; 8] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.2, 2.0];
const SIGNAL_VARIANCES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const NOISE_LEVELS: [f64; 4] = [1e-6, 1e-4, 1e-2, 1e-1];

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum()
}

/// Lower Cholesky factor, or `None` if the matrix is not positive definite.
fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                let d = a[[i, i]] - s;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[[i, j]] = d.sqrt();
            } else {
                l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    Some(l)
}

fn forward_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[[i, k]] * x[k]).sum();
        x[i] = (b[i] - s) / l[[i, i]];
    }
    x
}

fn backward_solve(l: &Array2<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[[k, i]] * x[k]).sum();
        x[i] = (b[i] - s) / l[[i, i]];
    }
    x
}

impl GaussianProcess {
    /// Picks length scale, signal variance and noise from a fixed grid by
    /// log marginal likelihood.
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::Empty("GP needs matching, non-empty observations"));
        }
        let n = y.len();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let sd = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let y_std = if sd > 0.0 { sd } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();
        let d2: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| sq_dist(a, b)).collect()).collect();

        let mut best: Option<(f64, GaussianProcess)> = None;
        for &ls in &LENGTH_SCALES {
            for &sv in &SIGNAL_VARIANCES {
                for &noise in &NOISE_LEVELS {
                    let k = Array2::from_shape_fn((n, n), |(i, j)| {
                        sv * (-d2[i][j] / (2.0 * ls * ls)).exp() + if i == j { noise } else { 0.0 }
                    });
                    let Some(chol) = cholesky(&k) else { continue };
                    let alpha = backward_solve(&chol, &forward_solve(&chol, &ys));
                    let fit: f64 = ys.iter().zip(&alpha).map(|(a, b)| a * b).sum();
                    let log_det: f64 = (0..n).map(|i| chol[[i, i]].ln()).sum();
                    let lml = -0.5 * fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
                    if lml.is_finite() && best.as_ref().is_none_or(|(b, _)| lml > *b) {
                        let gp = GaussianProcess {
                            x: x.to_vec(),
                            alpha,
                            chol,
                            length_scale: ls,
                            signal_variance: sv,
                            y_mean,
                            y_std,
                        };
                        best = Some((lml, gp));
                    }
                }
            }
        }
        best.map(|(_, gp)| gp).ok_or_else(|| {
            Error::InvalidParameter("GP covariance is not positive definite for any grid setting".into())
        })
    }

    /// Latent mean and standard deviation in standardized units.
    pub fn predict_standardized(&self, point: &[f64]) -> (f64, f64) {
        let k: Vec<f64> = self
            .x
            .iter()
            .map(|xi| {
                self.signal_variance * (-sq_dist(xi, point) / (2.0 * self.length_scale * self.length_scale)).exp()
            })
            .collect();
        let mean = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_solve(&self.chol, &k);
        let var = (self.signal_variance - v.iter().map(|t| t * t).sum::<f64>()).max(0.0);
        (mean, var.sqrt())
    }

    /// Mean and standard deviation in objective units.
    pub fn predict(&self, point: &[f64]) -> (f64, f64) {
        let (m, s) = self.predict_standardized(point);
        (self.y_mean + m * self.y_std, s * self.y_std)
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }
}

/// Expected improvement below `best` for a minimization problem.
pub fn expected_improvement(mean: f64, std: f64, best: f64) -> f64 {
    let improvement = best - mean;
    if std <= 0.0 {
        return improvement.max(0.0);
    }
    let z = improvement / std;
    let cdf = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (improvement * cdf + std * pdf).max(0.0)
}

/// Minimizes `objective` over `space` with exactly `config.budget`
/// evaluations. The objective receives the widths and a per-trial seed and
/// returns the score with whatever model produced it; the best model is kept.
pub fn optimize<M, F>(space: &SearchSpace, config: &SearchConfig, mut objective: F) -> Result<SearchResult<M>>
where
    F: FnMut(&[usize], u64) -> Result<(f64, M)>,
{
    let cardinality = space.cardinality();
    let n_init = (config.initial_design as u128).min(cardinality) as usize;
    if config.budget == 0 || config.budget < n_init {
        return Err(Error::InvalidParameter(format!(
            "budget {} is smaller than the initial design of {n_init}",
            config.budget
        )));
    }
    let mut rng = rng(config.seed, Stream::Search);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut trials: Vec<Trial> = Vec::with_capacity(config.budget);
    let mut best: Option<(usize, M)> = None;

    let mut evaluate = |widths: Vec<usize>, trials: &mut Vec<Trial>, best: &mut Option<(usize, M)>| -> Result<()> {
        let iteration = trials.len();
        let seed = config.seed.wrapping_add(iteration as u64);
        let (value, model) = objective(&widths, seed)?;
        if !value.is_finite() {
            return Err(Error::NonFinite("search objective"));
        }
        if best.as_ref().is_none_or(|(b, _)| value < trials[*b].objective) {
            *best = Some((iteration, model));
        }
        trials.push(Trial {
            iteration,
            widths,
            objective: value,
            seed,
        });
        Ok(())
    };

    // Halton design, skipping duplicates after rounding to the grid.
    let bases = primes(space.n_layers());
    let mut k = 1u64;
    let mut design = Vec::new();
    while design.len() < n_init && k < 100_000 {
        let u: Vec<f64> = bases.iter().map(|&b| radical_inverse(k, b)).collect();
        let w = space.snap(&u);
        if seen.insert(w.clone()) {
            design.push(w);
        }
        k += 1;
    }
    while design.len() < n_init {
        let w = space.random_point(&mut rng);
        if seen.insert(w.clone()) {
            design.push(w);
        }
    }
    for w in design {
        evaluate(w, &mut trials, &mut best)?;
    }

    while trials.len() < config.budget {
        let remaining = cardinality - seen.len() as u128;
        let candidates: Vec<Vec<usize>> = if remaining == 0 {
            vec![space.random_point(&mut rng)]
        } else if remaining <= config.candidates as u128 {
            space.enumerate().into_iter().filter(|w| !seen.contains(w)).collect()
        } else {
            let mut pool = HashSet::new();
            let mut out = Vec::with_capacity(config.candidates);
            while out.len() < config.candidates {
                let w = space.random_point(&mut rng);
                if !seen.contains(&w) && pool.insert(w.clone()) {
                    out.push(w);
                }
            }
            out
        };
        let x: Vec<Vec<f64>> = trials.iter().map(|t| space.to_unit(&t.widths)).collect();
        let y: Vec<f64> = trials.iter().map(|t| t.objective).collect();
        let pick = match GaussianProcess::fit(&x, &y) {
            Ok(gp) => {
                let incumbent = gp.standardize(y.iter().copied().fold(f64::INFINITY, f64::min));
                let mut chosen = 0;
                let mut top = f64::NEG_INFINITY;
                for (i, c) in candidates.iter().enumerate() {
                    let (m, s) = gp.predict_standardized(&space.to_unit(c));
                    let ei = expected_improvement(m, s, incumbent);
                    if ei > top {
                        top = ei;
                        chosen = i;
                    }
                }
                candidates[chosen].clone()
            }
            Err(e) => {
                log::warn!("surrogate fit failed ({e}); proposing a random candidate");
                candidates[rng.random_range(0..candidates.len())].clone()
            }
        };
        seen.insert(pick.clone());
        evaluate(pick, &mut trials, &mut best)?;
    }
    let (index, best_model) = best.expect("at least one trial");
    Ok(SearchResult {
        best: trials[index].clone(),
        best_model,
        trials,
    })
}

pub fn trials_to_csv(trials: &[Trial]) -> String {
    let layers = trials.iter().map(|t| t.widths.len()).max().unwrap_or(0);
    let mut out = String::from("iteration,seed,objective");
    for l in 1..=layers {
        out.push_str(&format!(",width_{l}"));
    }
    out.push('\n');
    for t in trials {
        out.push_str(&format!("{},{},{}", t.iteration, t.seed, t.objective));
        for w in &t.widths {
            out.push_str(&format!(",{w}"));
        }
        out.push('\n');
    }
    out
}

/// A dense network chosen by the search, with the target scaling it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchedModel {
    pub task: Task,
    pub network: Network,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_scaler: Option<ScalingParams>,
}

impl SearchedModel {
    /// Regression values in target units, or class probabilities.
    pub fn predict_values(&self, scaled: ndarray::ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let out = predict(&self.network, scaled, self.task)?;
        match &self.target_scaler {
            Some(s) => s.invert(out.view()),
            None => Ok(out),
        }
    }

    pub fn predict_labels(&self, scaled: ndarray::ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(self.predict_values(scaled)?.view()))
    }
}

/// Architecture search on feature-scaled training rows: each candidate is a
/// dense Xavier network trained on an inner 80% split and scored by its cost
/// on the remaining 20%.
pub fn search_architecture(
    train_rows: &Dataset,
    space: &SearchSpace,
    config: &SearchConfig,
    training: &TrainingConfig,
    scale_targets: bool,
) -> Result<SearchResult<SearchedModel>> {
    let plan = make_splits(train_rows.n_samples(), 1, 0.2, config.seed)?;
    let inner = train_rows.subset(&plan.permutations[0].train);
    let valid = train_rows.subset(&plan.permutations[0].test);
    let task = train_rows.task();
    let target_scaler = match (task, scale_targets) {
        (Task::Regression, true) => Some(fit_scaler(inner.targets())?),
        _ => None,
    };
    let targets = |d: &Dataset| match &target_scaler {
        Some(s) => s.apply(d.targets()),
        None => Ok(d.targets().to_owned()),
    };
    let (inner_y, valid_y) = (targets(&inner)?, targets(&valid)?);
    let mut cfg = *training;
    cfg.batch_size = cfg.batch_size.min(inner.n_samples());
    optimize(space, config, |widths, seed| {
        let arch = Architecture {
            n_in: train_rows.n_features(),
            hidden: widths.to_vec(),
            n_out: train_rows.n_outputs(),
        };
        let mut net = random_dense_init(&arch, seed)?.network;
        train(&mut net, inner.features(), inner_y.view(), &cfg.with_seed(seed))?;
        let score = cost(&net, valid.features(), valid_y.view(), cfg.loss)?;
        Ok((
            score,
            SearchedModel {
                task,
                network: net,
                target_scaler: target_scaler.clone(),
            },
        ))
    })
}
