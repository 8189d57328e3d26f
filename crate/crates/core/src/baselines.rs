//! Non-informative initializations with the same architecture as a mapped
//! tree: fully dense Xavier weights, and sparse Xavier weights that copy the
//! per-layer nonzero count of a mapped network.

use ndarray::{Array1, Array2};
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{xavier_sigma, Architecture, InitStats, InitializedNetwork};
use crate::net::{Layer, Network};
use crate::rng::{rng, Stream};

/// Nonzero weights per weight matrix, input side first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityBudget {
    pub nonzero: Vec<usize>,
}

impl SparsityBudget {
    pub fn from_stats(stats: &InitStats) -> Self {
        SparsityBudget {
            nonzero: stats.nonzero.clone(),
        }
    }

    /// Raises each count to the cover minimum `max(rows, cols)` and caps it
    /// at `rows * cols`.
    pub fn clamped_to(&self, arch: &Architecture) -> Self {
        let shapes = layer_shapes(arch);
        SparsityBudget {
            nonzero: self
                .nonzero
                .iter()
                .zip(&shapes)
                .map(|(&n, &(r, c))| n.clamp(r.max(c), r * c))
                .collect(),
        }
    }

    pub fn check(&self, arch: &Architecture) -> Result<()> {
        let shapes = layer_shapes(arch);
        if shapes.len() != self.nonzero.len() {
            return Err(Error::DimensionMismatch {
                what: "sparsity budget layers",
                expected: shapes.len(),
                found: self.nonzero.len(),
            });
        }
        for (layer, (&budget, &(r, c))) in self.nonzero.iter().zip(&shapes).enumerate() {
            if budget < r.max(c) || budget > r * c {
                return Err(Error::InfeasibleBudget {
                    layer,
                    budget,
                    min: r.max(c),
                    max: r * c,
                });
            }
        }
        Ok(())
    }
}

/// `(rows, cols)` of every weight matrix.
fn layer_shapes(arch: &Architecture) -> Vec<(usize, usize)> {
    arch.widths().windows(2).map(|w| (w[1], w[0])).collect()
}

fn nonzero_sample(normal: &Normal<f64>, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = normal.sample(rng);
        if v != 0.0 {
            return v;
        }
    }
}

/// Every weight and bias drawn from `N(0, sigma^2)` with the layer's Xavier sigma.
pub fn random_dense_init(arch: &Architecture, seed: u64) -> Result<InitializedNetwork> {
    arch.validate()?;
    let mut rng = rng(seed, Stream::Baseline);
    let mut layers = Vec::new();
    for (r, c) in layer_shapes(arch) {
        let normal = Normal::new(0.0, xavier_sigma(c, r)?).expect("finite sigma");
        let weights = Array2::from_shape_simple_fn((r, c), || nonzero_sample(&normal, &mut rng));
        let bias = Array1::from_shape_simple_fn(r, || normal.sample(&mut rng));
        layers.push(Layer { weights, bias });
    }
    Ok(InitializedNetwork::new(Network::new(layers)?))
}

/// Exactly `budget.nonzero[m]` sampled weights in layer `m`, with every row
/// and column holding at least one.
pub fn random_sparse_init(arch: &Architecture, budget: &SparsityBudget, seed: u64) -> Result<InitializedNetwork> {
    arch.validate()?;
    budget.check(arch)?;
    let mut rng = rng(seed, Stream::Baseline);
    let mut layers = Vec::new();
    for ((r, c), &count) in layer_shapes(arch).into_iter().zip(&budget.nonzero) {
        let normal = Normal::new(0.0, xavier_sigma(c, r)?).expect("finite sigma");
        let mask = sparse_mask(r, c, count, &mut rng);
        let weights = mask.mapv(|on| if on { nonzero_sample(&normal, &mut rng) } else { 0.0 });
        let bias = Array1::from_shape_simple_fn(r, || normal.sample(&mut rng));
        layers.push(Layer { weights, bias });
    }
    Ok(InitializedNetwork::new(Network::new(layers)?))
}

/// Cyclic cover of the shuffled longer dimension by the shuffled shorter
/// one, then uniform fill among the remaining cells.
fn sparse_mask(rows: usize, cols: usize, count: usize, rng: &mut impl Rng) -> Array2<bool> {
    let mut mask = Array2::from_elem((rows, cols), false);
    let mut long: Vec<usize> = (0..rows.max(cols)).collect();
    let mut short: Vec<usize> = (0..rows.min(cols)).collect();
    long.shuffle(rng);
    short.shuffle(rng);
    for (k, &i) in long.iter().enumerate() {
        let j = short[k % short.len()];
        let cell = if rows >= cols { (i, j) } else { (j, i) };
        mask[cell] = true;
    }
    let free: Vec<(usize, usize)> = mask.indexed_iter().filter(|(_, &on)| !on).map(|(ix, _)| ix).collect();
    let extra = count - long.len();
    for k in index::sample(rng, free.len(), extra) {
        mask[free[k]] = true;
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::init_stats;
    use proptest::prelude::*;

    fn arch(widths: &[usize]) -> Architecture {
        Architecture {
            n_in: widths[0],
            hidden: widths[1..widths.len() - 1].to_vec(),
            n_out: widths[widths.len() - 1],
        }
    }

    fn covered(w: &Array2<f64>) -> bool {
        w.rows().into_iter().all(|r| r.iter().any(|&v| v != 0.0))
            && w.columns().into_iter().all(|c| c.iter().any(|&v| v != 0.0))
    }

    #[test]
    fn three_by_four_budget_five() {
        // Layer 0 maps 4 inputs to 3 neurons; layer 1 is 3 -> 3.
        let a = arch(&[4, 3, 3]);
        let net = random_sparse_init(&a, &SparsityBudget { nonzero: vec![5, 3] }, 1).unwrap();
        let w = &net.network.layers()[0].weights;
        assert_eq!(w.dim(), (3, 4));
        assert_eq!(w.iter().filter(|&&v| v != 0.0).count(), 5);
        assert!(covered(w));
    }

    #[test]
    fn infeasible_budget_is_rejected() {
        let a = arch(&[4, 3, 3]);
        let err = random_sparse_init(&a, &SparsityBudget { nonzero: vec![3, 3] }, 1).unwrap_err();
        assert!(matches!(
            err,
            Error::InfeasibleBudget {
                layer: 0,
                budget: 3,
                min: 4,
                max: 12
            }
        ));
        assert!(random_sparse_init(&a, &SparsityBudget { nonzero: vec![13, 3] }, 1).is_err());
        assert!(random_sparse_init(&a, &SparsityBudget { nonzero: vec![5] }, 1).is_err());
    }

    #[test]
    fn full_budget_is_dense() {
        let a = arch(&[4, 3, 2]);
        let net = random_sparse_init(&a, &SparsityBudget { nonzero: vec![12, 6] }, 2).unwrap();
        assert!(net.network.layers().iter().all(|l| l.weights.iter().all(|&v| v != 0.0)));
    }

    #[test]
    fn clamping_makes_budgets_feasible() {
        let a = arch(&[4, 3, 2]);
        let b = SparsityBudget { nonzero: vec![1, 40] }.clamped_to(&a);
        assert_eq!(b.nonzero, vec![4, 6]);
        b.check(&a).unwrap();
    }

    #[test]
    fn dense_has_no_zeros_and_no_unity_roles() {
        let a = arch(&[5, 7, 6, 2]);
        let net = random_dense_init(&a, 3).unwrap();
        let stats = init_stats(&net);
        assert_eq!(stats.nonzero, vec![35, 42, 12]);
        assert_eq!(net.architecture, a);
        assert_eq!(random_dense_init(&a, 3).unwrap(), net);
        assert_ne!(random_dense_init(&a, 4).unwrap(), net);
    }

    #[test]
    fn dense_variance_matches_sigma() {
        // 400 input-layer weights per seed, 250 seeds.
        let a = arch(&[1, 400, 1]);
        let sigma2 = xavier_sigma(1, 400).unwrap().powi(2);
        let mut sum = 0.0;
        let mut n = 0usize;
        for seed in 0..250 {
            let net = random_dense_init(&a, seed).unwrap();
            for v in net.network.layers()[0].weights.iter() {
                sum += v * v;
                n += 1;
            }
        }
        let var = sum / n as f64;
        assert_eq!(n, 100_000);
        assert!((var / sigma2 - 1.0).abs() < 0.05, "{var} vs {sigma2}");
    }

    proptest! {
        #[test]
        fn sparse_counts_match_budget(
            widths in proptest::collection::vec(1usize..9, 2..5),
            fractions in proptest::collection::vec(0.0f64..1.0, 4),
            seed in any::<u64>(),
        ) {
            let a = arch(&widths);
            let nonzero: Vec<usize> = widths.windows(2).zip(&fractions).map(|(w, f)| {
                let (lo, hi) = (w[0].max(w[1]), w[0] * w[1]);
                lo + ((hi - lo) as f64 * f).floor() as usize
            }).collect();
            let budget = SparsityBudget { nonzero: nonzero.clone() };
            let net = random_sparse_init(&a, &budget, seed).unwrap();
            prop_assert_eq!(init_stats(&net).nonzero, nonzero);
            prop_assert_eq!(init_stats(&net).unity.iter().sum::<usize>(), 0);
            for l in net.network.layers() {
                prop_assert!(covered(&l.weights));
            }
        }
    }
}
