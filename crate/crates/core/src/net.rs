//! Dense feed-forward networks: ReLU hidden layers, affine output, MSE or
//! softmax cross-entropy loss, reverse-mode gradients and Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};
use crate::rng::{rng, Stream};

/// One affine map; `weights` has shape `(n_out, n_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weights: Array2::zeros(self.weights.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkJson", into = "NetworkJson")]
pub struct Network {
    layers: Vec<Layer>,
}

/// Row-major wire form: `{"widths": [...], "weights": [[[row]...]...], "biases": [[...]...]}`.
#[derive(Serialize, Deserialize)]
struct NetworkJson {
    widths: Vec<usize>,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

impl From<Network> for NetworkJson {
    fn from(net: Network) -> Self {
        NetworkJson {
            widths: net.widths(),
            weights: net
                .layers
                .iter()
                .map(|l| l.weights.outer_iter().map(|r| r.to_vec()).collect())
                .collect(),
            biases: net.layers.iter().map(|l| l.bias.to_vec()).collect(),
        }
    }
}

impl TryFrom<NetworkJson> for Network {
    type Error = Error;

    fn try_from(json: NetworkJson) -> Result<Self> {
        if json.weights.len() != json.biases.len() || json.widths.len() != json.weights.len() + 1 {
            return Err(Error::InvalidParameter("model JSON layer counts disagree".into()));
        }
        let mut layers = Vec::with_capacity(json.weights.len());
        for (m, (rows, bias)) in json.weights.into_iter().zip(json.biases).enumerate() {
            let (n_out, n_in) = (json.widths[m + 1], json.widths[m]);
            if rows.len() != n_out || rows.iter().any(|r| r.len() != n_in) {
                return Err(Error::DimensionMismatch {
                    what: "model JSON weight rows",
                    expected: n_out,
                    found: rows.len(),
                });
            }
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            layers.push(Layer {
                weights: Array2::from_shape_vec((n_out, n_in), flat).expect("checked shape"),
                bias: Array1::from(bias),
            });
        }
        Network::new(layers)
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("a network needs at least one layer"));
        }
        for (m, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.weights.nrows() {
                return Err(Error::DimensionMismatch {
                    what: "bias length",
                    expected: layer.weights.nrows(),
                    found: layer.bias.len(),
                });
            }
            if m > 0 && layers[m - 1].weights.nrows() != layer.weights.ncols() {
                return Err(Error::DimensionMismatch {
                    what: "layer chain",
                    expected: layers[m - 1].weights.nrows(),
                    found: layer.weights.ncols(),
                });
            }
        }
        let net = Network { layers };
        if !net.is_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// `[n_in, hidden.., n_out]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].weights.ncols())
            .chain(self.layers.iter().map(|l| l.weights.nrows()))
            .collect()
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Output activations: raw values for regression, logits for classification.
    pub fn forward(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(features)?;
        let mut h = features.to_owned();
        let last = self.layers.len() - 1;
        for (m, layer) in self.layers.iter().enumerate() {
            h = affine(h.view(), layer);
            if m < last {
                h.mapv_inplace(relu);
            }
        }
        Ok(h)
    }

    fn check_input(&self, features: ArrayView2<'_, f64>) -> Result<()> {
        if features.ncols() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                what: "network inputs",
                expected: self.n_inputs(),
                found: features.ncols(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn affine(h: ArrayView2<'_, f64>, layer: &Layer) -> Array2<f64> {
    let mut z = h.dot(&layer.weights.t());
    z += &layer.bias;
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Squared error summed over outputs, averaged over rows.
    Mse,
    /// Softmax cross-entropy on logits; targets are one class-index column.
    SoftmaxCrossEntropy,
}

impl Loss {
    pub fn for_task(task: Task) -> Loss {
        match task {
            Task::Regression => Loss::Mse,
            Task::Classification => Loss::SoftmaxCrossEntropy,
        }
    }
}

/// Row-wise softmax with max-logit subtraction.
pub fn softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.outer_iter_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

/// Mean cost over the rows and its derivative with respect to the outputs.
fn output_loss(out: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, loss: Loss) -> Result<(f64, Array2<f64>)> {
    let n = out.nrows() as f64;
    match loss {
        Loss::Mse => {
            if targets.dim() != out.dim() {
                return Err(Error::DimensionMismatch {
                    what: "regression targets",
                    expected: out.ncols(),
                    found: targets.ncols(),
                });
            }
            let diff = &out - &targets;
            let cost = diff.iter().map(|d| d * d).sum::<f64>() / n;
            Ok((cost, diff * (2.0 / n)))
        }
        Loss::SoftmaxCrossEntropy => {
            if targets.ncols() != 1 || targets.nrows() != out.nrows() {
                return Err(Error::DimensionMismatch {
                    what: "class-index target column",
                    expected: 1,
                    found: targets.ncols(),
                });
            }
            let mut grad = softmax_rows(out);
            let mut cost = 0.0;
            for (i, row) in out.outer_iter().enumerate() {
                let class = targets[[i, 0]];
                if class < 0.0 || class as usize >= out.ncols() {
                    return Err(Error::InvalidParameter(format!(
                        "class {class} outside {} logits",
                        out.ncols()
                    )));
                }
                let class = class as usize;
                let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                cost += lse - row[class];
                grad[[i, class]] -= 1.0;
            }
            grad /= n;
            Ok((cost / n, grad))
        }
    }
}

pub fn cost(net: &Network, features: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, loss: Loss) -> Result<f64> {
    let out = net.forward(features)?;
    Ok(output_loss(out.view(), targets, loss)?.0)
}

/// Batch cost and parameter gradients, one [`Layer`] per network layer.
/// The ReLU derivative at exactly zero is zero.
pub fn loss_and_gradient(
    net: &Network,
    features: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    loss: Loss,
) -> Result<(f64, Vec<Layer>)> {
    if features.nrows() == 0 {
        return Err(Error::Empty("gradient of an empty batch"));
    }
    net.check_input(features)?;
    let last = net.layers.len() - 1;
    // activations[m] feeds layer m; the final entry is the network output.
    let mut activations: Vec<Array2<f64>> = Vec::with_capacity(net.layers.len() + 1);
    activations.push(features.to_owned());
    for (m, layer) in net.layers.iter().enumerate() {
        let mut z = affine(activations[m].view(), layer);
        if m < last {
            z.mapv_inplace(relu);
        }
        activations.push(z);
    }
    let (cost, mut delta) = output_loss(activations[last + 1].view(), targets, loss)?;
    let mut grads: Vec<Layer> = net.layers.iter().map(Layer::zeros_like).collect();
    for m in (0..=last).rev() {
        grads[m].weights = delta.t().dot(&activations[m]);
        grads[m].bias = delta.sum_axis(Axis(0));
        if m > 0 {
            let mut back = delta.dot(&net.layers[m].weights);
            // activations[m] > 0 exactly where the pre-activation was positive.
            Zip::from(&mut back).and(&activations[m]).for_each(|d, &a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
            delta = back;
        }
    }
    Ok((cost, grads))
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl Adam {
    pub fn new(net: &Network, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: net.layers.iter().map(Layer::zeros_like).collect(),
            v: net.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    pub fn step(&mut self, net: &mut Network, grads: &[Layer]) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.learning_rate;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, &g: &f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in net.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(update);
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(update);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss: Loss,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle_seed: u64,
}

impl TrainingConfig {
    /// Adam defaults `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(task: Task, epochs: usize, learning_rate: f64, batch_size: usize) -> Self {
        TrainingConfig {
            epochs,
            learning_rate,
            batch_size,
            loss: Loss::for_task(task),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.shuffle_seed = seed;
        self
    }

    pub fn validate(&self, n_train: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.batch_size > n_train {
            return Err(Error::InvalidParameter(format!(
                "batch size {} outside 1..={n_train}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Per-epoch mean batch cost, plus optional held-out cost.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostHistory {
    pub train: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<Vec<f64>>,
}

impl CostHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.test.is_some() {
            "epoch,cost,test_cost\n"
        } else {
            "epoch,cost\n"
        });
        for (e, c) in self.train.iter().enumerate() {
            match &self.test {
                Some(t) => out.push_str(&format!("{},{},{}\n", e + 1, c, t[e])),
                None => out.push_str(&format!("{},{}\n", e + 1, c)),
            }
        }
        out
    }

    /// Elementwise mean of equally long histories.
    pub fn mean(histories: &[CostHistory]) -> CostHistory {
        let Some(first) = histories.first() else {
            return CostHistory::default();
        };
        let n = histories.len() as f64;
        let avg = |pick: &dyn Fn(&CostHistory) -> Option<&Vec<f64>>| -> Option<Vec<f64>> {
            let len = pick(first)?.len();
            let mut acc = vec![0.0; len];
            for h in histories {
                for (a, v) in acc.iter_mut().zip(pick(h)?) {
                    *a += v / n;
                }
            }
            Some(acc)
        };
        CostHistory {
            train: avg(&|h| Some(&h.train)).unwrap_or_default(),
            test: avg(&|h| h.test.as_ref()),
        }
    }
}

pub fn train(
    net: &mut Network,
    features: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    config: &TrainingConfig,
) -> Result<CostHistory> {
    train_monitored(net, features, targets, config, None)
}

/// Mini-batch Adam. Rows are reshuffled every epoch from `shuffle_seed`; the
/// final short batch is kept. When `monitor` is given, its cost is recorded
/// after every epoch.
pub fn train_monitored(
    net: &mut Network,
    features: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    config: &TrainingConfig,
    monitor: Option<(ArrayView2<'_, f64>, ArrayView2<'_, f64>)>,
) -> Result<CostHistory> {
    let n = features.nrows();
    config.validate(n)?;
    if targets.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "target rows",
            expected: n,
            found: targets.nrows(),
        });
    }
    let mut adam = Adam::new(net, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    let mut shuffle = rng(config.shuffle_seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = CostHistory {
        train: Vec::with_capacity(config.epochs),
        test: monitor.map(|_| Vec::with_capacity(config.epochs)),
    };
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let xb = features.select(Axis(0), chunk);
            let yb = targets.select(Axis(0), chunk);
            let (c, grads) = loss_and_gradient(net, xb.view(), yb.view(), config.loss)?;
            if !c.is_finite() {
                return Err(Error::Diverged { epoch, cost: c });
            }
            adam.step(net, &grads);
            total += c;
            batches += 1;
        }
        if !net.is_finite() {
            return Err(Error::Diverged { epoch, cost: f64::NAN });
        }
        history.train.push(total / batches as f64);
        if let (Some((mx, my)), Some(test)) = (monitor, history.test.as_mut()) {
            test.push(cost(net, mx, my, config.loss)?);
        }
    }
    Ok(history)
}

/// Regression: raw outputs. Classification: softmax probabilities.
pub fn predict(net: &Network, features: ArrayView2<'_, f64>, task: Task) -> Result<Array2<f64>> {
    let out = net.forward(features)?;
    Ok(match task {
        Task::Regression => out,
        Task::Classification => softmax_rows(out.view()),
    })
}

/// Index of the largest entry per row; ties go to the lowest index.
pub fn argmax_rows(values: ArrayView2<'_, f64>) -> Vec<usize> {
    values
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
                )
                .0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_net(widths: &[usize], seed: u64) -> Network {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .map(|w| Layer {
                weights: Array2::from_shape_fn((w[1], w[0]), |_| r.random_range(-1.0..1.0)),
                bias: Array1::from_shape_fn(w[1], |_| r.random_range(-0.5..0.5)),
            })
            .collect();
        Network::new(layers).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::new(vec![
            Layer {
                weights: Array2::zeros((3, 2)),
                bias: Array1::zeros(3),
            },
            Layer {
                weights: Array2::zeros((1, 3)),
                bias: Array1::zeros(1),
            },
        ])
        .unwrap();
        let out = net.forward(array![[1.0, -4.0], [0.3, 9.0]].view()).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_network_passes_nonnegative_input() {
        let net = Network::new(vec![
            Layer {
                weights: Array2::eye(2),
                bias: Array1::zeros(2),
            },
            Layer {
                weights: Array2::eye(2),
                bias: Array1::zeros(2),
            },
        ])
        .unwrap();
        let x = array![[0.25, 0.75], [1.0, 0.0]];
        assert_eq!(net.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn matches_hand_computation() {
        let net = Network::new(vec![
            Layer {
                weights: array![[0.5, -1.0], [2.0, 0.25], [-0.75, 1.5]],
                bias: array![0.1, -0.2, 0.05],
            },
            Layer {
                weights: array![[1.0, -0.5, 2.0]],
                bias: array![0.3],
            },
        ])
        .unwrap();
        // x = (1, 2): z1 = (0.5 - 2 + 0.1, 2 + 0.5 - 0.2, -0.75 + 3 + 0.05)
        //           = (-1.4, 2.3, 2.3); h = (0, 2.3, 2.3)
        // y = -0.5 * 2.3 + 2 * 2.3 + 0.3 = 3.75
        let out = net.forward(array![[1.0, 2.0]].view()).unwrap();
        assert!((out[[0, 0]] - 3.75).abs() < 1e-12);
        assert!(net.forward(array![[1.0]].view()).is_err());
        assert!(net.forward(array![[f64::NAN, 1.0]].view()).is_err());
    }

    #[test]
    fn perfect_regression_has_zero_cost_and_gradient() {
        let net = random_net(&[2, 3, 1], 1);
        let x = array![[0.2, 0.4], [0.9, 0.1]];
        let y = net.forward(x.view()).unwrap();
        let (c, g) = loss_and_gradient(&net, x.view(), y.view(), Loss::Mse).unwrap();
        assert_eq!(c, 0.0);
        assert!(g
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|&v| v == 0.0)));
    }

    #[test]
    fn uniform_logits_cost_ln2() {
        let net = Network::new(vec![Layer {
            weights: Array2::zeros((2, 3)),
            bias: Array1::zeros(2),
        }])
        .unwrap();
        let x = array![[0.1, 0.2, 0.3], [1.0, 0.0, 0.5]];
        let y = array![[0.0], [1.0]];
        let (c, _) = loss_and_gradient(&net, x.view(), y.view(), Loss::SoftmaxCrossEntropy).unwrap();
        assert!((c - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(loss_and_gradient(&net, x.view(), array![[0.0], [2.0]].view(), Loss::SoftmaxCrossEntropy).is_err());
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax_rows(array![[0.0, 0.0], [1000.0, 0.0]].view());
        assert_eq!(p.row(0).to_vec(), vec![0.5, 0.5]);
        assert!((p[[1, 0]] - 1.0).abs() < 1e-15 && p[[1, 1]] >= 0.0 && p[[1, 1]] < 1e-300);
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut net = random_net(&[3, 4, 2], 2);
        let before = net.clone();
        let zeros: Vec<Layer> = net.layers().iter().map(Layer::zeros_like).collect();
        let mut adam = Adam::new(&net, 0.1, 0.9, 0.999, 1e-8);
        adam.step(&mut net, &zeros);
        assert_eq!(net, before);
    }

    #[test]
    fn learns_a_constant() {
        let x = Array2::from_shape_fn((32, 2), |(i, j)| ((i * 3 + j) % 7) as f64 / 7.0);
        let y = Array2::from_elem((32, 1), 0.7);
        let mut net = random_net(&[2, 4, 1], 3);
        let cfg = TrainingConfig::new(Task::Regression, 300, 0.01, 8);
        let h = train(&mut net, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(h.train.len(), 300);
        assert!(*h.train.last().unwrap() < 1e-3);
        let p = predict(&net, x.view(), Task::Regression).unwrap();
        assert!(p.iter().all(|v| (v - 0.7).abs() < 0.05));
    }

    #[test]
    fn training_is_deterministic() {
        let x = Array2::from_shape_fn((20, 3), |(i, j)| ((i * 5 + j * 3) % 11) as f64 / 11.0);
        let y = Array2::from_shape_fn((20, 1), |(i, _)| (i % 3) as f64);
        let cfg = TrainingConfig::new(Task::Classification, 20, 0.01, 6).with_seed(9);
        let (mut a, mut b) = (random_net(&[3, 5, 3], 4), random_net(&[3, 5, 3], 4));
        let ha = train(&mut a, x.view(), y.view(), &cfg).unwrap();
        let hb = train(&mut b, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let cfg = TrainingConfig::new(Task::Regression, 1, 0.01, 10);
        assert!(cfg.validate(5).is_err());
        assert!(TrainingConfig { epochs: 0, ..cfg }.validate(20).is_err());
        assert!(TrainingConfig {
            learning_rate: 0.0,
            ..cfg
        }
        .validate(20)
        .is_err());
        assert!(cfg.validate(10).is_ok());
    }

    #[test]
    fn cost_mostly_decreases_on_separable_problem() {
        let x = Array2::from_shape_fn((40, 2), |(i, j)| ((i * 7 + j * 13) % 40) as f64 / 40.0);
        let y = Array2::from_shape_fn((40, 1), |(i, _)| f64::from(u8::from(x[[i, 0]] > 0.5)));
        let mut net = random_net(&[2, 4, 2], 5);
        let cfg = TrainingConfig::new(Task::Classification, 200, 0.002, 40);
        let h = train(&mut net, x.view(), y.view(), &cfg).unwrap();
        let rises = h.train.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(rises as f64 <= 0.05 * h.train.len() as f64, "{rises} rising epochs");
    }

    #[test]
    fn model_json_is_row_major() {
        let net = Network::new(vec![Layer {
            weights: array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
            bias: array![0.0, 0.5, 1.0],
        }])
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&net).unwrap();
        assert_eq!(v["widths"], serde_json::json!([2, 3]));
        assert_eq!(v["weights"][0][1], serde_json::json!([3.0, 4.0]));
        let back: Network = serde_json::from_value(v).unwrap();
        assert_eq!(back, net);
    }

    /// Central differences on every parameter.
    fn finite_difference_error(net: &Network, x: &Array2<f64>, y: &Array2<f64>, loss: Loss) -> f64 {
        let (_, grads) = loss_and_gradient(net, x.view(), y.view(), loss).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let eval = |n: &Network| cost(n, x.view(), y.view(), loss).unwrap();
        for (m, grad) in grads.iter().enumerate() {
            for idx in 0..net.layers[m].weights.len() + net.layers[m].bias.len() {
                let mut plus = net.clone();
                let mut minus = net.clone();
                let nw = net.layers[m].weights.len();
                let (analytic, p, q) = if idx < nw {
                    let (r, c) = (idx / net.layers[m].weights.ncols(), idx % net.layers[m].weights.ncols());
                    (
                        grad.weights[[r, c]],
                        &mut plus.layers[m].weights[[r, c]],
                        &mut minus.layers[m].weights[[r, c]],
                    )
                } else {
                    let b = idx - nw;
                    (grad.bias[b], &mut plus.layers[m].bias[b], &mut minus.layers[m].bias[b])
                };
                *p += h;
                *q -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences_3x4x2() {
        let net = random_net(&[3, 4, 2], 11);
        let x = Array2::from_shape_fn((5, 3), |(i, j)| ((i * 3 + j * 7) % 10) as f64 / 10.0 + 0.05);
        let yr = Array2::from_shape_fn((5, 2), |(i, j)| (i + j) as f64 / 4.0);
        let yc = Array2::from_shape_fn((5, 1), |(i, _)| (i % 2) as f64);
        assert!(finite_difference_error(&net, &x, &yr, Loss::Mse) < 1e-5);
        assert!(finite_difference_error(&net, &x, &yc, Loss::SoftmaxCrossEntropy) < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn gradient_check_random_shapes(widths in proptest::collection::vec(1usize..6, 3..5), seed in any::<u64>(), classify in any::<bool>()) {
            let mut widths = widths;
            let last = widths.len() - 1;
            if classify { widths[last] = widths[last].max(2); }
            let net = random_net(&widths, seed);
            let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1);
            let x = Array2::from_shape_fn((4, widths[0]), |_| r.random_range(0.0..1.0));
            let (y, loss) = if classify {
                (Array2::from_shape_fn((4, 1), |_| r.random_range(0..widths[last]) as f64), Loss::SoftmaxCrossEntropy)
            } else {
                (Array2::from_shape_fn((4, widths[last]), |_| r.random_range(-1.0..1.0)), Loss::Mse)
            };
            prop_assert!(finite_difference_error(&net, &x, &y, loss) < 1e-5);
        }
    }
}
