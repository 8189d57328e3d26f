//! Small synthetic datasets: logic-gate truth tables and a nine-input
//! response surface with a sharp cliff and a narrow peak.

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::rng::{rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    /// One input; the output copies it.
    If,
    Or,
    Xor,
}

impl Gate {
    pub const ALL: [Gate; 3] = [Gate::If, Gate::Or, Gate::Xor];

    pub fn name(self) -> &'static str {
        match self {
            Gate::If => "if",
            Gate::Or => "or",
            Gate::Xor => "xor",
        }
    }

    pub fn n_inputs(self) -> usize {
        match self {
            Gate::If => 1,
            Gate::Or | Gate::Xor => 2,
        }
    }

    pub fn eval(self, inputs: &[bool]) -> bool {
        match self {
            Gate::If => inputs[0],
            Gate::Or => inputs[0] || inputs[1],
            Gate::Xor => inputs[0] ^ inputs[1],
        }
    }
}

/// Every input combination once, as a two-class classification dataset.
pub fn truth_table(gate: Gate) -> Dataset {
    let k = gate.n_inputs();
    let rows = 1usize << k;
    let features = Array2::from_shape_fn((rows, k), |(r, j)| ((r >> (k - 1 - j)) & 1) as f64);
    let labels: Vec<usize> = features
        .outer_iter()
        .map(|row| usize::from(gate.eval(&row.iter().map(|&v| v == 1.0).collect::<Vec<_>>())))
        .collect();
    let mut ds = Dataset::classification(features, &labels, 2).expect("truth tables are valid");
    ds.feature_names = (1..=k).map(|i| format!("x{i}")).collect();
    ds.class_labels = vec!["0".into(), "1".into()];
    ds
}

pub const SURFACE_INPUTS: usize = 9;

/// Response on `[0, 1]^9`: a smooth background, a logistic cliff across the
/// plane `x4 + 0.5 x5 = 0.8`, and a narrow Gaussian peak near
/// `(0.7, 0.3, 0.6)` in the first three inputs.
pub fn cliff_peak_surface(x: ArrayView1<'_, f64>) -> f64 {
    let background = 0.3 * x[0] + 0.2 * x[1] * x[2] + 0.1 * (3.0 * x[6]).sin() + 0.05 * x[7] - 0.05 * x[8];
    let cliff = 1.0 / (1.0 + (-60.0 * (x[3] + 0.5 * x[4] - 0.8)).exp());
    let r2 = (x[0] - 0.7).powi(2) + (x[1] - 0.3).powi(2) + (x[2] - 0.6).powi(2);
    let peak = 2.0 * (-r2 / (2.0 * 0.12f64.powi(2))).exp();
    background + cliff * (1.0 + 0.5 * x[5]) + peak
}

/// Latin hypercube sample of `n` points in `[0, 1]^dims`.
pub fn latin_hypercube(n: usize, dims: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut out = Array2::zeros((n, dims));
    for j in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, s) in strata.into_iter().enumerate() {
            out[[i, j]] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    out
}

/// Regression dataset of the cliff/peak surface at Latin hypercube points.
pub fn cliff_peak_dataset(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "surface sample needs at least two points".into(),
        ));
    }
    let mut r = rng(seed, Stream::Synthetic);
    let x = latin_hypercube(n, SURFACE_INPUTS, &mut r);
    let y = Array2::from_shape_fn((n, 1), |(i, _)| cliff_peak_surface(x.row(i)));
    let mut ds = Dataset::new(x, y, Task::Regression)?;
    ds.feature_names = (1..=SURFACE_INPUTS).map(|i| format!("x{i}")).collect();
    ds.target_names = vec!["yield".into()];
    Ok(ds)
}
