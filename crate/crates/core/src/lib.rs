//! Deep jointly-informed neural networks: decision trees mapped onto sparse
//! initial weights for deep ReLU networks, then fine-tuned with Adam.
//!
//! ```
//! use djinn::ensemble::{fit_ensemble, EnsembleConfig, InitScheme};
//! use djinn::synthetic::cliff_peak_dataset;
//! use djinn::Task;
//!
//! let data = cliff_peak_dataset(300, 0)?;
//! let config = EnsembleConfig::new(Task::Regression, 3, 4, 20, 0.01, 32);
//! let trained = fit_ensemble(&data, &config, InitScheme::Djinn, 0)?;
//! let prediction = trained.ensemble.predict(data.features())?;
//! assert_eq!(prediction.values.dim(), (300, 1));
//! # Ok::<(), djinn::Error>(())
//! ```
//!
//! The guide under `book/` walks through each module; its snippets are
//! compiled by the `book-tests` crate.

pub mod baselines;
pub mod bayesopt;
pub mod data;
pub mod dot;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod mapping;
pub mod metrics;
pub mod model_io;
pub mod net;
pub mod presets;
pub mod rng;
pub mod synthetic;
pub mod tree;

pub use data::{Dataset, Task};
pub use error::{Error, Result};
