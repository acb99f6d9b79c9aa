//! Fair linear classification on the accuracy/disparate-impact trade-off.
//!
//! The crate traces the Pareto front of `min (f1, f2_di)`, where `f1` is the
//! logistic loss and `f2_di` the squared covariance between the sensitive
//! attribute and the decision value, and computes the Sharpe predictor:
//! the model with the largest `(f_f − f1) / f2_di`.

pub mod cli;
pub mod data;
pub mod error;
pub mod fairness;
pub mod model;
pub mod optim;
pub mod pareto;
pub mod sharpe;

pub use data::{Dataset, FeatureSchema, SplitSpec, SynthSpec};
pub use error::{Error, Result};
pub use model::{LinearModel, LossConfig};
pub use optim::{SGDConfig, Trajectory};
pub use pareto::{FrontConfig, FrontPoint, ObjectivePair, ParetoFront};
pub use sharpe::{SharpeConfig, SharpeResult};
