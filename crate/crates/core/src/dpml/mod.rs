//! Logistic regression trained by private SGD under three trust models:
//! local DP, network DP (token walk on the complete graph) and a trusted
//! curator with subsampling amplification.

mod data;
mod model;
mod train;

pub use data::{preprocess, read_csv, synthetic_two_gaussians, Dataset, FederatedData};
pub use model::{accuracy, fit_reference, logistic_grad, objective, LogisticObjective};
pub use train::{
    calibrate_regime, local_epsilon, local_sigma, recheck_privacy, train, Calibration, Regime,
    TracePoint, TrainConfig, TrainOutcome,
};
