//! Loss families, gradient oracles and synthetic data.

mod dataset;
mod generate;
mod loss;

pub use dataset::{fmt_f64, Dataset};
pub use generate::{
    column_means, generate_linear, generate_logistic, generate_ma_timeseries, generate_mean_series,
    generate_sparse_highdim, logistic_truth, second_moment, CovarianceSpec, SyntheticTruth,
};
pub use loss::LossModel;
