//! Dense linear algebra, seeded randomness, losses and summary statistics.

mod linalg;
mod loss;
mod matrix;
mod rng;
mod stats;

pub use linalg::{least_squares, solve};
pub use loss::{
    cross_entropy, cross_entropy_grad, mean_squared_error, mean_squared_error_grad, softmax_rows,
    LOG_CLAMP,
};
pub use matrix::Matrix;
pub use rng::Rng;
pub use stats::{mean, pearson, quantile, sample_std, Correlation};
