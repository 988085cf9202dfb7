//! The ensemble game: one classifier per environment on a shared
//! representation, trained by round-robin best responses.

mod eval;
mod model;
mod monitor;
mod trace;
mod train;

pub use eval::{evaluate, hard_label_correlation, spurious_correlation, Evaluation};
pub(crate) use eval::snapshot;
pub use model::{EnsembleModel, PhiMode, Predictor, ENSEMBLE_MAGIC, ENSEMBLE_VERSION};
pub use monitor::{TerminationMonitor, TerminationRule, DEFAULT_QUANTILE, DEFAULT_WINDOW};
pub use trace::{fmt_sig, TraceRow, TrainTrace};
pub use train::{
    best_response_train, env_turn, phi_turn, BatchSampler, TrainConfig, DEFAULT_BATCH, DEFAULT_LR,
    DEFAULT_TEST_EVERY,
};
pub(crate) use train::{check_envs, finish};

use crate::error::Result;
use crate::math::Matrix;

/// Mean of the classifiers' logits on `Φ(batch)`, inference mode.
pub fn ensemble_logits(model: &EnsembleModel, batch: &Matrix) -> Result<Matrix> {
    model.logits(batch)
}
