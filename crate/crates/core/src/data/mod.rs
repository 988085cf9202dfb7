//! Multi-environment benchmarks with planted spurious correlations, the IDX
//! reader for image corpora, and a linear structural-equation generator.

mod benchmark;
mod cache;
mod idx;
mod sem;
mod shapes;
mod spurious;

pub use benchmark::{
    load_idx_corpus, make_benchmark, Benchmark, BenchmarkKind, BenchmarkSpec, CorpusKind,
    DEFAULT_FLIP_PROBS,
};
pub use cache::{read_env, write_env, ENV_MAGIC, ENV_VERSION};
pub use idx::{parse_idx, read_idx, IdxArray, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use sem::{make_linear_sem, SemEnvironment, SemSpec};
pub use shapes::{synth_shapes, MIN_CANVAS};
pub use spurious::{make_spurious_env, make_spurious_pair, SpuriousMode, LABEL_NOISE};

use crate::error::{Error, Result};
use crate::math::{
    cross_entropy, cross_entropy_grad, mean_squared_error, mean_squared_error_grad, softmax_rows,
    Matrix,
};

/// Grayscale images with preliminary binary labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImages {
    /// n × (height·width), values in `[0, 1]`.
    pub images: Matrix,
    pub prelim_labels: Vec<usize>,
    pub height: usize,
    pub width: usize,
    /// Row index of each image in the corpus it was drawn from.
    pub source_rows: Vec<usize>,
}

impl LabeledImages {
    pub fn new(images: Matrix, prelim_labels: Vec<usize>, height: usize, width: usize) -> Result<Self> {
        if images.cols() != height * width || images.rows() != prelim_labels.len() {
            return Err(Error::shape(
                "LabeledImages",
                format!(
                    "{:?} images, {} labels, {height}x{width} canvas",
                    images.shape(),
                    prelim_labels.len()
                ),
            ));
        }
        if prelim_labels.iter().any(|&y| y > 1) {
            return Err(Error::Data("preliminary labels must be binary".into()));
        }
        if images.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data("pixel values must lie in [0, 1]".into()));
        }
        let source_rows = (0..prelim_labels.len()).collect();
        Ok(Self {
            images,
            prelim_labels,
            height,
            width,
            source_rows,
        })
    }

    pub fn len(&self) -> usize {
        self.prelim_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prelim_labels.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        Ok(Self {
            images: self.images.select_rows(rows)?,
            prelim_labels: rows.iter().map(|&r| self.prelim_labels[r]).collect(),
            height: self.height,
            width: self.width,
            source_rows: rows.iter().map(|&r| self.source_rows[r]).collect(),
        })
    }
}

/// One classification environment: features, final labels `y`, and the
/// spurious attribute `z` planted from `y` with flip probability `flip_prob`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentDataset {
    pub env_id: String,
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub spurious_bits: Vec<bool>,
    pub flip_prob: f64,
    pub source_rows: Vec<usize>,
}

impl EnvironmentDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    fn check(&self) -> Result<()> {
        if self.features.rows() != self.labels.len() || self.spurious_bits.len() != self.labels.len()
        {
            return Err(Error::shape(
                "EnvironmentDataset",
                format!(
                    "{} feature rows, {} labels, {} spurious bits",
                    self.features.rows(),
                    self.labels.len(),
                    self.spurious_bits.len()
                ),
            ));
        }
        Ok(())
    }

    /// Empirical P(z ≠ y).
    pub fn spurious_flip_rate(&self) -> f64 {
        let flips = self
            .labels
            .iter()
            .zip(&self.spurious_bits)
            .filter(|(&y, &z)| (y == 1) != z)
            .count();
        flips as f64 / self.len().max(1) as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    SquaredError,
}

/// What the training loops need from an environment.
pub trait TrainData {
    fn env_id(&self) -> &str;
    fn features(&self) -> &Matrix;
    fn loss_kind(&self) -> LossKind;

    /// Mean risk over `rows` given model outputs for exactly those rows, and
    /// its gradient with respect to the outputs.
    fn risk_grad(&self, rows: &[usize], outputs: &Matrix) -> Result<(f64, Matrix)>;

    fn risk(&self, rows: &[usize], outputs: &Matrix) -> Result<f64>;

    /// Fraction of argmax-correct rows; `None` for regression targets.
    fn accuracy(&self, rows: &[usize], outputs: &Matrix) -> Option<f64>;

    fn spurious_bits(&self) -> Option<&[bool]>;

    /// Row-wise concatenation under a new id.
    fn concat(parts: &[&Self], env_id: &str) -> Result<Self>
    where
        Self: Sized;

    fn len(&self) -> usize {
        self.features().rows()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn all_rows(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

fn gather<T: Copy>(values: &[T], rows: &[usize]) -> Result<Vec<T>> {
    rows.iter()
        .map(|&r| {
            values
                .get(r)
                .copied()
                .ok_or_else(|| Error::Index(format!("row {r} of {}", values.len())))
        })
        .collect()
}

impl TrainData for EnvironmentDataset {
    fn env_id(&self) -> &str {
        &self.env_id
    }

    fn features(&self) -> &Matrix {
        &self.features
    }

    fn loss_kind(&self) -> LossKind {
        LossKind::CrossEntropy
    }

    fn risk_grad(&self, rows: &[usize], outputs: &Matrix) -> Result<(f64, Matrix)> {
        let labels = gather(&self.labels, rows)?;
        let probs = softmax_rows(outputs);
        Ok((
            cross_entropy(&probs, &labels)?,
            cross_entropy_grad(&probs, &labels)?,
        ))
    }

    fn risk(&self, rows: &[usize], outputs: &Matrix) -> Result<f64> {
        let labels = gather(&self.labels, rows)?;
        cross_entropy(&softmax_rows(outputs), &labels)
    }

    fn accuracy(&self, rows: &[usize], outputs: &Matrix) -> Option<f64> {
        if rows.is_empty() || outputs.rows() != rows.len() {
            return None;
        }
        let hits = outputs
            .argmax_rows()
            .iter()
            .zip(rows)
            .filter(|(&p, &r)| self.labels.get(r) == Some(&p))
            .count();
        Some(hits as f64 / rows.len() as f64)
    }

    fn spurious_bits(&self) -> Option<&[bool]> {
        Some(&self.spurious_bits)
    }

    fn concat(parts: &[&Self], env_id: &str) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Data("nothing to concatenate".into()));
        }
        let features: Vec<&Matrix> = parts.iter().map(|p| &p.features).collect();
        let n: usize = parts.iter().map(|p| p.len()).sum();
        let flip = parts.iter().map(|p| p.flip_prob * p.len() as f64).sum::<f64>() / n.max(1) as f64;
        let out = Self {
            env_id: env_id.to_string(),
            features: Matrix::vstack(&features)?,
            labels: parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
            spurious_bits: parts.iter().flat_map(|p| p.spurious_bits.iter().copied()).collect(),
            flip_prob: flip,
            source_rows: parts.iter().flat_map(|p| p.source_rows.iter().copied()).collect(),
        };
        out.check()?;
        Ok(out)
    }
}

impl TrainData for SemEnvironment {
    fn env_id(&self) -> &str {
        &self.env_id
    }

    fn features(&self) -> &Matrix {
        &self.features
    }

    fn loss_kind(&self) -> LossKind {
        LossKind::SquaredError
    }

    fn risk_grad(&self, rows: &[usize], outputs: &Matrix) -> Result<(f64, Matrix)> {
        let target = Matrix::column(&gather(&self.targets, rows)?)?;
        Ok((
            mean_squared_error(outputs, &target)?,
            mean_squared_error_grad(outputs, &target)?,
        ))
    }

    fn risk(&self, rows: &[usize], outputs: &Matrix) -> Result<f64> {
        let target = Matrix::column(&gather(&self.targets, rows)?)?;
        mean_squared_error(outputs, &target)
    }

    fn accuracy(&self, _rows: &[usize], _outputs: &Matrix) -> Option<f64> {
        None
    }

    fn spurious_bits(&self) -> Option<&[bool]> {
        None
    }

    fn concat(parts: &[&Self], env_id: &str) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Data("nothing to concatenate".into()));
        }
        let features: Vec<&Matrix> = parts.iter().map(|p| &p.features).collect();
        Ok(Self {
            env_id: env_id.to_string(),
            features: Matrix::vstack(&features)?,
            targets: parts.iter().flat_map(|p| p.targets.iter().copied()).collect(),
            alpha: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EnvironmentDataset {
        EnvironmentDataset {
            env_id: "t".into(),
            features: Matrix::zeros(4, 2),
            labels: vec![0, 1, 1, 0],
            spurious_bits: vec![false, true, false, false],
            flip_prob: 0.25,
            source_rows: vec![0, 1, 2, 3],
        }
    }

    #[test]
    fn flip_rate_counts_mismatches() {
        assert_eq!(tiny().spurious_flip_rate(), 0.25);
    }

    #[test]
    fn constant_logits_score_by_class_zero() {
        let d = tiny();
        let acc = d.accuracy(&d.all_rows(), &Matrix::zeros(4, 2)).unwrap();
        assert_eq!(acc, 0.5);
    }

    #[test]
    fn concat_stacks_rows() {
        let d = tiny();
        let both = EnvironmentDataset::concat(&[&d, &d], "pool").unwrap();
        assert_eq!(both.len(), 8);
        assert_eq!(both.env_id, "pool");
        assert_eq!(&both.labels[4..], &d.labels[..]);
    }

    #[test]
    fn out_of_range_rows_error() {
        let d = tiny();
        assert!(d.risk(&[9], &Matrix::zeros(1, 2)).is_err());
    }
}
