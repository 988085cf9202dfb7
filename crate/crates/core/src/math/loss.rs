use crate::error::{Error, Result};
use crate::math::Matrix;

/// Probability floor applied before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// Row-wise softmax, stabilized by subtracting each row's max.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    let cols = out.cols();
    if cols == 0 {
        return out;
    }
    for row in out.data_mut().chunks_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn check_labels(op: &'static str, probs: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != probs.rows() {
        return Err(Error::shape(
            op,
            format!("{} labels for {} rows", labels.len(), probs.rows()),
        ));
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= probs.cols()) {
        return Err(Error::Index(format!(
            "label {bad} with {} classes",
            probs.cols()
        )));
    }
    Ok(())
}

/// Mean negative log-likelihood of the labelled class. Probabilities are
/// clamped below at [`LOG_CLAMP`].
pub fn cross_entropy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels("cross_entropy", probs, labels)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| -probs.get(i, y).max(LOG_CLAMP).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Gradient of the mean cross-entropy with respect to the logits that
/// produced `probs`: `(p - onehot(y)) / batch`.
pub fn cross_entropy_grad(probs: &Matrix, labels: &[usize]) -> Result<Matrix> {
    check_labels("cross_entropy_grad", probs, labels)?;
    let mut g = probs.clone();
    let n = labels.len().max(1) as f64;
    for (i, &y) in labels.iter().enumerate() {
        let v = g.get(i, y) - 1.0;
        g.set(i, y, v);
    }
    g.scale(1.0 / n);
    Ok(g)
}

pub fn mean_squared_error(pred: &Matrix, target: &Matrix) -> Result<f64> {
    pred.check_same_shape("mean_squared_error", target)?;
    let n = pred.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let s: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(s / n as f64)
}

/// Gradient of [`mean_squared_error`] with respect to `pred`.
pub fn mean_squared_error_grad(pred: &Matrix, target: &Matrix) -> Result<Matrix> {
    let mut g = pred.sub(target)?;
    let n = pred.data().len().max(1) as f64;
    g.scale(2.0 / n);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<f64>]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_rows(&m(&[vec![0.0, 0.0], vec![1000.0, 0.0], vec![3f64.ln(), 0.0]]));
        assert_eq!(p.row(0), &[0.5, 0.5]);
        assert!((p.get(1, 0) - 1.0).abs() < 1e-12 && p.get(1, 1).abs() < 1e-12);
        assert!((p.get(2, 0) - 0.75).abs() < 1e-12);
        assert!((p.get(2, 1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&m(&[vec![1.0, 0.0]]), &[0]).unwrap(), 0.0);
        let half = cross_entropy(&m(&[vec![0.5, 0.5]]), &[1]).unwrap();
        assert!((half - 2f64.ln()).abs() < 1e-15);
        let two = cross_entropy(&m(&[vec![0.75, 0.25], vec![0.25, 0.75]]), &[0, 1]).unwrap();
        assert!((two - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let v = cross_entropy(&m(&[vec![1.0, 0.0]]), &[1]).unwrap();
        assert!((v - (-LOG_CLAMP.ln())).abs() < 1e-9);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            cross_entropy(&m(&[vec![0.5, 0.5]]), &[2]),
            Err(Error::Index(_))
        ));
        assert!(matches!(
            cross_entropy_grad(&m(&[vec![0.5, 0.5]]), &[5]),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn mse_examples() {
        let a = m(&[vec![1.0, 2.0]]);
        assert_eq!(mean_squared_error(&a, &a).unwrap(), 0.0);
        assert_eq!(mean_squared_error(&m(&[vec![1.0]]), &m(&[vec![3.0]])).unwrap(), 4.0);
        assert_eq!(mean_squared_error(&a, &m(&[vec![0.0, 0.0]])).unwrap(), 2.5);
        assert!(matches!(
            mean_squared_error(&a, &m(&[vec![0.0]])),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn logit_gradient_examples() {
        let g = cross_entropy_grad(&m(&[vec![0.5, 0.5]]), &[1]).unwrap();
        assert_eq!(g.row(0), &[0.5, -0.5]);
        let z = cross_entropy_grad(&m(&[vec![0.0, 1.0], vec![1.0, 0.0]]), &[1, 0]).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }
}
