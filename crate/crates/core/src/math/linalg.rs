use crate::error::{Error, Result};
use crate::math::Matrix;

/// Solves `a x = b` for square `a` by Gaussian elimination with partial
/// pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::shape("solve", format!("{:?} with rhs {}", a.shape(), b.len())));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m.get(i, col).abs().total_cmp(&m.get(j, col).abs()))
            .unwrap_or(col);
        if m.get(pivot, col).abs() < 1e-300 {
            return Err(Error::Data("singular system".into()));
        }
        if pivot != col {
            for c in 0..n {
                let t = m.get(col, c);
                m.set(col, c, m.get(pivot, c));
                m.set(pivot, c, t);
            }
            x.swap(col, pivot);
        }
        for r in col + 1..n {
            let f = m.get(r, col) / m.get(col, col);
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                let v = m.get(r, c) - f * m.get(col, c);
                m.set(r, c, v);
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in r + 1..n {
            s -= m.get(r, c) * x[c];
        }
        x[r] = s / m.get(r, r);
    }
    Ok(x)
}

/// Ordinary least squares via the normal equations. With `intercept` the
/// last returned coefficient is the intercept.
pub fn least_squares(x: &Matrix, y: &[f64], intercept: bool) -> Result<Vec<f64>> {
    if x.rows() != y.len() {
        return Err(Error::shape("least_squares", "rows vs targets"));
    }
    let design = if intercept {
        let mut d = Matrix::zeros(x.rows(), x.cols() + 1);
        for r in 0..x.rows() {
            d.row_mut(r)[..x.cols()].copy_from_slice(x.row(r));
            d.set(r, x.cols(), 1.0);
        }
        d
    } else {
        x.clone()
    };
    let gram = design.t_matmul(&design)?;
    let rhs = design.t_matmul(&Matrix::column(y)?)?;
    solve(&gram, rhs.data())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]).unwrap();
        let x = solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let w = least_squares(&x, &[1.0, 3.0, 5.0], true).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
    }
}
