use crate::error::{Error, Result};
use crate::math::{Matrix, Rng};

/// Linear structural model `Y = γᵀX_c + ε` with an anti-causal spurious
/// channel `X_s = α_e·Y + N(0, 1)` whose loading changes per environment.
#[derive(Clone, Debug, PartialEq)]
pub struct SemSpec {
    pub n_causal: usize,
    pub n_spurious: usize,
    pub gamma: Vec<f64>,
    pub alpha_per_env: Vec<f64>,
    pub noise_sd: f64,
    pub samples_per_env: usize,
}

impl SemSpec {
    fn validate(&self) -> Result<()> {
        if self.gamma.len() != self.n_causal {
            return Err(Error::Config(format!(
                "gamma has {} entries for {} causal features",
                self.gamma.len(),
                self.n_causal
            )));
        }
        if self.alpha_per_env.is_empty() || self.samples_per_env == 0 {
            return Err(Error::Config("need at least one non-empty environment".into()));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::Config("noise_sd must be >= 0".into()));
        }
        if self.n_spurious > 0 {
            for (i, a) in self.alpha_per_env.iter().enumerate() {
                if self.alpha_per_env[..i].contains(a) {
                    return Err(Error::Config(format!(
                        "spurious loading {a} repeats across environments"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Regression environment: columns are the causal features, then the
/// spurious ones.
#[derive(Clone, Debug, PartialEq)]
pub struct SemEnvironment {
    pub env_id: String,
    pub features: Matrix,
    pub targets: Vec<f64>,
    /// Spurious loading; `None` for pooled data.
    pub alpha: Option<f64>,
}

/// Samples every environment and returns them with the ground-truth `γ`.
pub fn make_linear_sem(spec: &SemSpec, rng: &Rng) -> Result<(Vec<SemEnvironment>, Vec<f64>)> {
    spec.validate()?;
    let d = spec.n_causal + spec.n_spurious;
    let mut envs = Vec::with_capacity(spec.alpha_per_env.len());
    for (k, &alpha) in spec.alpha_per_env.iter().enumerate() {
        let id = format!("env{}", k + 1);
        let mut r = rng.child(&format!("sem/{id}"));
        let mut x = Matrix::zeros(spec.samples_per_env, d);
        let mut y = Vec::with_capacity(spec.samples_per_env);
        for i in 0..spec.samples_per_env {
            let row = x.row_mut(i);
            let mut target = 0.0;
            for (j, g) in spec.gamma.iter().enumerate() {
                row[j] = r.normal();
                target += g * row[j];
            }
            target += spec.noise_sd * r.normal();
            for j in spec.n_causal..d {
                row[j] = alpha * target + r.normal();
            }
            y.push(target);
        }
        envs.push(SemEnvironment {
            env_id: id,
            features: x,
            targets: y,
            alpha: Some(alpha),
        });
    }
    Ok((envs, spec.gamma.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrainData;
    use crate::math::least_squares;

    fn spec(alphas: Vec<f64>, noise: f64, n: usize) -> SemSpec {
        SemSpec {
            n_causal: 2,
            n_spurious: 1,
            gamma: vec![1.5, -0.5],
            alpha_per_env: alphas,
            noise_sd: noise,
            samples_per_env: n,
        }
    }

    #[test]
    fn noiseless_unloaded_ols_recovers_gamma() {
        let (envs, gamma) = make_linear_sem(&spec(vec![0.0], 0.0, 40), &Rng::new(1)).unwrap();
        let w = least_squares(&envs[0].features, &envs[0].targets, false).unwrap();
        assert!((w[0] - gamma[0]).abs() < 1e-8);
        assert!((w[1] - gamma[1]).abs() < 1e-8);
        assert!(w[2].abs() < 1e-8);
    }

    #[test]
    fn opposite_loadings_cancel_when_pooled() {
        // Pooled cov(X_s, Y) = mean of ±var(Y) = 0, and X_s ⟂ X_c.
        let (envs, _) = make_linear_sem(&spec(vec![1.0, -1.0], 1.0, 10_000), &Rng::new(2)).unwrap();
        let pooled = SemEnvironment::concat(&[&envs[0], &envs[1]], "pool").unwrap();
        let w = least_squares(&pooled.features, &pooled.targets, false).unwrap();
        assert!(w[2].abs() < 0.03, "spurious weight {}", w[2]);
    }

    #[test]
    fn per_env_ols_uses_spurious_channel() {
        // Population coefficient on X_s given X_c is ασ²/(α²σ² + 1).
        let (envs, _) = make_linear_sem(&spec(vec![1.0, 0.9], 1.0, 10_000), &Rng::new(3)).unwrap();
        for (env, alpha) in envs.iter().zip([1.0f64, 0.9]) {
            let w = least_squares(&env.features, &env.targets, false).unwrap();
            let population = alpha / (alpha * alpha + 1.0);
            assert!(w[2].abs() > 0.2);
            assert!((w[2] - population).abs() < 0.03);
        }
    }

    #[test]
    fn repeated_loading_rejected() {
        assert!(make_linear_sem(&spec(vec![0.5, 0.5], 1.0, 10), &Rng::new(0)).is_err());
    }
}
