use crate::error::{Error, Result};
use crate::nn::mlp::{Gradients, Mlp};

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    pub fn for_net(net: &Mlp, lr: f64) -> Self {
        Self::new(net.param_count(), lr)
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One update of `params` in place.
    pub fn step_flat(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "state for {} parameters, got {} params and {} grads",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            ));
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        let mut p = net.params();
        self.step_flat(&mut p, &grads.flatten())?;
        net.set_params(&p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, 0.1);
        let mut p = vec![1.0, -2.0, 0.5];
        s.step_flat(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn moments_decay_under_zero_gradient() {
        let mut s = AdamState::new(1, 0.1);
        let mut p = vec![0.0];
        s.step_flat(&mut p, &[1.0]).unwrap();
        let (m1, v1) = (s.first_moment()[0], s.second_moment()[0]);
        s.step_flat(&mut p, &[0.0]).unwrap();
        assert!(s.first_moment()[0] < m1 && s.second_moment()[0] < v1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        // At t = 1, m̂ = g and v̂ = g², so the step is lr·g/(|g| + eps); it is
        // within lr·eps/|g| of lr·sign(g).
        let lr = 2.5e-4;
        for g in [3.0, -0.2, 1e-4, -1e-5] {
            let mut s = AdamState::new(1, lr);
            let mut p = vec![0.0];
            s.step_flat(&mut p, &[g]).unwrap();
            let expect = -lr * g / (g.abs() + 1e-8);
            assert!((p[0] - expect).abs() < 1e-12);
            assert!((p[0] + lr * g.signum()).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_gradient_decreases_monotonically() {
        let mut s = AdamState::new(1, 1e-2);
        let mut p = vec![0.0];
        let mut prev = p[0];
        for _ in 0..100 {
            s.step_flat(&mut p, &[0.7]).unwrap();
            assert!(p[0] < prev);
            prev = p[0];
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(2, 0.1);
        assert!(s.step_flat(&mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
