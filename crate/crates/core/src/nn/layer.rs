use crate::error::{Error, Result};
use crate::math::{Matrix, Rng};

/// ELU uses alpha = 1.
pub const ELU_ALPHA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Elu,
    Relu,
    Linear,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Elu => 0,
            Activation::Relu => 1,
            Activation::Linear => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Elu),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    ELU_ALPHA * x.exp_m1()
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    ELU_ALPHA * x.exp()
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Shape and regularization of one fully connected layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub out: usize,
    pub activation: Activation,
    pub l2: f64,
    /// Drop probability (not keep probability).
    pub dropout: f64,
}

impl LayerSpec {
    pub fn linear(out: usize) -> Self {
        Self {
            out,
            activation: Activation::Linear,
            l2: 0.0,
            dropout: 0.0,
        }
    }
}

/// Fully connected layer `act(x · W + b)` followed by inverted dropout in
/// training mode.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub l2: f64,
    pub dropout: f64,
}

impl DenseLayer {
    /// Glorot-uniform weights, zero bias.
    pub fn init(input: usize, spec: &LayerSpec, rng: &mut Rng) -> Result<Self> {
        validate_reg(spec.l2, spec.dropout)?;
        let limit = (6.0 / (input + spec.out) as f64).sqrt();
        let data = (0..input * spec.out)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        Ok(Self {
            weights: Matrix::from_vec(input, spec.out, data)?,
            bias: vec![0.0; spec.out],
            activation: spec.activation,
            l2: spec.l2,
            dropout: spec.dropout,
        })
    }

    pub fn zeros(input: usize, spec: &LayerSpec) -> Result<Self> {
        validate_reg(spec.l2, spec.dropout)?;
        Ok(Self {
            weights: Matrix::zeros(input, spec.out),
            bias: vec![0.0; spec.out],
            activation: spec.activation,
            l2: spec.l2,
            dropout: spec.dropout,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.data().len() + self.bias.len()
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.bias.len() != self.weights.cols() {
            return Err(Error::shape(
                "DenseLayer",
                format!(
                    "bias length {} for {} outputs",
                    self.bias.len(),
                    self.weights.cols()
                ),
            ));
        }
        validate_reg(self.l2, self.dropout)
    }
}

fn validate_reg(l2: f64, dropout: f64) -> Result<()> {
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::Config(format!("l2 coefficient {l2} must be >= 0")));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::Config(format!("dropout {dropout} outside [0, 1)")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elu_is_continuous_at_zero() {
        assert_eq!(Activation::Elu.apply(0.0), 0.0);
        assert!((Activation::Elu.apply(-1e-9)).abs() < 1e-8);
        assert_eq!(Activation::Elu.derivative(1.0), 1.0);
        assert!((Activation::Elu.derivative(-2.0) - (-2f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn codes_round_trip() {
        for a in [Activation::Elu, Activation::Relu, Activation::Linear] {
            assert_eq!(Activation::from_code(a.code()), Some(a));
        }
        assert_eq!(Activation::from_code(9), None);
    }

    #[test]
    fn rejects_bad_dropout() {
        let spec = LayerSpec {
            dropout: 1.0,
            ..LayerSpec::linear(2)
        };
        assert!(DenseLayer::zeros(3, &spec).is_err());
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = Rng::new(0);
        let l = DenseLayer::init(10, &LayerSpec::linear(6), &mut rng).unwrap();
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(l.weights.data().iter().all(|w| w.abs() <= limit));
        assert!(l.bias.iter().all(|&b| b == 0.0));
    }
}
