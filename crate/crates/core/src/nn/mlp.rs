use crate::error::{Error, Result};
use crate::math::{Matrix, Rng};
use crate::nn::layer::{Activation, DenseLayer, LayerSpec};

/// Stack of dense layers.
///
/// Parameters are enumerated layer by layer: the weight matrix in row-major
/// order, then the bias. [`Mlp::params`], [`Gradients::flatten`] and Adam state
/// all use this order.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

#[derive(Clone, Debug)]
struct LayerCache {
    input: Matrix,
    pre: Matrix,
    /// Per-unit multiplier (0 or 1/(1-rate)) when dropout was active.
    mask: Option<Vec<f64>>,
}

/// Activations recorded by [`Mlp::forward`] for use by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    dims: Vec<(usize, usize)>,
}

impl ForwardCache {
    pub fn batch_rows(&self) -> usize {
        self.layers.first().map_or(0, |l| l.input.rows())
    }

    /// Pre-activation values of layer `i` (rows × units).
    pub fn pre_activation(&self, i: usize) -> &Matrix {
        &self.layers[i].pre
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// One gradient per parameter, aligned with [`Mlp::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.flatten().iter().all(|&g| g == 0.0)
    }
}

impl Mlp {
    pub fn new(input: usize, specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        Self::build(input, specs, |i, s| DenseLayer::init(i, s, rng))
    }

    /// All weights and biases zero.
    pub fn zeros(input: usize, specs: &[LayerSpec]) -> Result<Self> {
        Self::build(input, specs, DenseLayer::zeros)
    }

    fn build(
        input: usize,
        specs: &[LayerSpec],
        mut make: impl FnMut(usize, &LayerSpec) -> Result<DenseLayer>,
    ) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut width = input;
        for spec in specs {
            layers.push(make(width, spec)?);
            width = spec.out;
        }
        Ok(Self { layers })
    }

    /// Assembles a network from explicit layers, checking that they chain.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for l in &layers {
            l.check()?;
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    format!(
                        "layer outputs {} but next layer expects {}",
                        pair[0].output_dim(),
                        pair[1].input_dim()
                    ),
                ));
            }
        }
        Ok(Self { layers })
    }

    /// Single linear layer that copies the listed input columns, in order.
    pub fn projection(input: usize, columns: &[usize]) -> Result<Self> {
        let mut w = Matrix::zeros(input, columns.len());
        for (k, &c) in columns.iter().enumerate() {
            if c >= input {
                return Err(Error::Index(format!("column {c} of {input}")));
            }
            w.set(c, k, 1.0);
        }
        Self::from_layers(vec![DenseLayer {
            weights: w,
            bias: vec![0.0; columns.len()],
            activation: Activation::Linear,
            l2: 0.0,
            dropout: 0.0,
        }])
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::shape(
                "Mlp::set_params",
                format!("{} values for {} parameters", values.len(), self.param_count()),
            ));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.data().len();
            l.weights.data_mut().copy_from_slice(&values[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&values[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Sum over layers of `l2 · ||W||²`; biases are not penalized.
    pub fn l2_penalty(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.l2 * l.weights.frobenius_sq())
            .sum()
    }

    /// FNV-1a hash of the parameter bits, for freeze checks.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.params() {
            for b in v.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::shape(
                "Mlp::forward",
                format!("batch has {} features, network expects {}", x.cols(), self.input_dim()),
            ));
        }
        Ok(())
    }

    /// Inference-mode forward pass; no dropout, no cache.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for l in &self.layers {
            let mut z = h.matmul(&l.weights)?;
            z.add_row_vector(&l.bias)?;
            let act = l.activation;
            z.data_mut().iter_mut().for_each(|v| *v = act.apply(*v));
            h = z;
        }
        Ok(h)
    }

    /// Forward pass recording what [`Mlp::backward`] needs. Dropout masks are
    /// drawn from `rng` only when `train_mode` is set.
    pub fn forward(
        &self,
        x: &Matrix,
        train_mode: bool,
        rng: &mut Rng,
    ) -> Result<(Matrix, ForwardCache)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for l in &self.layers {
            let mut pre = h.matmul(&l.weights)?;
            pre.add_row_vector(&l.bias)?;
            let mut out = pre.map(|v| l.activation.apply(v));
            let mask = if train_mode && l.dropout > 0.0 {
                let keep = 1.0 - l.dropout;
                let mask: Vec<f64> = (0..out.data().len())
                    .map(|_| if rng.bernoulli(keep) { 1.0 / keep } else { 0.0 })
                    .collect();
                for (v, m) in out.data_mut().iter_mut().zip(&mask) {
                    *v *= m;
                }
                Some(mask)
            } else {
                None
            };
            caches.push(LayerCache {
                input: h,
                pre,
                mask,
            });
            h = out;
        }
        let dims = self.dims();
        Ok((
            h,
            ForwardCache {
                layers: caches,
                dims,
            },
        ))
    }

    fn dims(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .map(|l| (l.input_dim(), l.output_dim()))
            .collect()
    }

    fn check_cache(&self, cache: &ForwardCache, dout: &Matrix) -> Result<()> {
        if cache.dims != self.dims() {
            return Err(Error::Contract(
                "forward cache was produced by a network with different layer shapes".into(),
            ));
        }
        if dout.shape() != (cache.batch_rows(), self.output_dim()) {
            return Err(Error::shape(
                "Mlp::backward",
                format!(
                    "output gradient {:?}, expected ({}, {})",
                    dout.shape(),
                    cache.batch_rows(),
                    self.output_dim()
                ),
            ));
        }
        Ok(())
    }

    /// Parameter gradients for upstream gradient `dout` on the outputs,
    /// including the `2 · l2 · W` penalty term.
    pub fn backward(&self, cache: &ForwardCache, dout: &Matrix) -> Result<Gradients> {
        Ok(self.backprop(cache, dout, true, false)?.0.unwrap())
    }

    /// Parameter gradients and the gradient with respect to the input batch.
    pub fn backward_full(
        &self,
        cache: &ForwardCache,
        dout: &Matrix,
    ) -> Result<(Gradients, Matrix)> {
        let (g, dx) = self.backprop(cache, dout, true, true)?;
        Ok((g.unwrap(), dx.unwrap()))
    }

    /// Gradient with respect to the input batch only.
    pub fn input_grad(&self, cache: &ForwardCache, dout: &Matrix) -> Result<Matrix> {
        Ok(self.backprop(cache, dout, false, true)?.1.unwrap())
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        dout: &Matrix,
        want_params: bool,
        want_input: bool,
    ) -> Result<(Option<Gradients>, Option<Matrix>)> {
        self.check_cache(cache, dout)?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = dout.clone();
        for (i, (l, c)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            // Through dropout, then the activation.
            if let Some(mask) = &c.mask {
                for (g, m) in upstream.data_mut().iter_mut().zip(mask) {
                    *g *= m;
                }
            }
            for (g, &z) in upstream.data_mut().iter_mut().zip(c.pre.data()) {
                *g *= l.activation.derivative(z);
            }
            if want_params {
                let mut dw = c.input.t_matmul(&upstream)?;
                if l.l2 > 0.0 {
                    for (g, &w) in dw.data_mut().iter_mut().zip(l.weights.data()) {
                        *g += 2.0 * l.l2 * w;
                    }
                }
                grads.push(LayerGrad {
                    weights: dw,
                    bias: upstream.sum_rows(),
                });
            }
            if i > 0 || want_input {
                upstream = upstream.matmul_t(&l.weights)?;
            }
        }
        grads.reverse();
        Ok((
            want_params.then_some(Gradients { layers: grads }),
            want_input.then_some(upstream),
        ))
    }
}
