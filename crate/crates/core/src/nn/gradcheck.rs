use crate::error::Result;
use crate::math::{cross_entropy, cross_entropy_grad, softmax_rows, Matrix, Rng};
use crate::nn::layer::Activation;
use crate::nn::mlp::Mlp;

/// Step for central differences.
pub const FD_STEP: f64 = 1e-5;
/// ReLU units whose pre-activation comes this close to the kink are skipped.
pub const KINK_MARGIN: f64 = 1e-6;
/// Gradients smaller than this are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub excluded: usize,
}

/// Mean cross-entropy of the inference-mode output plus the L2 penalty.
pub fn objective(net: &Mlp, batch: &Matrix, labels: &[usize]) -> Result<f64> {
    let probs = softmax_rows(&net.predict(batch)?);
    Ok(cross_entropy(&probs, labels)? + net.l2_penalty())
}

/// Analytic gradient of [`objective`].
pub fn analytic_grad(net: &Mlp, batch: &Matrix, labels: &[usize]) -> Result<Vec<f64>> {
    let (logits, cache) = net.forward(batch, false, &mut Rng::new(0))?;
    let g = cross_entropy_grad(&softmax_rows(&logits), labels)?;
    Ok(net.backward(&cache, &g)?.flatten())
}

/// Compares backprop against central differences on every parameter with
/// dropout disabled.
pub fn finite_diff_check(net: &Mlp, batch: &Matrix, labels: &[usize]) -> Result<GradCheckReport> {
    let analytic = analytic_grad(net, batch, labels)?;
    let skip = kink_mask(net, batch)?;
    let mut probe = net.clone();
    let base = net.params();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        excluded: 0,
    };
    let mut p = base.clone();
    for i in 0..base.len() {
        if skip[i] {
            report.excluded += 1;
            continue;
        }
        p[i] = base[i] + FD_STEP;
        probe.set_params(&p)?;
        let up = objective(&probe, batch, labels)?;
        p[i] = base[i] - FD_STEP;
        probe.set_params(&p)?;
        let down = objective(&probe, batch, labels)?;
        p[i] = base[i];
        let numeric = (up - down) / (2.0 * FD_STEP);
        let denom = analytic[i].abs().max(numeric.abs()).max(REL_FLOOR);
        let rel = (analytic[i] - numeric).abs() / denom;
        report.max_rel_error = report.max_rel_error.max(rel);
        report.checked += 1;
    }
    Ok(report)
}

/// Marks parameters feeding ReLU units that sit on the kink for some row.
fn kink_mask(net: &Mlp, batch: &Matrix) -> Result<Vec<bool>> {
    let (_, cache) = net.forward(batch, false, &mut Rng::new(0))?;
    let mut mask = Vec::with_capacity(net.param_count());
    for (li, layer) in net.layers().iter().enumerate() {
        let units = layer.output_dim();
        let mut on_kink = vec![false; units];
        if layer.activation == Activation::Relu {
            let pre = cache.pre_activation(li);
            for r in 0..pre.rows() {
                for (u, flag) in on_kink.iter_mut().enumerate() {
                    if pre.get(r, u).abs() < KINK_MARGIN {
                        *flag = true;
                    }
                }
            }
        }
        for _ in 0..layer.input_dim() {
            mask.extend_from_slice(&on_kink);
        }
        mask.extend_from_slice(&on_kink);
    }
    Ok(mask)
}
