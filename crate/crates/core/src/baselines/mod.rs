//! Comparison methods: pooled ERM and robust min-max over environments.

use std::borrow::Cow;

use crate::data::TrainData;
use crate::error::{Error, Result};
use crate::game::{check_envs, finish, snapshot, BatchSampler, TrainConfig, TrainTrace};
use crate::math::Rng;
use crate::nn::{AdamState, Mlp};

/// Adam on the mean loss of the row-wise concatenation of `datasets`, for
/// `config.max_iters` steps. A single dataset keeps its own id, so its batch
/// and dropout streams match an ensemble of one trained on it.
pub fn train_erm<D: TrainData + Clone>(
    datasets: &[D],
    mut net: Mlp,
    config: &TrainConfig,
    test: Option<&D>,
) -> Result<(Mlp, TrainTrace)> {
    config.validate()?;
    check_envs(datasets, net.input_dim())?;
    let pooled: Cow<D> = if datasets.len() == 1 {
        Cow::Borrowed(&datasets[0])
    } else {
        let parts: Vec<&D> = datasets.iter().collect();
        Cow::Owned(D::concat(&parts, "pooled")?)
    };
    let rng = Rng::new(config.seed);
    let mut sampler = BatchSampler::new(pooled.len(), rng.child(&format!("batches/{}", pooled.env_id())));
    let mut dropout = rng.child(&format!("dropout/{}", pooled.env_id()));
    let mut opt = AdamState::for_net(&net, config.lr);
    let mut trace = TrainTrace::new(config.warm_start_for(pooled.len()));
    for step in 1..=config.max_iters {
        let rows = sampler.next_batch(config.batch_size);
        let x = pooled.features().select_rows(&rows)?;
        let (out, cache) = net.forward(&x, true, &mut dropout)?;
        let (_, g) = pooled.risk_grad(&rows, &out)?;
        let grads = net.backward(&cache, &g)?;
        opt.step(&mut net, &grads)?;
        if step % config.record_every == 0 {
            record(&mut trace, step, "erm", &net, datasets, config, test)?;
        }
    }
    finish(&mut trace, &net, test)?;
    Ok((net, trace))
}

/// Each step draws one batch per environment and applies the gradient of
/// the environment with the largest batch loss (ties to the lowest index).
pub fn train_robust_minmax<D: TrainData>(
    envs: &[D],
    mut net: Mlp,
    config: &TrainConfig,
    test: Option<&D>,
) -> Result<(Mlp, TrainTrace)> {
    config.validate()?;
    if envs.len() < 2 {
        return Err(Error::Config(format!(
            "robust min-max needs at least 2 environments, got {}",
            envs.len()
        )));
    }
    check_envs(envs, net.input_dim())?;
    let rng = Rng::new(config.seed);
    let mut samplers: Vec<BatchSampler> = envs
        .iter()
        .map(|d| BatchSampler::new(d.len(), rng.child(&format!("batches/{}", d.env_id()))))
        .collect();
    let mut dropout = rng.child("dropout/robust");
    let mut opt = AdamState::for_net(&net, config.lr);
    let train_size: usize = envs.iter().map(TrainData::len).sum();
    let mut trace = TrainTrace::new(config.warm_start_for(train_size));
    for step in 1..=config.max_iters {
        let mut worst: Option<(f64, _, _)> = None;
        for (d, s) in envs.iter().zip(samplers.iter_mut()) {
            let rows = s.next_batch(config.batch_size);
            let x = d.features().select_rows(&rows)?;
            let (out, cache) = net.forward(&x, true, &mut dropout)?;
            let (risk, g) = d.risk_grad(&rows, &out)?;
            if worst.as_ref().is_none_or(|(r, _, _)| risk > *r) {
                worst = Some((risk, cache, g));
            }
        }
        let (_, cache, g) = worst.expect("at least two environments");
        let grads = net.backward(&cache, &g)?;
        opt.step(&mut net, &grads)?;
        if step % config.record_every == 0 {
            record(&mut trace, step, "robust", &net, envs, config, test)?;
        }
    }
    finish(&mut trace, &net, test)?;
    Ok((net, trace))
}

fn record<D: TrainData>(
    trace: &mut TrainTrace,
    step: usize,
    owner: &str,
    net: &Mlp,
    envs: &[D],
    config: &TrainConfig,
    test: Option<&D>,
) -> Result<()> {
    let logits = envs
        .iter()
        .map(|d| net.predict(d.features()))
        .collect::<Result<Vec<_>>>()?;
    let mut row = snapshot(step, owner, envs, &logits, std::slice::from_ref(&logits))?;
    if let Some(t) = test {
        if (trace.rows.len() + 1) % config.test_every == 0 {
            row.test_acc = crate::game::evaluate(net, t)?.accuracy;
        }
    }
    trace.push(row)
}
