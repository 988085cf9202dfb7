use std::borrow::Cow;

use crate::data::TrainData;
use crate::error::{Error, Result};
use crate::game::eval::{evaluate, snapshot};
use crate::game::model::{EnsembleModel, PhiMode};
use crate::game::monitor::{TerminationMonitor, TerminationRule};
use crate::game::trace::TrainTrace;
use crate::math::{Matrix, Rng};
use crate::nn::AdamState;

pub const DEFAULT_LR: f64 = 2.5e-4;
pub const DEFAULT_BATCH: usize = 256;
pub const DEFAULT_TEST_EVERY: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    /// Adam steps a player takes per turn.
    pub steps_per_turn: usize,
    /// `None` means one epoch of the pooled training data.
    pub warm_start_steps: Option<usize>,
    /// Full rounds of turns (for baselines: optimizer steps).
    pub max_iters: usize,
    pub termination: TerminationRule,
    pub seed: u64,
    /// Test accuracy is attached to every `test_every`-th recorded row.
    pub test_every: usize,
    pub record_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            batch_size: DEFAULT_BATCH,
            steps_per_turn: 1,
            warm_start_steps: None,
            max_iters: 1000,
            termination: TerminationRule::default(),
            seed: 0,
            test_every: DEFAULT_TEST_EVERY,
            record_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("steps_per_turn", self.steps_per_turn),
            ("max_iters", self.max_iters),
            ("test_every", self.test_every),
            ("record_every", self.record_every),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.warm_start_steps == Some(0) {
            return Err(Error::Config("warm_start_steps must be >= 1".into()));
        }
        self.termination.validate()
    }

    pub fn warm_start_for(&self, train_size: usize) -> usize {
        self.warm_start_steps
            .unwrap_or((train_size / self.batch_size).max(1))
    }
}

/// Cycles through a shuffled permutation of `0..n`, reshuffling at the end
/// of each epoch. A batch that crosses an epoch boundary continues into the
/// next permutation.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    order: Vec<usize>,
    pos: usize,
    rng: Rng,
}

impl BatchSampler {
    pub fn new(n: usize, mut rng: Rng) -> Self {
        let order = rng.permutation(n);
        Self { order, pos: 0, rng }
    }

    /// `min(size, n)` distinct row indices.
    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let size = size.min(self.order.len());
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.pos == self.order.len() {
                self.rng.shuffle(&mut self.order);
                self.pos = 0;
            }
            let take = (size - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
        out
    }
}

/// One Adam step for player `e` on a batch of its own environment.
///
/// Only `w^e` runs in training mode; Φ and the other classifiers are frozen
/// and use inference mode. Returns the batch risk before the update.
pub fn env_turn<D: TrainData>(
    model: &mut EnsembleModel,
    e: usize,
    env: &D,
    rows: &[usize],
    opt: &mut AdamState,
    dropout_rng: &mut Rng,
) -> Result<f64> {
    let n = model.n_envs();
    if e >= n {
        return Err(Error::Index(format!("environment {e} of {n}")));
    }
    let x = env.features().select_rows(rows)?;
    let z = model.represent(&x)?;
    let (own, cache) = model.classifiers()[e].forward(&z, true, dropout_rng)?;
    let mut ens = own;
    for (q, c) in model.classifiers().iter().enumerate() {
        if q != e {
            ens.add_assign(&c.predict(&z)?)?;
        }
    }
    ens.scale(1.0 / n as f64);
    let (risk, mut g) = env.risk_grad(rows, &ens)?;
    g.scale(1.0 / n as f64);
    let grads = model.classifiers()[e].backward(&cache, &g)?;
    opt.step(model.classifier_mut(e)?, &grads)?;
    Ok(risk)
}

/// One Adam step for Φ on `Σ_e R^e` over one batch per environment, with all
/// classifiers frozen. Returns the summed batch risk before the update.
pub fn phi_turn<D: TrainData>(
    model: &mut EnsembleModel,
    batches: &[(&D, Vec<usize>)],
    opt: &mut AdamState,
    dropout_rng: &mut Rng,
) -> Result<f64> {
    if model.mode() != PhiMode::Variable {
        return Err(Error::Mode("phi_turn needs variable-Φ mode".into()));
    }
    let parts: Vec<Matrix> = batches
        .iter()
        .map(|(d, rows)| d.features().select_rows(rows))
        .collect::<Result<_>>()?;
    let refs: Vec<&Matrix> = parts.iter().collect();
    let pooled = Matrix::vstack(&refs)?;
    let phi = model.representation().expect("variable mode has Φ");
    let (z, phi_cache) = phi.forward(&pooled, true, dropout_rng)?;
    let n = model.n_envs() as f64;
    let mut dz = Matrix::zeros(z.rows(), z.cols());
    let mut total = 0.0;
    let mut start = 0;
    for (d, rows) in batches {
        let end = start + rows.len();
        let zb = z.slice_rows(start, end);
        let mut caches = Vec::with_capacity(model.n_envs());
        let mut ens = Matrix::zeros(rows.len(), model.output_dim());
        for c in model.classifiers() {
            let (out, cache) = c.forward(&zb, false, dropout_rng)?;
            ens.add_assign(&out)?;
            caches.push(cache);
        }
        ens.scale(1.0 / n);
        let (risk, mut g) = d.risk_grad(rows, &ens)?;
        total += risk;
        g.scale(1.0 / n);
        for (c, cache) in model.classifiers().iter().zip(&caches) {
            let dzb = c.input_grad(cache, &g)?;
            for i in 0..rows.len() {
                for (a, b) in dz.row_mut(start + i).iter_mut().zip(dzb.row(i)) {
                    *a += b;
                }
            }
        }
        start = end;
    }
    let grads = phi.backward(&phi_cache, &dz)?;
    opt.step(model.representation_mut().expect("variable mode has Φ"), &grads)?;
    Ok(total)
}

/// Inference-mode logits of every player on every environment, kept in sync
/// with the model so trace rows cost one forward pass per changed player.
struct LogitCache<'a> {
    reps: Vec<Cow<'a, Matrix>>,
    /// `players[q][e]`.
    players: Vec<Vec<Matrix>>,
    ens: Vec<Matrix>,
}

impl<'a> LogitCache<'a> {
    fn build<D: TrainData>(model: &EnsembleModel, envs: &'a [D]) -> Result<Self> {
        let reps = Self::reps(model, envs)?;
        let players = (0..model.n_envs())
            .map(|q| reps.iter().map(|z| model.classifiers()[q].predict(z)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        let mut cache = Self {
            reps,
            players,
            ens: Vec::new(),
        };
        cache.refresh_mean()?;
        Ok(cache)
    }

    fn reps<D: TrainData>(model: &EnsembleModel, envs: &'a [D]) -> Result<Vec<Cow<'a, Matrix>>> {
        envs.iter()
            .map(|d| match model.representation() {
                Some(phi) => phi.predict(d.features()).map(Cow::Owned),
                None => Ok(Cow::Borrowed(d.features())),
            })
            .collect()
    }

    fn refresh_player(&mut self, model: &EnsembleModel, q: usize) -> Result<()> {
        self.players[q] = self
            .reps
            .iter()
            .map(|z| model.classifiers()[q].predict(z))
            .collect::<Result<_>>()?;
        self.refresh_mean()
    }

    fn refresh_mean(&mut self) -> Result<()> {
        let n = self.players.len() as f64;
        self.ens = (0..self.reps.len())
            .map(|e| {
                let mut acc = self.players[0][e].clone();
                for p in &self.players[1..] {
                    acc.add_assign(&p[e])?;
                }
                acc.scale(1.0 / n);
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        Ok(())
    }
}

pub(crate) fn check_envs<D: TrainData>(envs: &[D], input_dim: usize) -> Result<()> {
    if envs.is_empty() {
        return Err(Error::Data("no training environments".into()));
    }
    for d in envs {
        if d.is_empty() {
            return Err(Error::Data(format!("environment {} is empty", d.env_id())));
        }
        if d.features().cols() != input_dim {
            return Err(Error::shape(
                "train",
                format!(
                    "environment {} has {} features, model expects {input_dim}",
                    d.env_id(),
                    d.features().cols()
                ),
            ));
        }
    }
    Ok(())
}

/// Round-robin best-response training.
///
/// Each iteration gives Φ one turn (variable mode only) and then each
/// environment one turn, every turn being `steps_per_turn` Adam steps of that
/// player alone. A trace row is recorded after every turn; the termination
/// monitor sees the ensemble train accuracy of each recorded row. The model
/// returned is the state when training stopped.
pub fn best_response_train<D: TrainData>(
    envs: &[D],
    mut model: EnsembleModel,
    config: &TrainConfig,
    test: Option<&D>,
) -> Result<(EnsembleModel, TrainTrace)> {
    config.validate()?;
    check_envs(envs, model.input_dim())?;
    if model.n_envs() != envs.len() {
        return Err(Error::Config(format!(
            "{} classifiers for {} environments",
            model.n_envs(),
            envs.len()
        )));
    }
    let rng = Rng::new(config.seed);
    let mut samplers: Vec<BatchSampler> = envs
        .iter()
        .map(|d| BatchSampler::new(d.len(), rng.child(&format!("batches/{}", d.env_id()))))
        .collect();
    let mut dropout: Vec<Rng> = envs
        .iter()
        .map(|d| rng.child(&format!("dropout/{}", d.env_id())))
        .collect();
    let mut opts: Vec<AdamState> = model
        .classifiers()
        .iter()
        .map(|c| AdamState::for_net(c, config.lr))
        .collect();
    let variable = model.mode() == PhiMode::Variable;
    let mut phi_samplers: Vec<BatchSampler> = envs
        .iter()
        .map(|d| BatchSampler::new(d.len(), rng.child(&format!("phi-batches/{}", d.env_id()))))
        .collect();
    let mut phi_dropout = rng.child("dropout/phi");
    let mut phi_opt = model
        .representation()
        .map(|phi| AdamState::for_net(phi, config.lr));

    let train_size: usize = envs.iter().map(TrainData::len).sum();
    let warm = config.warm_start_for(train_size);
    let mut monitor = TerminationMonitor::new(config.termination, warm);
    let mut trace = TrainTrace::new(warm);
    let mut cache = LogitCache::build(&model, envs)?;
    let mut step = 0usize;

    for _ in 0..config.max_iters {
        let owners = variable.then_some(None).into_iter().chain((0..envs.len()).map(Some));
        for owner in owners {
            match owner {
                None => {
                    let opt = phi_opt.as_mut().expect("variable mode has Φ");
                    for _ in 0..config.steps_per_turn {
                        let batches: Vec<(&D, Vec<usize>)> = envs
                            .iter()
                            .zip(phi_samplers.iter_mut())
                            .map(|(d, s)| (d, s.next_batch(config.batch_size)))
                            .collect();
                        phi_turn(&mut model, &batches, opt, &mut phi_dropout)?;
                    }
                    cache = LogitCache::build(&model, envs)?;
                }
                Some(e) => {
                    for _ in 0..config.steps_per_turn {
                        let rows = samplers[e].next_batch(config.batch_size);
                        env_turn(&mut model, e, &envs[e], &rows, &mut opts[e], &mut dropout[e])?;
                    }
                    cache.refresh_player(&model, e)?;
                }
            }
            step += 1;
            if step % config.record_every != 0 {
                continue;
            }
            let name = owner.map_or("phi", |e| envs[e].env_id());
            let mut row = snapshot(step, name, envs, &cache.ens, &cache.players)?;
            let n_recorded = trace.rows.len() + 1;
            if let Some(t) = test {
                if n_recorded % config.test_every == 0 {
                    row.test_acc = evaluate(&model, t)?.accuracy;
                }
            }
            let acc = row.ens_train_acc;
            trace.push(row)?;
            if let Some(a) = acc {
                if monitor.should_terminate(a, step) {
                    trace.terminated_at = Some(step);
                    finish(&mut trace, &model, test)?;
                    return Ok((model, trace));
                }
            }
        }
    }
    finish(&mut trace, &model, test)?;
    Ok((model, trace))
}

/// Makes sure the last row carries the final test accuracy.
pub(crate) fn finish<P: crate::game::Predictor, D: TrainData>(
    trace: &mut TrainTrace,
    model: &P,
    test: Option<&D>,
) -> Result<()> {
    if let (Some(t), Some(last)) = (test, trace.rows.last_mut()) {
        if last.test_acc.is_none() {
            last.test_acc = evaluate(model, t)?.accuracy;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_covers_each_epoch() {
        let mut s = BatchSampler::new(10, Rng::new(1));
        let mut seen: Vec<usize> = (0..5).flat_map(|_| s.next_batch(4)).collect();
        // 20 draws = two full epochs.
        seen.sort_unstable();
        let want: Vec<usize> = (0..10).flat_map(|i| [i, i]).collect();
        assert_eq!(seen, want);
    }

    #[test]
    fn oversized_batch_is_full_batch() {
        let mut s = BatchSampler::new(3, Rng::new(1));
        let mut b = s.next_batch(256);
        b.sort_unstable();
        assert_eq!(b, vec![0, 1, 2]);
    }

    #[test]
    fn default_warm_start_is_one_epoch() {
        let c = TrainConfig::default();
        assert_eq!(c.warm_start_for(4000), 15);
        assert_eq!(c.warm_start_for(10), 1);
    }

    #[test]
    fn config_rejects_zero_counts() {
        let c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
