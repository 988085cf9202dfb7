use crate::data::TrainData;
use crate::error::{Error, Result};
use crate::game::EnsembleModel;
use crate::math::{Matrix, Rng};
use crate::nn::{AdamState, Mlp};

/// Smallest deviation budget accepted by the certificates.
pub const MIN_BUDGET: usize = 100;
pub const PERTURB_SCALES: [f64; 3] = [0.01, 0.1, 1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct EnvDeviation {
    pub env_id: String,
    pub before: f64,
    /// Lowest risk any searched deviation reached.
    pub best: f64,
    pub gain: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    pub check: &'static str,
    pub per_env: Vec<EnvDeviation>,
    pub max_gain: f64,
    pub eps: f64,
    pub candidates: usize,
    pub pass: bool,
}

impl DeviationReport {
    fn new(check: &'static str, per_env: Vec<EnvDeviation>, eps: f64, candidates: usize) -> Self {
        let max_gain = per_env.iter().map(|d| d.gain).fold(0.0, f64::max);
        Self {
            check,
            per_env,
            max_gain,
            eps,
            candidates,
            pass: max_gain < eps,
        }
    }

    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("check".to_string(), self.check.to_string()),
            ("pass".into(), self.pass.to_string()),
            ("eps".into(), self.eps.to_string()),
            ("max_gain".into(), self.max_gain.to_string()),
            ("candidates".into(), self.candidates.to_string()),
        ];
        for d in &self.per_env {
            kv.push((format!("{}.before", d.env_id), d.before.to_string()));
            kv.push((format!("{}.best", d.env_id), d.best.to_string()));
            kv.push((format!("{}.gain", d.env_id), d.gain.to_string()));
        }
        kv
    }
}

fn check_budget(budget: usize) -> Result<()> {
    if budget < MIN_BUDGET {
        return Err(Error::Config(format!(
            "deviation budget {budget} below the minimum of {MIN_BUDGET}"
        )));
    }
    Ok(())
}

fn represent_all<D: TrainData>(model: &EnsembleModel, envs: &[D]) -> Result<Vec<Matrix>> {
    envs.iter().map(|d| model.represent(d.features())).collect()
}

/// Approximate Nash certificate: each player in turn retrains its own
/// classifier alone, full batch and without dropout, for `budget` Adam steps
/// against the frozen others. Passes iff no player lowered its own risk by
/// `eps` or more.
pub fn verify_nash<D: TrainData>(
    model: &EnsembleModel,
    envs: &[D],
    budget: usize,
    lr: f64,
    eps: f64,
) -> Result<DeviationReport> {
    check_budget(budget)?;
    if envs.len() != model.n_envs() {
        return Err(Error::Config(format!(
            "{} environments for {} players",
            envs.len(),
            model.n_envs()
        )));
    }
    let reps = represent_all(model, envs)?;
    let n = model.n_envs() as f64;
    let mut per_env = Vec::with_capacity(envs.len());
    for (e, (env, z)) in envs.iter().zip(&reps).enumerate() {
        let rows = env.all_rows();
        let mut others = Matrix::zeros(z.rows(), model.output_dim());
        for (q, c) in model.classifiers().iter().enumerate() {
            if q != e {
                others.add_assign(&c.predict(z)?)?;
            }
        }
        let mut player = model.classifiers()[e].clone();
        let mut opt = AdamState::for_net(&player, lr);
        let mut unused = Rng::new(0);
        let ensemble = |own: &Matrix| -> Result<Matrix> {
            let mut s = own.clone();
            s.add_assign(&others)?;
            s.scale(1.0 / n);
            Ok(s)
        };
        let mut before = None;
        let mut best = f64::INFINITY;
        for _ in 0..budget {
            let (own, cache) = player.forward(z, false, &mut unused)?;
            let (risk, mut g) = env.risk_grad(&rows, &ensemble(&own)?)?;
            before.get_or_insert(risk);
            best = best.min(risk);
            g.scale(1.0 / n);
            let grads = player.backward(&cache, &g)?;
            opt.step(&mut player, &grads)?;
        }
        best = best.min(env.risk(&rows, &ensemble(&player.predict(z)?)?)?);
        let before = before.expect("budget is positive");
        per_env.push(EnvDeviation {
            env_id: env.env_id().to_string(),
            before,
            best,
            gain: before - best,
        });
    }
    Ok(DeviationReport::new("nash", per_env, eps, budget * envs.len()))
}

/// Sampled invariance certificate with Φ frozen: the whole ensemble
/// classifier is replaced by random parameter perturbations at three scales
/// and by copies retrained on each environment alone. Passes iff no candidate
/// lowers any environment's risk by `eps` or more.
pub fn verify_invariance<D: TrainData>(
    model: &EnsembleModel,
    envs: &[D],
    n_perturb: usize,
    retrain_steps: usize,
    lr: f64,
    eps: f64,
    rng: &mut Rng,
) -> Result<DeviationReport> {
    check_budget(n_perturb)?;
    let reps = represent_all(model, envs)?;
    let rows: Vec<Vec<usize>> = envs.iter().map(TrainData::all_rows).collect();
    let risks = |clfs: &[Mlp]| -> Result<Vec<f64>> {
        envs.iter()
            .zip(&reps)
            .zip(&rows)
            .map(|((d, z), r)| d.risk(r, &mean_logits(clfs, z)?))
            .collect()
    };
    let before = risks(model.classifiers())?;
    let mut best = before.clone();
    let params: Vec<Vec<f64>> = model.classifiers().iter().map(Mlp::params).collect();
    let count: usize = params.iter().map(Vec::len).sum();
    let sq: f64 = params.iter().flatten().map(|v| v * v).sum();
    let rms = if sq > 0.0 { (sq / count as f64).sqrt() } else { 1.0 };
    for k in 0..n_perturb {
        let sd = PERTURB_SCALES[k % PERTURB_SCALES.len()] * rms;
        let mut clfs = model.classifiers().to_vec();
        for (c, p) in clfs.iter_mut().zip(&params) {
            let noisy: Vec<f64> = p.iter().map(|v| v + sd * rng.normal()).collect();
            c.set_params(&noisy)?;
        }
        for (b, r) in best.iter_mut().zip(risks(&clfs)?) {
            *b = b.min(r);
        }
    }
    let mut candidates = n_perturb;
    if retrain_steps > 0 {
        for (e, (env, z)) in envs.iter().zip(&reps).enumerate() {
            let mut clfs = model.classifiers().to_vec();
            let mut opts: Vec<AdamState> = clfs.iter().map(|c| AdamState::for_net(c, lr)).collect();
            for _ in 0..retrain_steps {
                let r = joint_step(&mut clfs, &mut opts, env, z, &rows[e])?;
                best[e] = best[e].min(r);
            }
            for (b, r) in best.iter_mut().zip(risks(&clfs)?) {
                *b = b.min(r);
            }
            candidates += 1;
        }
    }
    let per_env = envs
        .iter()
        .zip(before.iter().zip(&best))
        .map(|(d, (&b, &a))| EnvDeviation {
            env_id: d.env_id().to_string(),
            before: b,
            best: a,
            gain: b - a,
        })
        .collect();
    Ok(DeviationReport::new("invariance", per_env, eps, candidates))
}

fn mean_logits(clfs: &[Mlp], z: &Matrix) -> Result<Matrix> {
    let mut acc = clfs[0].predict(z)?;
    for c in &clfs[1..] {
        acc.add_assign(&c.predict(z)?)?;
    }
    acc.scale(1.0 / clfs.len() as f64);
    Ok(acc)
}

/// One full-batch step of every classifier on one environment's risk of
/// their mean. Returns the risk before the step.
fn joint_step<D: TrainData>(
    clfs: &mut [Mlp],
    opts: &mut [AdamState],
    env: &D,
    z: &Matrix,
    rows: &[usize],
) -> Result<f64> {
    let n = clfs.len() as f64;
    let mut unused = Rng::new(0);
    let mut caches = Vec::with_capacity(clfs.len());
    let mut ens: Option<Matrix> = None;
    for c in clfs.iter() {
        let (out, cache) = c.forward(z, false, &mut unused)?;
        match ens.as_mut() {
            Some(acc) => acc.add_assign(&out)?,
            None => ens = Some(out),
        }
        caches.push(cache);
    }
    let mut ens = ens.expect("at least one classifier");
    ens.scale(1.0 / n);
    let (risk, mut g) = env.risk_grad(rows, &ens)?;
    g.scale(1.0 / n);
    for ((c, cache), opt) in clfs.iter_mut().zip(&caches).zip(opts.iter_mut()) {
        let grads = c.backward(cache, &g)?;
        opt.step(c, &grads)?;
    }
    Ok(risk)
}
