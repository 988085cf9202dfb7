use std::fs;
use std::path::{Path, PathBuf};

use eirm_core::data::{make_linear_sem, SemEnvironment, SemSpec};
use eirm_core::game::{best_response_train, EnsembleModel, PhiMode, TerminationRule, TrainConfig};
use eirm_core::math::Rng;
use eirm_core::nn::{mlp_layers, Activation, Mlp};
use eirm_core::theory::{
    bounded_linear_ne, format_report, scalar_game_grid, verify_invariance, verify_nash, write_key_values, QuadGameSpec,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::run::{benchmark_for, load_corpus};

/// Outcome of a theory subcommand: what to print, what to store, and the
/// verdict that sets the exit status.
#[derive(Clone, Debug)]
pub struct TheoryReport {
    pub name: &'static str,
    pub pairs: Vec<(String, String)>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl TheoryReport {
    pub fn text(&self) -> String {
        let mut s = format_report(self.name, &self.pairs);
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s.push_str(if self.pass { "  result: PASS\n" } else { "  result: FAIL\n" });
        s
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Writes `<name>.txt` and `<name>.kv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{}.txt", self.name)), self.text())?;
        let mut f = fs::File::create(dir.join(format!("{}.kv", self.name)))?;
        write_key_values(&self.pairs, &mut f)?;
        Ok(())
    }
}

pub fn grid(c1: f64, c2: f64, hi: f64, step: f64) -> Result<TheoryReport, CliError> {
    let g = scalar_game_grid(&QuadGameSpec::new(c1, c2, hi, step))?;
    let mut notes = Vec::new();
    if g.invariant_set.is_empty() {
        notes.push("no invariant predictor: the environments share no minimizer on this grid".into());
        if g.boundary_only {
            notes.push("every equilibrium has a strategy clamped at the grid boundary".into());
        }
    }
    Ok(TheoryReport {
        name: "grid",
        pairs: g.key_values(),
        notes,
        pass: g.pass(),
    })
}

pub fn bounded(c1: f64, c2: f64, hi: f64, step: f64) -> Result<TheoryReport, CliError> {
    let spec = QuadGameSpec::new(c1, c2, hi, step);
    let ne = bounded_linear_ne(&spec)?;
    let model = spec.model_at(ne.pair)?;
    let sampled = verify_invariance(&model, &spec.environments(), 120, 200, 1e-2, 1e-6, &mut Rng::new(0))?;
    let mut pairs = ne.key_values();
    pairs.push(("sampled_invariance".into(), sampled.pass.to_string()));
    pairs.push(("sampled_max_gain".into(), sampled.max_gain.to_string()));
    let mut notes = Vec::new();
    if !ne.converged {
        notes.push("best responses did not settle; fixed point computed algebraically".into());
    }
    if !ne.interior {
        notes.push("equilibrium sits on the box boundary".into());
    }
    Ok(TheoryReport {
        name: "bounded",
        pairs,
        notes,
        // An interior equilibrium must be invariant; the library errors otherwise.
        pass: true,
    })
}

/// Checkpoint plus the training environments it was trained on.
pub struct CheckpointInput<'a> {
    pub checkpoint: &'a Path,
    pub config: &'a Path,
    pub seed: u64,
    pub data_dir: Option<PathBuf>,
}

fn load_checkpoint(input: &CheckpointInput) -> Result<(EnsembleModel, Vec<eirm_core::data::EnvironmentDataset>), CliError> {
    let config = ExperimentConfig::load(input.config)?;
    config.validate()?;
    let mut f = fs::File::open(input.checkpoint).map_err(|_| CliError::MissingPath(input.checkpoint.to_path_buf()))?;
    let model = EnsembleModel::read(&mut f)?;
    let corpus = load_corpus(&config, input.data_dir.as_deref())?;
    let bench = benchmark_for(&config, corpus.as_ref(), input.seed)?;
    Ok((model, bench.train))
}

pub fn nash(input: &CheckpointInput, budget: usize, lr: f64, eps: f64) -> Result<TheoryReport, CliError> {
    let (model, envs) = load_checkpoint(input)?;
    let r = verify_nash(&model, &envs, budget, lr, eps)?;
    Ok(TheoryReport {
        name: "nash",
        pairs: r.key_values(),
        notes: Vec::new(),
        pass: r.pass,
    })
}

pub fn invariance(
    input: &CheckpointInput,
    n_perturb: usize,
    retrain_steps: usize,
    lr: f64,
    eps: f64,
) -> Result<TheoryReport, CliError> {
    let (model, envs) = load_checkpoint(input)?;
    let mut rng = Rng::new(input.seed).child("invariance");
    let r = verify_invariance(&model, &envs, n_perturb, retrain_steps, lr, eps, &mut rng)?;
    Ok(TheoryReport {
        name: "invariance",
        pairs: r.key_values(),
        notes: Vec::new(),
        pass: r.pass,
    })
}

/// Two-environment linear SEM (γ = (1, −0.5), spurious loadings 0.5 and 2)
/// with one noisy anti-causal feature.
pub fn causal_sem_spec() -> SemSpec {
    SemSpec {
        n_causal: 2,
        n_spurious: 1,
        gamma: vec![1.0, -0.5],
        alpha_per_env: vec![0.5, 2.0],
        noise_sd: 0.5,
        samples_per_env: 2000,
    }
}

/// Plays the game on the SEM with Φ fixed to the projection onto the
/// causal features, linear classifiers and squared loss.
pub fn train_causal_sem(spec: &SemSpec, seed: u64) -> Result<(EnsembleModel, Vec<SemEnvironment>, Vec<f64>), CliError> {
    let (envs, gamma) = make_linear_sem(spec, &Rng::new(seed))?;
    let d = spec.n_causal + spec.n_spurious;
    let causal: Vec<usize> = (0..spec.n_causal).collect();
    let phi = Mlp::projection(d, &causal)?;
    let rng = Rng::new(seed);
    let clfs = envs
        .iter()
        .map(|e| Mlp::new(spec.n_causal, &mlp_layers(&[], 1, Activation::Linear, 0.0, 0.0), &mut rng.child(&format!("init/{}", e.env_id))))
        .collect::<Result<Vec<_>, _>>()?;
    let model = EnsembleModel::new(clfs, Some(phi), PhiMode::Fixed)?;
    let cfg = TrainConfig {
        lr: 1e-2,
        max_iters: 1500,
        termination: TerminationRule::Never,
        seed,
        ..TrainConfig::default()
    };
    let (model, _) = best_response_train(&envs, model, &cfg, None)?;
    Ok((model, envs, gamma))
}

pub fn nash_sem(seed: u64, budget: usize, lr: f64, eps: f64) -> Result<TheoryReport, CliError> {
    let (model, envs, _) = train_causal_sem(&causal_sem_spec(), seed)?;
    let r = verify_nash(&model, &envs, budget, lr, eps)?;
    Ok(TheoryReport {
        name: "nash",
        pairs: r.key_values(),
        notes: vec!["linear SEM with the causal projection as representation".into()],
        pass: r.pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_grid_passes() {
        let r = grid(0.5, 0.5, 1.0, 0.1).unwrap();
        assert!(r.pass);
        assert_eq!(r.get("equal"), Some("true"));
    }

    #[test]
    fn opposed_grid_notes_missing_invariant_predictor() {
        let r = grid(0.0, 1.0, 2.0, 0.1).unwrap();
        assert!(r.pass);
        assert!(r.notes[0].contains("no invariant predictor"));
    }

    #[test]
    fn sem_scenario_certifies() {
        assert!(nash_sem(0, 200, 1e-2, 1e-3).unwrap().pass);
    }

    #[test]
    fn reports_save_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let r = bounded(0.3, 0.3, 1.0, 0.1).unwrap();
        r.save(dir.path()).unwrap();
        let kv = fs::read_to_string(dir.path().join("bounded.kv")).unwrap();
        assert!(kv.lines().all(|l| l.contains('=')));
        assert!(fs::read_to_string(dir.path().join("bounded.txt")).unwrap().contains("PASS"));
        assert_eq!(r.get("sampled_invariance"), Some("true"));
        let edge = bounded(0.9, -0.9, 1.0, 0.1).unwrap();
        assert_eq!(edge.get("interior"), Some("false"));
        assert_eq!(edge.get("sampled_invariance"), Some("false"));
    }
}
