use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use eirm_core::baselines::{train_erm, train_robust_minmax};
use eirm_core::data::{load_idx_corpus, make_benchmark, Benchmark, BenchmarkSpec, EnvironmentDataset, LabeledImages};
use eirm_core::game::{best_response_train, evaluate, EnsembleModel, PhiMode, Predictor, TrainTrace};
use eirm_core::math::{Matrix, Rng};
use eirm_core::nn::Mlp;
use serde::Serialize;

use crate::config::{ExperimentConfig, Method, DATA_DIR_VAR};
use crate::error::CliError;
use crate::results::{write_seed_csv, ResultTable, SeedResult};

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed_offset: u64,
    /// Overrides the config's output directory.
    pub out_dir: Option<PathBuf>,
    /// Overrides `$EIRM_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
    /// Recorded in the manifest only.
    pub preset: Option<String>,
    pub quiet: bool,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    pub table: ResultTable,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    version: &'a str,
    preset: Option<&'a str>,
    seeds: &'a [u64],
    wall_time_seconds: f64,
    config: &'a ExperimentConfig,
}

/// Directory holding one method's artifacts for one seed.
pub fn artifact_dir(out: &Path, method: Method, seed: u64) -> PathBuf {
    out.join(method.slug()).join(format!("seed{seed}"))
}

pub fn trace_path(out: &Path, method: Method, seed: u64) -> PathBuf {
    artifact_dir(out, method, seed).join("trace.csv")
}

pub fn checkpoint_path(out: &Path, method: Method, seed: u64) -> PathBuf {
    artifact_dir(out, method, seed).join("model.bin")
}

fn data_dir(opts: &RunOptions) -> Option<PathBuf> {
    opts.data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_VAR).map(PathBuf::from))
}

/// Loads and concatenates the configured corpus files, if the benchmark
/// uses a corpus.
pub fn load_corpus(config: &ExperimentConfig, data_dir: Option<&Path>) -> Result<Option<LabeledImages>, CliError> {
    let Some((kind, files)) = config.corpus_files(data_dir)? else {
        return Ok(None);
    };
    let mut parts = Vec::with_capacity(files.len());
    for (images, labels) in &files {
        parts.push(load_idx_corpus(images, labels, kind)?);
    }
    if parts.len() == 1 {
        return Ok(parts.pop());
    }
    let (h, w) = (parts[0].height, parts[0].width);
    let mats: Vec<&Matrix> = parts.iter().map(|p| &p.images).collect();
    let labels = parts.iter().flat_map(|p| p.prelim_labels.iter().copied()).collect();
    Ok(Some(LabeledImages::new(Matrix::vstack(&mats)?, labels, h, w)?))
}

pub fn benchmark_for(config: &ExperimentConfig, corpus: Option<&LabeledImages>, seed: u64) -> Result<Benchmark, CliError> {
    let spec = BenchmarkSpec {
        kind: config.kind()?,
        sizes: config.benchmark.sizes.clone(),
        flip_probs: config.benchmark.flip_probs.clone(),
        canvas: config.benchmark.canvas,
    };
    Ok(make_benchmark(&spec, corpus, seed)?)
}

fn write_artifacts(dir: &Path, trace: &TrainTrace, model: &EnsembleModel) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(fs::File::create(dir.join("trace.csv"))?);
    trace.write_csv(&mut f)?;
    let mut f = BufWriter::new(fs::File::create(dir.join("model.bin"))?);
    model.write(&mut f)?;
    Ok(())
}

fn accuracy<P: Predictor + ?Sized>(model: &P, data: &EnvironmentDataset) -> Result<f64, CliError> {
    Ok(evaluate(model, data)?.accuracy.unwrap_or(f64::NAN))
}

/// Trains one method on one seed's benchmark and writes its trace and
/// checkpoint under `out`.
pub fn run_method(
    config: &ExperimentConfig,
    method: Method,
    bench: &Benchmark,
    seed: u64,
    out: &Path,
) -> Result<SeedResult, CliError> {
    let dim = bench.test.feature_dim();
    let rng = Rng::new(seed);
    let clf = config.classifier_layers()?;
    let dir = artifact_dir(out, method, seed);
    let pooled = bench.pooled_train()?;
    let result = |train_acc, test_acc, steps, terminated_at| SeedResult {
        method,
        seed,
        train_acc,
        test_acc,
        steps,
        terminated_at,
    };
    match method {
        Method::FIrm | Method::VIrm => {
            let ids: Vec<&str> = bench.train.iter().map(|d| d.env_id.as_str()).collect();
            let (phi, mode) = if method == Method::VIrm {
                (Some(config.phi_layers()?), PhiMode::Variable)
            } else {
                (None, PhiMode::Fixed)
            };
            let model = EnsembleModel::init(dim, &ids, &clf, phi.as_deref(), mode, &rng)?;
            let (model, trace) = best_response_train(&bench.train, model, &config.train_config(seed)?, Some(&bench.test))?;
            write_artifacts(&dir, &trace, &model)?;
            Ok(result(
                accuracy(&model, &pooled)?,
                accuracy(&model, &bench.test)?,
                trace.rows.len(),
                trace.terminated_at,
            ))
        }
        Method::Erm | Method::Robust => {
            let net = Mlp::new(dim, &clf, &mut rng.child(&format!("init/{}", method.slug())))?;
            let cfg = config.baseline_config(seed)?;
            let (net, trace) = if method == Method::Erm {
                train_erm(&bench.train, net, &cfg, Some(&bench.test))?
            } else {
                train_robust_minmax(&bench.train, net, &cfg, Some(&bench.test))?
            };
            let (train, test) = (accuracy(&net, &pooled)?, accuracy(&net, &bench.test)?);
            write_artifacts(&dir, &trace, &EnsembleModel::from_single(net))?;
            Ok(result(train, test, cfg.max_iters, None))
        }
        Method::Oracle => {
            let d = bench.oracle_train.feature_dim();
            let net = Mlp::new(d, &clf, &mut rng.child("init/oracle"))?;
            let cfg = config.baseline_config(seed)?;
            let train = std::slice::from_ref(&bench.oracle_train);
            let (net, trace) = train_erm(train, net, &cfg, Some(&bench.oracle_test))?;
            let (tr, te) = (accuracy(&net, &bench.oracle_train)?, accuracy(&net, &bench.oracle_test)?);
            write_artifacts(&dir, &trace, &EnsembleModel::from_single(net))?;
            Ok(result(tr, te, cfg.max_iters, None))
        }
        Method::ErmPerEnv => {
            // One model per training environment; the reported row averages
            // each model's accuracy on its own environment and on test.
            let cfg = config.baseline_config(seed)?;
            let (mut train, mut test) = (0.0, 0.0);
            for env in &bench.train {
                let net = Mlp::new(dim, &clf, &mut rng.child(&format!("init/erm/{}", env.env_id)))?;
                let (net, trace) = train_erm(std::slice::from_ref(env), net, &cfg, Some(&bench.test))?;
                train += accuracy(&net, env)?;
                test += accuracy(&net, &bench.test)?;
                write_artifacts(&dir.join(&env.env_id), &trace, &EnsembleModel::from_single(net))?;
            }
            let n = bench.train.len() as f64;
            Ok(result(train / n, test / n, cfg.max_iters, None))
        }
    }
}

/// Runs every configured method on every seed and writes the result tables
/// and manifest.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput, CliError> {
    config.validate()?;
    let start = Instant::now();
    let out = opts.out_dir.clone().unwrap_or_else(|| config.out_dir.clone());
    fs::create_dir_all(&out)?;
    let corpus = load_corpus(config, data_dir(opts).as_deref())?;
    let seeds: Vec<u64> = (0..config.n_seeds as u64)
        .map(|k| config.seed + opts.seed_offset + k)
        .collect();
    let mut per_seed = Vec::new();
    for &seed in &seeds {
        let bench = benchmark_for(config, corpus.as_ref(), seed)?;
        for &method in &config.methods {
            let t = Instant::now();
            let r = run_method(config, method, &bench, seed, &out)?;
            if !opts.quiet {
                eprintln!(
                    "seed {seed} {:<12} train {:.4} test {:.4} ({:.1}s)",
                    method.name(),
                    r.train_acc,
                    r.test_acc,
                    t.elapsed().as_secs_f64()
                );
            }
            per_seed.push(r);
        }
    }
    let table = ResultTable::from_seeds(&per_seed);
    let mut f = BufWriter::new(fs::File::create(out.join("results.csv"))?);
    table.write_csv(&mut f)?;
    fs::write(out.join("results.md"), table.to_markdown())?;
    let mut f = BufWriter::new(fs::File::create(out.join("results_per_seed.csv"))?);
    write_seed_csv(&per_seed, &mut f)?;
    let manifest = Manifest {
        name: &config.name,
        version: env!("CARGO_PKG_VERSION"),
        preset: opts.preset.as_deref(),
        seeds: &seeds,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        config,
    };
    fs::write(
        out.join("manifest.toml"),
        toml::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(RunOutput {
        out_dir: out,
        seeds,
        per_seed,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke_config(methods: &str) -> ExperimentConfig {
        let text = format!(
            r#"
methods = [{methods}]
n_seeds = 2
[benchmark]
name = "colored_shapes"
sizes = [80, 80, 60]
[model]
hidden = [8]
phi_layers = [8]
[train]
lr = 1e-3
batch_size = 32
max_iters = 6
baseline_steps = 10
baseline_record_every = 5
"#
        );
        ExperimentConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn writes_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let config = smoke_config(r#""ERM", "F_IRM", "ERM_PER_ENV""#);
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            quiet: true,
            ..RunOptions::default()
        };
        let out = run_experiment(&config, &opts).unwrap();
        assert_eq!(out.seeds, vec![0, 1]);
        assert_eq!(out.table.rows.len(), 3);
        for seed in [0, 1] {
            assert!(trace_path(dir.path(), Method::Erm, seed).exists());
            assert!(checkpoint_path(dir.path(), Method::FIrm, seed).exists());
            assert!(artifact_dir(dir.path(), Method::ErmPerEnv, seed).join("env2/trace.csv").exists());
        }
        for f in ["results.csv", "results.md", "results_per_seed.csv", "manifest.toml"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let model = EnsembleModel::read(&mut fs::File::open(checkpoint_path(dir.path(), Method::FIrm, 0)).unwrap()).unwrap();
        assert_eq!(model.n_envs(), 2);
    }

    #[test]
    fn seed_offset_shifts_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = smoke_config(r#""ORACLE""#);
        config.n_seeds = 1;
        let opts = RunOptions {
            seed_offset: 7,
            out_dir: Some(dir.path().to_path_buf()),
            quiet: true,
            ..RunOptions::default()
        };
        let out = run_experiment(&config, &opts).unwrap();
        assert_eq!(out.seeds, vec![7]);
        assert!(trace_path(dir.path(), Method::Oracle, 7).exists());
    }

    #[test]
    fn missing_corpus_is_a_path_error() {
        let config = ExperimentConfig::from_toml("[benchmark]\nname = \"colored_fashion\"\nimages = [\"nope-images\"]\nlabels = [\"nope-labels\"]\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out_dir: Some(dir.path().to_path_buf()),
            quiet: true,
            ..RunOptions::default()
        };
        assert!(matches!(run_experiment(&config, &opts), Err(CliError::MissingPath(_))));
    }
}
