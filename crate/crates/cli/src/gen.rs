use std::fs;
use std::path::{Path, PathBuf};

use eirm_core::data::{write_env, EnvironmentDataset};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::run::{benchmark_for, load_corpus};

/// Generates one seed's benchmark and writes every environment, the oracle
/// variants included, as `<env_id>.env` under `out`.
pub fn generate(config: &ExperimentConfig, seed: u64, data_dir: Option<&Path>, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    config.validate()?;
    let corpus = load_corpus(config, data_dir)?;
    let b = benchmark_for(config, corpus.as_ref(), seed)?;
    fs::create_dir_all(out)?;
    let all: Vec<&EnvironmentDataset> = b
        .train
        .iter()
        .chain([&b.test, &b.oracle_train, &b.oracle_test])
        .collect();
    let mut written = Vec::with_capacity(all.len());
    for env in all {
        let path = out.join(format!("{}.env", env.env_id));
        write_env(env, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use eirm_core::data::read_env;

    #[test]
    fn writes_readable_environments() {
        let config = ExperimentConfig::from_toml("[benchmark]\nname = \"colored_shapes\"\nsizes = [30, 30, 20]\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = generate(&config, 4, None, dir.path()).unwrap();
        let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["env1.env", "env2.env", "test.env", "oracle.env", "oracle_test.env"]);
        let test = read_env(&files[2]).unwrap();
        let again = benchmark_for(&config, None, 4).unwrap().test;
        assert_eq!(test, again);
    }
}
