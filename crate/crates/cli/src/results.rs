use std::io::Write;

use eirm_core::math::{mean, sample_std};

use crate::config::Method;

/// Outcome of one method on one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub method: Method,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Trace rows for the game, optimizer steps for baselines.
    pub steps: usize,
    pub terminated_at: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub n_seeds: usize,
    pub train_mean: f64,
    /// `None` with fewer than two seeds.
    pub train_std: Option<f64>,
    pub test_mean: f64,
    pub test_std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

fn std_of(values: &[f64]) -> Option<f64> {
    (values.len() >= 2).then(|| sample_std(values)).flatten()
}

impl ResultTable {
    /// One row per method, in the order methods first appear.
    pub fn from_seeds(results: &[SeedResult]) -> Self {
        let mut order: Vec<Method> = Vec::new();
        for r in results {
            if !order.contains(&r.method) {
                order.push(r.method);
            }
        }
        let rows = order
            .into_iter()
            .map(|m| {
                let train: Vec<f64> = results.iter().filter(|r| r.method == m).map(|r| r.train_acc).collect();
                let test: Vec<f64> = results.iter().filter(|r| r.method == m).map(|r| r.test_acc).collect();
                ResultRow {
                    method: m,
                    n_seeds: train.len(),
                    train_mean: mean(&train),
                    train_std: std_of(&train),
                    test_mean: mean(&test),
                    test_std: std_of(&test),
                }
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, method: Method) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "method,n_seeds,train_mean,train_std,test_mean,test_std")?;
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| x.to_string());
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.method.name(),
                r.n_seeds,
                r.train_mean,
                opt(r.train_std),
                r.test_mean,
                opt(r.test_std)
            )?;
        }
        Ok(())
    }

    /// Accuracies in percent, `mean ± std`.
    pub fn to_markdown(&self) -> String {
        let cell = |m: f64, s: Option<f64>| match s {
            Some(s) => format!("{:.2} ± {:.2}", 100.0 * m, 100.0 * s),
            None => format!("{:.2} ± n/a", 100.0 * m),
        };
        let mut out = String::from("| Method | Train accuracy | Test accuracy |\n|---|---|---|\n");
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                r.method.name(),
                cell(r.train_mean, r.train_std),
                cell(r.test_mean, r.test_std)
            ));
        }
        out
    }
}

pub fn write_seed_csv<W: Write>(results: &[SeedResult], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "method,seed,train_acc,test_acc,steps,terminated_at")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.method.name(),
            r.seed,
            r.train_acc,
            r.test_acc,
            r.steps,
            r.terminated_at.map_or_else(String::new, |s| s.to_string())
        )?;
    }
    Ok(())
}
