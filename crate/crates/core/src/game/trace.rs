use std::io::Write;

use crate::error::{Error, Result};

/// Diagnostics after one recorded step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub turn_owner: String,
    pub ens_train_acc: Option<f64>,
    /// Per training environment, in environment order.
    pub env_acc: Vec<Option<f64>>,
    pub env_risk: Vec<f64>,
    pub ens_spur_corr: Option<f64>,
    /// Per player classifier.
    pub clf_spur_corr: Vec<Option<f64>>,
    pub test_acc: Option<f64>,
}

/// Recorded training history.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub rows: Vec<TraceRow>,
    pub warm_start_steps: usize,
    /// Step at which the termination rule fired, if it did.
    pub terminated_at: Option<usize>,
}

impl TrainTrace {
    pub fn new(warm_start_steps: usize) -> Self {
        Self {
            rows: Vec::new(),
            warm_start_steps,
            terminated_at: None,
        }
    }

    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return Err(Error::Contract(format!(
                    "trace step {} does not follow {}",
                    row.step, last.step
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Ensemble train accuracies after the warm start, with their steps.
    pub fn post_warm_accuracy(&self) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| r.step > self.warm_start_steps)
            .filter_map(|r| r.ens_train_acc.map(|a| (r.step, a)))
            .collect()
    }

    /// CSV with header `step,turn_owner,ens_train_acc,env{k}_risk...,
    /// ens_spur_corr,w{k}_spur_corr...,test_acc`. Missing values are empty.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let n_env = self.rows.first().map_or(0, |r| r.env_risk.len());
        let n_clf = self.rows.first().map_or(0, |r| r.clf_spur_corr.len());
        let mut header = vec!["step".to_string(), "turn_owner".into(), "ens_train_acc".into()];
        header.extend((1..=n_env).map(|k| format!("env{k}_risk")));
        header.push("ens_spur_corr".into());
        header.extend((1..=n_clf).map(|k| format!("w{k}_spur_corr")));
        header.push("test_acc".into());
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut f = vec![r.step.to_string(), r.turn_owner.clone(), opt(r.ens_train_acc)];
            f.extend(r.env_risk.iter().map(|&v| fmt_sig(v)));
            f.push(opt(r.ens_spur_corr));
            f.extend(r.clf_spur_corr.iter().map(|&v| opt(v)));
            f.push(opt(r.test_acc));
            writeln!(w, "{}", f.join(","))?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

/// Six significant digits; scientific notation outside `[1e-4, 1e6)`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let prec = (5 - mag).max(0) as usize;
        format!("{x:.prec$}")
    } else {
        format!("{x:.5e}")
    }
}
