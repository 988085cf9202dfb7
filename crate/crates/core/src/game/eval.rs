use crate::data::TrainData;
use crate::error::Result;
use crate::game::model::Predictor;
use crate::game::trace::TraceRow;
use crate::math::{pearson, Matrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    /// `None` for regression data.
    pub accuracy: Option<f64>,
    pub risk: f64,
}

/// Inference-mode accuracy (argmax, ties to class 0) and mean risk.
pub fn evaluate<P: Predictor + ?Sized, D: TrainData>(model: &P, data: &D) -> Result<Evaluation> {
    let out = model.logits(data.features())?;
    let rows = data.all_rows();
    Ok(Evaluation {
        accuracy: data.accuracy(&rows, &out),
        risk: data.risk(&rows, &out)?,
    })
}

/// Pearson correlation between the hard predicted label and the spurious
/// bit. `None` when the data has no spurious bits.
pub fn spurious_correlation<P: Predictor + ?Sized, D: TrainData>(
    model: &P,
    data: &D,
) -> Result<Option<f64>> {
    let Some(bits) = data.spurious_bits() else {
        return Ok(None);
    };
    let out = model.logits(data.features())?;
    hard_label_correlation(&out, bits).map(Some)
}

/// Zero-variance predictions or bits count as correlation 0.
pub fn hard_label_correlation(logits: &Matrix, bits: &[bool]) -> Result<f64> {
    let pred: Vec<f64> = logits.argmax_rows().into_iter().map(|c| c as f64).collect();
    let z: Vec<f64> = bits.iter().map(|&b| f64::from(u8::from(b))).collect();
    Ok(pearson(&pred, &z)?.value)
}

/// Trace row fields computed from cached logits.
///
/// `ens[e]` holds the ensemble logits on environment `e`; `players[q][e]` the
/// logits of player `q` on environment `e`.
pub(crate) fn snapshot<D: TrainData>(
    step: usize,
    owner: &str,
    envs: &[D],
    ens: &[Matrix],
    players: &[Vec<Matrix>],
) -> Result<TraceRow> {
    let mut env_acc = Vec::with_capacity(envs.len());
    let mut env_risk = Vec::with_capacity(envs.len());
    let (mut hits, mut total, mut classified) = (0.0, 0usize, true);
    for (d, out) in envs.iter().zip(ens) {
        let rows = d.all_rows();
        let acc = d.accuracy(&rows, out);
        match acc {
            Some(a) => {
                hits += a * d.len() as f64;
                total += d.len();
            }
            None => classified = false,
        }
        env_acc.push(acc);
        env_risk.push(d.risk(&rows, out)?);
    }
    let ens_train_acc = (classified && total > 0).then(|| hits / total as f64);
    let bits: Option<Vec<bool>> = envs
        .iter()
        .map(|d| d.spurious_bits().map(<[bool]>::to_vec))
        .collect::<Option<Vec<_>>>()
        .map(|v| v.concat());
    let corr = |per_env: &[Matrix]| -> Result<Option<f64>> {
        match &bits {
            Some(b) if b.len() >= 2 => {
                let refs: Vec<&Matrix> = per_env.iter().collect();
                Ok(Some(hard_label_correlation(&Matrix::vstack(&refs)?, b)?))
            }
            _ => Ok(None),
        }
    };
    Ok(TraceRow {
        step,
        turn_owner: owner.to_string(),
        ens_train_acc,
        env_acc,
        env_risk,
        ens_spur_corr: corr(ens)?,
        clf_spur_corr: players.iter().map(|p| corr(p)).collect::<Result<Vec<_>>>()?,
        test_acc: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EnvironmentDataset;
    use crate::math::Rng;

    struct Const(Vec<f64>);

    impl Predictor for Const {
        fn logits(&self, x: &Matrix) -> Result<Matrix> {
            Ok(Matrix::from_vec(
                x.rows(),
                2,
                (0..x.rows()).flat_map(|_| self.0.clone()).collect(),
            )?)
        }
    }

    /// Predicts class 1 iff the first feature is positive.
    struct Sign;

    impl Predictor for Sign {
        fn logits(&self, x: &Matrix) -> Result<Matrix> {
            Matrix::from_vec(
                x.rows(),
                2,
                (0..x.rows()).flat_map(|i| [0.0, x.get(i, 0)]).collect(),
            )
        }
    }

    fn data(n: usize, seed: u64) -> EnvironmentDataset {
        let mut r = Rng::new(seed);
        let labels: Vec<usize> = (0..n).map(|_| usize::from(r.bernoulli(0.5))).collect();
        let bits: Vec<bool> = (0..n).map(|_| r.bernoulli(0.5)).collect();
        let feats = bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
        EnvironmentDataset {
            env_id: "d".into(),
            features: Matrix::from_vec(n, 1, feats).unwrap(),
            labels,
            spurious_bits: bits,
            flip_prob: 0.5,
            source_rows: (0..n).collect(),
        }
    }

    #[test]
    fn constant_logits_near_half() {
        let d = data(4000, 1);
        let e = evaluate(&Const(vec![0.0, 0.0]), &d).unwrap();
        let sd = (0.25f64 / 4000.0).sqrt();
        assert!((e.accuracy.unwrap() - 0.5).abs() < 3.0 * sd);
        assert!((e.risk - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn predicting_z_gives_unit_correlation() {
        let d = data(500, 2);
        assert!((spurious_correlation(&Sign, &d).unwrap().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_predictions_near_zero() {
        let d = data(5000, 3);
        let mut r = Rng::new(4);
        let noise: Vec<f64> = (0..5000).flat_map(|_| [0.0, r.normal()]).collect();
        let c = hard_label_correlation(&Matrix::from_vec(5000, 2, noise).unwrap(), &d.spurious_bits).unwrap();
        assert!(c.abs() < 3.0 / (5000f64).sqrt());
    }
}
