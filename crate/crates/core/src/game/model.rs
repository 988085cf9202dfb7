use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::math::{Matrix, Rng};
use crate::nn::{checkpoint_reader as Reader, read_mlp, write_mlp, LayerSpec, Mlp};

pub const ENSEMBLE_MAGIC: &[u8; 4] = b"EIRE";
pub const ENSEMBLE_VERSION: u32 = 1;

/// Whether the representation is a player of the game.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiMode {
    /// Φ is identity or a frozen map (F-IRM).
    Fixed,
    /// Φ takes its own turns on the summed environment risk (V-IRM).
    Variable,
}

/// Anything that maps a feature batch to logits.
pub trait Predictor {
    fn logits(&self, x: &Matrix) -> Result<Matrix>;
}

impl Predictor for Mlp {
    fn logits(&self, x: &Matrix) -> Result<Matrix> {
        self.predict(x)
    }
}

/// One classifier per training environment on top of a shared
/// representation; predictions average the classifiers' logits.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    classifiers: Vec<Mlp>,
    representation: Option<Mlp>,
    mode: PhiMode,
}

impl EnsembleModel {
    pub fn new(classifiers: Vec<Mlp>, representation: Option<Mlp>, mode: PhiMode) -> Result<Self> {
        let Some(first) = classifiers.first() else {
            return Err(Error::Config("an ensemble needs at least one classifier".into()));
        };
        if mode == PhiMode::Variable && representation.is_none() {
            return Err(Error::Mode("variable-Φ mode needs a representation network".into()));
        }
        let z_dim = representation
            .as_ref()
            .map_or(first.input_dim(), |phi| phi.output_dim());
        for (q, c) in classifiers.iter().enumerate() {
            if c.input_dim() != z_dim || c.output_dim() != first.output_dim() {
                return Err(Error::shape(
                    "EnsembleModel",
                    format!(
                        "classifier {q} maps {} -> {}, expected {z_dim} -> {}",
                        c.input_dim(),
                        c.output_dim(),
                        first.output_dim()
                    ),
                ));
            }
        }
        Ok(Self {
            classifiers,
            representation,
            mode,
        })
    }

    /// Fresh ensemble. Each player's initial weights come from its own child
    /// stream of `rng`, keyed by `player_ids` (and `"phi"`).
    pub fn init(
        input_dim: usize,
        player_ids: &[&str],
        classifier: &[LayerSpec],
        representation: Option<&[LayerSpec]>,
        mode: PhiMode,
        rng: &Rng,
    ) -> Result<Self> {
        let phi = match representation {
            Some(specs) => Some(Mlp::new(input_dim, specs, &mut rng.child("init/phi"))?),
            None => None,
        };
        let z_dim = phi.as_ref().map_or(input_dim, Mlp::output_dim);
        let classifiers = player_ids
            .iter()
            .map(|id| Mlp::new(z_dim, classifier, &mut rng.child(&format!("init/{id}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(classifiers, phi, mode)
    }

    /// Ensemble of one, with identity Φ.
    pub fn from_single(net: Mlp) -> Self {
        Self {
            classifiers: vec![net],
            representation: None,
            mode: PhiMode::Fixed,
        }
    }

    pub fn mode(&self) -> PhiMode {
        self.mode
    }

    pub fn n_envs(&self) -> usize {
        self.classifiers.len()
    }

    pub fn classifiers(&self) -> &[Mlp] {
        &self.classifiers
    }

    pub fn classifier_mut(&mut self, e: usize) -> Result<&mut Mlp> {
        let n = self.classifiers.len();
        self.classifiers
            .get_mut(e)
            .ok_or_else(|| Error::Index(format!("environment {e} of {n}")))
    }

    pub fn representation(&self) -> Option<&Mlp> {
        self.representation.as_ref()
    }

    pub(crate) fn representation_mut(&mut self) -> Option<&mut Mlp> {
        self.representation.as_mut()
    }

    pub fn input_dim(&self) -> usize {
        self.representation
            .as_ref()
            .map_or(self.classifiers[0].input_dim(), Mlp::input_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.classifiers[0].output_dim()
    }

    /// Φ(x) in inference mode; identity when there is no representation.
    pub fn represent(&self, x: &Matrix) -> Result<Matrix> {
        match &self.representation {
            Some(phi) => phi.predict(x),
            None => {
                if x.cols() != self.input_dim() {
                    return Err(Error::shape(
                        "EnsembleModel::represent",
                        format!("batch has {} features, model expects {}", x.cols(), self.input_dim()),
                    ));
                }
                Ok(x.clone())
            }
        }
    }

    /// Mean of the classifiers' logits on already-represented inputs.
    pub fn logits_from_repr(&self, z: &Matrix) -> Result<Matrix> {
        let mut acc = self.classifiers[0].predict(z)?;
        for c in &self.classifiers[1..] {
            acc.add_assign(&c.predict(z)?)?;
        }
        acc.scale(1.0 / self.classifiers.len() as f64);
        Ok(acc)
    }

    /// Classifier `q` alone on raw inputs.
    pub fn classifier_logits(&self, q: usize, x: &Matrix) -> Result<Matrix> {
        let c = self
            .classifiers
            .get(q)
            .ok_or_else(|| Error::Index(format!("classifier {q} of {}", self.classifiers.len())))?;
        c.predict(&self.represent(x)?)
    }

    /// Parameters of all players in a fixed order: Φ first, then classifiers.
    pub fn fingerprints(&self) -> Vec<u64> {
        self.representation
            .iter()
            .chain(&self.classifiers)
            .map(Mlp::fingerprint)
            .collect()
    }

    /// Parameter-averaged classifier. For single-layer linear classifiers this
    /// is the same function as the ensemble.
    pub fn mean_classifier(&self) -> Result<Mlp> {
        let mut net = self.classifiers[0].clone();
        let mut acc = net.params();
        for c in &self.classifiers[1..] {
            let p = c.params();
            if p.len() != acc.len() {
                return Err(Error::shape("mean_classifier", "classifier shapes differ"));
            }
            acc.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        let n = self.classifiers.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        net.set_params(&acc)?;
        Ok(net)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(ENSEMBLE_MAGIC)?;
        w.write_all(&ENSEMBLE_VERSION.to_le_bytes())?;
        w.write_all(&[u8::from(self.mode == PhiMode::Variable), u8::from(self.representation.is_some())])?;
        w.write_all(&(self.classifiers.len() as u32).to_le_bytes())?;
        if let Some(phi) = &self.representation {
            write_mlp(phi, w)?;
        }
        for c in &self.classifiers {
            write_mlp(c, w)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut rd = Reader { inner: r, offset: 0 };
        if &rd.bytes::<4>()? != ENSEMBLE_MAGIC {
            return Err(Error::Format {
                offset: 0,
                msg: "bad ensemble checkpoint magic".into(),
            });
        }
        let version = rd.u32()?;
        if version != ENSEMBLE_VERSION {
            return Err(Error::Format {
                offset: 4,
                msg: format!("unsupported ensemble version {version}"),
            });
        }
        let [variable, has_phi] = rd.bytes::<2>()?;
        let n = rd.u32()? as usize;
        let phi = if has_phi != 0 { Some(read_mlp(rd.inner)?) } else { None };
        let classifiers = (0..n).map(|_| read_mlp(rd.inner)).collect::<Result<Vec<_>>>()?;
        let mode = if variable != 0 { PhiMode::Variable } else { PhiMode::Fixed };
        Self::new(classifiers, phi, mode)
    }
}

impl Predictor for EnsembleModel {
    fn logits(&self, x: &Matrix) -> Result<Matrix> {
        self.logits_from_repr(&self.represent(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_layers, Activation, DenseLayer};

    fn affine(w: Vec<f64>, b: Vec<f64>, input: usize) -> Mlp {
        let out = b.len();
        Mlp::from_layers(vec![DenseLayer {
            weights: Matrix::from_vec(input, out, w).unwrap(),
            bias: b,
            activation: Activation::Linear,
            l2: 0.0,
            dropout: 0.0,
        }])
        .unwrap()
    }

    #[test]
    fn two_player_mean_of_unit_logits() {
        let m = EnsembleModel::new(
            vec![affine(vec![0.0; 2], vec![1.0, 0.0], 1), affine(vec![0.0; 2], vec![0.0, 1.0], 1)],
            None,
            PhiMode::Fixed,
        )
        .unwrap();
        let out = m.logits(&Matrix::zeros(1, 1)).unwrap();
        assert_eq!(out.data(), &[0.5, 0.5]);
    }

    #[test]
    fn ensemble_equals_mean_of_members() {
        let rng = Rng::new(3);
        let specs = mlp_layers(&[5], 2, Activation::Elu, 0.0, 0.0);
        let m = EnsembleModel::init(4, &["a", "b", "c"], &specs, None, PhiMode::Fixed, &rng).unwrap();
        let mut r = Rng::new(9);
        let x = Matrix::from_vec(6, 4, (0..24).map(|_| r.normal()).collect()).unwrap();
        let ens = m.logits(&x).unwrap();
        let mut mean = Matrix::zeros(6, 2);
        for q in 0..3 {
            mean.add_assign(&m.classifier_logits(q, &x).unwrap()).unwrap();
        }
        mean.scale(1.0 / 3.0);
        for (a, b) in ens.data().iter().zip(mean.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn variable_mode_requires_phi() {
        let net = affine(vec![0.0; 2], vec![0.0, 0.0], 1);
        assert!(matches!(
            EnsembleModel::new(vec![net], None, PhiMode::Variable),
            Err(Error::Mode(_))
        ));
    }

    #[test]
    fn mismatched_classifier_rejected() {
        let a = affine(vec![0.0; 2], vec![0.0, 0.0], 1);
        let b = affine(vec![0.0; 4], vec![0.0, 0.0], 2);
        assert!(EnsembleModel::new(vec![a, b], None, PhiMode::Fixed).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let rng = Rng::new(1);
        let m = EnsembleModel::init(
            3,
            &["env1", "env2"],
            &mlp_layers(&[4], 2, Activation::Elu, 0.0, 0.0),
            Some(&mlp_layers(&[], 5, Activation::Elu, 0.0, 0.0)),
            PhiMode::Variable,
            &rng,
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert_eq!(EnsembleModel::read(&mut buf.as_slice()).unwrap(), m);
        buf.truncate(20);
        assert!(EnsembleModel::read(&mut buf.as_slice()).is_err());
    }
}
