use std::path::Path;

use crate::data::idx::read_idx;
use crate::data::shapes::synth_shapes;
use crate::data::spurious::{make_spurious_pair, SpuriousMode};
use crate::data::{EnvironmentDataset, LabeledImages, TrainData};
use crate::error::{Error, Result};
use crate::math::{Matrix, Rng};

/// Flip probabilities of `z` for (train 1, train 2, test).
pub const DEFAULT_FLIP_PROBS: [f64; 3] = [0.2, 0.1, 0.9];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    ColoredDigits,
    ColoredFashion,
    ColoredShapes,
    PatchFashion,
}

impl BenchmarkKind {
    pub fn mode(self) -> SpuriousMode {
        match self {
            BenchmarkKind::PatchFashion => SpuriousMode::Patch,
            _ => SpuriousMode::Color,
        }
    }

    /// Corpus the benchmark is built from; `None` when generated in-process.
    pub fn corpus(self) -> Option<CorpusKind> {
        match self {
            BenchmarkKind::ColoredDigits => Some(CorpusKind::Digits),
            BenchmarkKind::ColoredFashion | BenchmarkKind::PatchFashion => Some(CorpusKind::Fashion),
            BenchmarkKind::ColoredShapes => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::ColoredDigits => "colored_digits",
            BenchmarkKind::ColoredFashion => "colored_fashion",
            BenchmarkKind::ColoredShapes => "colored_shapes",
            BenchmarkKind::PatchFashion => "patch_fashion",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "colored_digits" => Some(BenchmarkKind::ColoredDigits),
            "colored_fashion" => Some(BenchmarkKind::ColoredFashion),
            "colored_shapes" => Some(BenchmarkKind::ColoredShapes),
            "patch_fashion" => Some(BenchmarkKind::PatchFashion),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusKind {
    /// Digits 0–4 → 0, 5–9 → 1.
    Digits,
    /// Clothing (t-shirt, trouser, pullover, dress, coat, shirt) → 0, footwear
    /// (sandal, sneaker, ankle boot) → 1; bags are dropped.
    Fashion,
}

impl CorpusKind {
    pub fn binarize(self, class: u8) -> Option<usize> {
        match self {
            CorpusKind::Digits => (class <= 9).then_some(usize::from(class >= 5)),
            CorpusKind::Fashion => match class {
                0 | 1 | 2 | 3 | 4 | 6 => Some(0),
                5 | 7 | 9 => Some(1),
                _ => None,
            },
        }
    }
}

/// Loads IDX image/label files and binarizes the class labels. Classes that
/// map to no binary label are dropped.
pub fn load_idx_corpus(
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
    kind: CorpusKind,
) -> Result<LabeledImages> {
    let imgs = read_idx(images)?;
    let labs = read_idx(labels)?;
    if imgs.is_labels() || !labs.is_labels() {
        return Err(Error::Data("expected an image file and a label file".into()));
    }
    let (n, h, w) = (imgs.dims[0], imgs.dims[1], imgs.dims[2]);
    if labs.dims[0] != n {
        return Err(Error::Data(format!("{n} images but {} labels", labs.dims[0])));
    }
    let pixels = imgs.unit_floats();
    let mut keep = Vec::new();
    let mut prelim = Vec::new();
    for (i, &class) in labs.bytes.iter().enumerate() {
        if let Some(y) = kind.binarize(class) {
            keep.push(i);
            prelim.push(y);
        }
    }
    let mut data = Vec::with_capacity(keep.len() * h * w);
    for &i in &keep {
        data.extend_from_slice(&pixels[i * h * w..(i + 1) * h * w]);
    }
    let mut out = LabeledImages::new(Matrix::from_vec(keep.len(), h * w, data)?, prelim, h, w)?;
    out.source_rows = keep;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    /// Rows per environment: training environments first, test last.
    pub sizes: Vec<usize>,
    /// Flip probability per environment, aligned with `sizes`.
    pub flip_probs: Vec<f64>,
    /// Canvas side for the generated shapes corpus.
    pub canvas: usize,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchmarkKind, sizes: Vec<usize>) -> Self {
        Self {
            kind,
            sizes,
            flip_probs: DEFAULT_FLIP_PROBS.to_vec(),
            canvas: 16,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 {
            return Err(Error::Config(
                "need at least one training and one test environment".into(),
            ));
        }
        if self.sizes.len() != self.flip_probs.len() {
            return Err(Error::Config(format!(
                "{} environment sizes but {} flip probabilities",
                self.sizes.len(),
                self.flip_probs.len()
            )));
        }
        if self.sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("environment sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Benchmark {
    pub train: Vec<EnvironmentDataset>,
    pub test: EnvironmentDataset,
    /// Pooled training rows without the spurious feature.
    pub oracle_train: EnvironmentDataset,
    /// Test rows without the spurious feature.
    pub oracle_test: EnvironmentDataset,
}

impl Benchmark {
    pub fn pooled_train(&self) -> Result<EnvironmentDataset> {
        let parts: Vec<&EnvironmentDataset> = self.train.iter().collect();
        EnvironmentDataset::concat(&parts, "pooled")
    }
}

/// Draws disjoint source rows for every environment and plants the spurious
/// attribute. `corpus` is required unless the benchmark generates its own.
pub fn make_benchmark(
    spec: &BenchmarkSpec,
    corpus: Option<&LabeledImages>,
    seed: u64,
) -> Result<Benchmark> {
    spec.validate()?;
    let root = Rng::new(seed);
    let total: usize = spec.sizes.iter().sum();
    let generated;
    let corpus = match (spec.kind.corpus(), corpus) {
        (None, _) => {
            generated = synth_shapes(total, spec.canvas, spec.canvas, &mut root.child("shapes"))?;
            &generated
        }
        (Some(_), Some(c)) => c,
        (Some(kind), None) => {
            return Err(Error::Config(format!(
                "benchmark {} needs a {kind:?} corpus",
                spec.kind.name()
            )))
        }
    };
    if total > corpus.len() {
        return Err(Error::Capacity {
            requested: total,
            available: corpus.len(),
        });
    }
    let order = root.child("split").permutation(corpus.len());
    let mut start = 0;
    let mut envs = Vec::with_capacity(spec.sizes.len());
    let mut plains = Vec::with_capacity(spec.sizes.len());
    let last = spec.sizes.len() - 1;
    for (k, (&size, &p)) in spec.sizes.iter().zip(&spec.flip_probs).enumerate() {
        let rows = &order[start..start + size];
        start += size;
        let id = if k == last {
            "test".to_string()
        } else {
            format!("env{}", k + 1)
        };
        let src = corpus.subset(rows)?;
        let (env, plain) =
            make_spurious_pair(&src, p, spec.kind.mode(), &id, &mut root.child(&format!("env/{id}")))?;
        envs.push(env);
        plains.push(plain);
    }
    let test = envs.pop().expect("validated length");
    let oracle_test = plains.pop().expect("validated length");
    let plain_refs: Vec<&EnvironmentDataset> = plains.iter().collect();
    let oracle_train = EnvironmentDataset::concat(&plain_refs, "oracle")?;
    Ok(Benchmark {
        train: envs,
        test,
        oracle_train,
        oracle_test: EnvironmentDataset {
            env_id: "oracle_test".into(),
            ..oracle_test
        },
    })
}
