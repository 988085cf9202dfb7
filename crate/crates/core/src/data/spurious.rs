use crate::data::{EnvironmentDataset, LabeledImages};
use crate::error::{Error, Result};
use crate::math::{Matrix, Rng};

/// Probability of flipping the preliminary label into the final label.
pub const LABEL_NOISE: f64 = 0.25;

/// How the spurious attribute `z` is written into the image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpuriousMode {
    /// RGB, channel-last: the grayscale image goes to red when z = 1 and to
    /// green when z = 0; other channels stay 0.
    Color,
    /// Grayscale with a 3×3 patch of 1.0 at the top-left when z = 1, a 2×2
    /// patch of 1.0 at the bottom-right when z = 0.
    Patch,
    /// As `Patch`, but patch pixels are uniform noise in `[0, 1)`.
    NoisePatch,
}

/// Builds one environment from `src`: `y` is `ỹ` flipped with probability
/// [`LABEL_NOISE`], `z` is `y` flipped with probability `p_e`.
pub fn make_spurious_env(
    src: &LabeledImages,
    p_e: f64,
    mode: SpuriousMode,
    env_id: &str,
    rng: &mut Rng,
) -> Result<EnvironmentDataset> {
    Ok(make_spurious_pair(src, p_e, mode, env_id, rng)?.0)
}

/// Like [`make_spurious_env`], also returning the same rows and labels with
/// the plain grayscale features (no color, no patch).
pub fn make_spurious_pair(
    src: &LabeledImages,
    p_e: f64,
    mode: SpuriousMode,
    env_id: &str,
    rng: &mut Rng,
) -> Result<(EnvironmentDataset, EnvironmentDataset)> {
    if !(0.0..=1.0).contains(&p_e) {
        return Err(Error::Config(format!("flip probability {p_e} outside [0, 1]")));
    }
    let n = src.len();
    let pixels = src.height * src.width;
    let mut labels = Vec::with_capacity(n);
    let mut bits = Vec::with_capacity(n);
    for &prelim in &src.prelim_labels {
        let y = if rng.bernoulli(LABEL_NOISE) { 1 - prelim } else { prelim };
        let z = if rng.bernoulli(p_e) { y == 0 } else { y == 1 };
        labels.push(y);
        bits.push(z);
    }
    let features = match mode {
        SpuriousMode::Color => {
            let mut f = Matrix::zeros(n, pixels * 3);
            for i in 0..n {
                let channel = if bits[i] { 0 } else { 1 };
                let gray = src.images.row(i);
                let out = f.row_mut(i);
                for (p, &v) in gray.iter().enumerate() {
                    out[p * 3 + channel] = v;
                }
            }
            f
        }
        SpuriousMode::Patch | SpuriousMode::NoisePatch => {
            let mut f = src.images.clone();
            let (h, w) = (src.height, src.width);
            for i in 0..n {
                let (r0, c0, size) = if bits[i] { (0, 0, 3) } else { (h - 2, w - 2, 2) };
                let row = f.row_mut(i);
                for r in r0..r0 + size {
                    for c in c0..c0 + size {
                        row[r * w + c] = match mode {
                            SpuriousMode::NoisePatch => rng.uniform(),
                            _ => 1.0,
                        };
                    }
                }
            }
            f
        }
    };
    let env = EnvironmentDataset {
        env_id: env_id.to_string(),
        features,
        labels: labels.clone(),
        spurious_bits: bits.clone(),
        flip_prob: p_e,
        source_rows: src.source_rows.clone(),
    };
    let plain = EnvironmentDataset {
        env_id: format!("{env_id}/plain"),
        features: src.images.clone(),
        labels,
        spurious_bits: bits,
        flip_prob: p_e,
        source_rows: src.source_rows.clone(),
    };
    Ok((env, plain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_shapes;

    fn source(n: usize) -> LabeledImages {
        synth_shapes(n, 16, 16, &mut Rng::new(1)).unwrap()
    }

    #[test]
    fn zero_and_one_flip_probabilities() {
        let src = source(200);
        let e0 = make_spurious_env(&src, 0.0, SpuriousMode::Color, "a", &mut Rng::new(2)).unwrap();
        assert!(e0.labels.iter().zip(&e0.spurious_bits).all(|(&y, &z)| (y == 1) == z));
        let e1 = make_spurious_env(&src, 1.0, SpuriousMode::Color, "b", &mut Rng::new(2)).unwrap();
        assert!(e1.labels.iter().zip(&e1.spurious_bits).all(|(&y, &z)| (y == 1) != z));
    }

    #[test]
    fn color_goes_to_exactly_one_channel() {
        let src = source(50);
        let env = make_spurious_env(&src, 0.3, SpuriousMode::Color, "c", &mut Rng::new(3)).unwrap();
        assert_eq!(env.feature_dim(), 16 * 16 * 3);
        for i in 0..env.len() {
            let row = env.features.row(i);
            let red: Vec<f64> = row.iter().step_by(3).copied().collect();
            let green: Vec<f64> = row.iter().skip(1).step_by(3).copied().collect();
            let blue_zero = row.iter().skip(2).step_by(3).all(|&v| v == 0.0);
            assert!(blue_zero);
            let (on, off) = if env.spurious_bits[i] { (red, green) } else { (green, red) };
            assert_eq!(on, src.images.row(i));
            assert!(off.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn patches_land_in_their_corners() {
        let src = source(40);
        let env = make_spurious_env(&src, 0.5, SpuriousMode::Patch, "p", &mut Rng::new(4)).unwrap();
        assert_eq!(env.feature_dim(), 256);
        for i in 0..env.len() {
            let row = env.features.row(i);
            if env.spurious_bits[i] {
                for r in 0..3 {
                    for c in 0..3 {
                        assert_eq!(row[r * 16 + c], 1.0);
                    }
                }
            } else {
                for r in 14..16 {
                    for c in 14..16 {
                        assert_eq!(row[r * 16 + c], 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn plain_twin_shares_labels() {
        let src = source(30);
        let (env, plain) =
            make_spurious_pair(&src, 0.2, SpuriousMode::Color, "e", &mut Rng::new(5)).unwrap();
        assert_eq!(env.labels, plain.labels);
        assert_eq!(plain.features, src.images);
    }

    #[test]
    fn rejects_bad_probability() {
        let src = source(2);
        assert!(make_spurious_env(&src, 1.5, SpuriousMode::Color, "x", &mut Rng::new(0)).is_err());
    }
}
