use eirm_core::data::{make_spurious_env, synth_shapes, SpuriousMode, DEFAULT_FLIP_PROBS, LABEL_NOISE};
use eirm_core::math::Rng;

const N: usize = 30_000;

fn three_sigma(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn flip_rates_within_binomial_bounds() {
    let root = Rng::new(2024);
    let src = synth_shapes(N, 16, 16, &mut root.child("shapes")).unwrap();
    for (k, &p) in DEFAULT_FLIP_PROBS.iter().enumerate() {
        for mode in [SpuriousMode::Color, SpuriousMode::Patch] {
            let id = format!("env{k}");
            let env = make_spurious_env(&src, p, mode, &id, &mut root.child(&id)).unwrap();
            let label_flips = env
                .labels
                .iter()
                .zip(&src.prelim_labels)
                .filter(|(y, pre)| y != pre)
                .count() as f64
                / N as f64;
            assert!(
                (label_flips - LABEL_NOISE).abs() <= three_sigma(LABEL_NOISE, N),
                "label noise {label_flips}"
            );
            let z = env.spurious_flip_rate();
            assert!((z - p).abs() <= three_sigma(p, N), "p_e {p}: observed {z}");
        }
    }
}
