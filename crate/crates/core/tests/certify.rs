use eirm_core::baselines::train_erm;
use eirm_core::data::{make_benchmark, BenchmarkKind, BenchmarkSpec};
use eirm_core::game::{EnsembleModel, TerminationRule, TrainConfig};
use eirm_core::math::Rng;
use eirm_core::nn::{mlp_layers, Activation, Mlp};
use eirm_core::theory::verify_invariance;

#[test]
fn pooled_erm_is_not_invariant_on_colored_data() {
    let b = make_benchmark(&BenchmarkSpec::new(BenchmarkKind::ColoredShapes, vec![500, 500, 100]), None, 0).unwrap();
    let net = Mlp::new(768, &mlp_layers(&[32], 2, Activation::Elu, 1e-3, 0.0), &mut Rng::new(0)).unwrap();
    let cfg = TrainConfig { lr: 1e-3, max_iters: 600, record_every: 100, termination: TerminationRule::Never, ..TrainConfig::default() };
    let (net, _) = train_erm(&b.train, net, &cfg, None).unwrap();
    let model = EnsembleModel::from_single(net);
    let report = verify_invariance(&model, &b.train, 100, 100, 1e-3, 1e-3, &mut Rng::new(1)).unwrap();
    assert!(!report.pass, "{report:?}");
    // The p = 0.1 environment is where leaning harder on colour pays.
    assert!(report.per_env[1].gain > report.eps, "{report:?}");
}
