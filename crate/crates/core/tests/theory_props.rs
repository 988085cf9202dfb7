use std::collections::BTreeSet;

use eirm_core::theory::{scalar_game_grid, verify_nash, QuadGameSpec, QuadRisk};
use proptest::prelude::*;

/// Naive pair enumeration: (i, j) is a NE when neither index can be improved
/// along its own axis.
fn brute_force_ne(spec: &QuadGameSpec) -> BTreeSet<(i64, i64)> {
    let m = (spec.hi / spec.step).round() as i64;
    let risk = |e: usize, i: i64, j: i64| spec.risks[e].eval((i + j) as f64 * spec.step / 2.0);
    let tol = 1e-12;
    let mut out = BTreeSet::new();
    for i in -m..=m {
        for j in -m..=m {
            let best1 = (-m..=m).map(|k| risk(0, k, j)).fold(f64::INFINITY, f64::min);
            let best2 = (-m..=m).map(|k| risk(1, i, k)).fold(f64::INFINITY, f64::min);
            if risk(0, i, j) <= best1 + tol && risk(1, i, j) <= best2 + tol {
                out.insert((i, j));
            }
        }
    }
    out
}

#[test]
fn shared_minimizer_equal_on_every_grid() {
    for step in [0.2, 0.1, 0.05] {
        let m = (1.0f64 / step).round() as i64;
        for k in -m..=m {
            let c = k as f64 * step;
            let g = scalar_game_grid(&QuadGameSpec::new(c, c, 1.0, step)).unwrap();
            assert!(g.equal, "step {step}, c {c}");
            assert_eq!(g.invariant_set, BTreeSet::from([2 * k]));
        }
    }
}

#[test]
fn grid_matches_brute_force() {
    for (c1, c2) in [(0.5, 0.5), (0.0, 1.0), (-0.3, 0.7), (0.9, -0.9)] {
        let spec = QuadGameSpec::new(c1, c2, 1.0, 0.1);
        let g = scalar_game_grid(&spec).unwrap();
        assert_eq!(g.ne_pairs, brute_force_ne(&spec), "c = ({c1}, {c2})");
        let sums: BTreeSet<i64> = g.ne_pairs.iter().map(|&(i, j)| i + j).collect();
        assert_eq!(g.ne_ensembles, sums);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn identical_risks_give_swap_closed_pairs(c in -1.0f64..1.0, a in 0.1f64..10.0) {
        let mut spec = QuadGameSpec::new(c, c, 1.0, 0.1);
        for r in &mut spec.risks {
            *r = QuadRisk::new(a, c);
        }
        let g = scalar_game_grid(&spec).unwrap();
        for &(i, j) in &g.ne_pairs {
            prop_assert!(g.ne_pairs.contains(&(j, i)));
        }
    }

    #[test]
    fn curvature_scaling_keeps_pairs(
        c1 in -1.0f64..1.0,
        c2 in -1.0f64..1.0,
        s1 in 0.05f64..20.0,
        s2 in 0.05f64..20.0,
    ) {
        let base = QuadGameSpec::new(c1, c2, 1.0, 0.1);
        let mut scaled = base.clone();
        scaled.risks[0] = QuadRisk::new(s1, c1);
        scaled.risks[1] = QuadRisk::new(s2, c2);
        let a = scalar_game_grid(&base).unwrap();
        let b = scalar_game_grid(&scaled).unwrap();
        prop_assert_eq!(a.ne_pairs, b.ne_pairs);
        prop_assert_eq!(a.invariant_set, b.invariant_set);
    }

    #[test]
    fn tighter_eps_never_flips_fail_to_pass(
        w1 in -1.0f64..1.0,
        w2 in -1.0f64..1.0,
        eps in 1e-8f64..1e-1,
        shrink in 0.0f64..1.0,
    ) {
        let spec = QuadGameSpec::new(0.2, -0.1, 1.0, 0.1);
        let model = spec.model_at((w1, w2)).unwrap();
        let envs = spec.environments();
        let loose = verify_nash(&model, &envs, 100, 1e-2, eps).unwrap();
        let tight = verify_nash(&model, &envs, 100, 1e-2, eps * shrink).unwrap();
        prop_assert_eq!(loose.max_gain, tight.max_gain);
        prop_assert!(!tight.pass || loose.pass);
        prop_assert!(loose.per_env.iter().all(|d| d.gain >= -1e-12));
    }
}
