use std::collections::BTreeSet;

use crate::data::SemEnvironment;
use crate::error::{Error, Result};
use crate::game::{EnsembleModel, PhiMode};
use crate::math::Matrix;
use crate::nn::{Activation, DenseLayer, Mlp};

/// Scalar risk `a (v - c)^2 + b` of an ensemble output `v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadRisk {
    pub a: f64,
    pub c: f64,
    pub b: f64,
}

impl QuadRisk {
    pub fn new(a: f64, c: f64) -> Self {
        Self { a, c, b: 0.0 }
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.a * (v - self.c) * (v - self.c) + self.b
    }
}

/// Two-player scalar game on the symmetric grid `{k·step : |k| <= hi/step}`
/// (or the box `[-hi, hi]` for the continuous variant). Each player's
/// strategy is its own scalar classifier; both are scored on their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadGameSpec {
    pub risks: Vec<QuadRisk>,
    pub hi: f64,
    pub step: f64,
}

impl QuadGameSpec {
    pub fn new(c1: f64, c2: f64, hi: f64, step: f64) -> Self {
        Self {
            risks: vec![QuadRisk::new(1.0, c1), QuadRisk::new(1.0, c2)],
            hi,
            step,
        }
    }

    /// Number of grid steps from 0 to `hi`.
    pub fn half_width(&self) -> Result<i64> {
        self.validate()?;
        Ok((self.hi / self.step).round() as i64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.risks.len() != 2 {
            return Err(Error::Config(format!(
                "the quadratic game has 2 players, got {}",
                self.risks.len()
            )));
        }
        if self.risks.iter().any(|r| !(r.a > 0.0) || !r.c.is_finite() || !r.b.is_finite()) {
            return Err(Error::Config("curvatures must be positive and minimizers finite".into()));
        }
        if !(self.step > 0.0 && self.hi > 0.0) {
            return Err(Error::Config("grid needs positive step and bound".into()));
        }
        let m = self.hi / self.step;
        if (m - m.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "bound {} is not a whole number of steps {}",
                self.hi, self.step
            )));
        }
        if 2 * (m.round() as i64) + 1 < 11 {
            return Err(Error::Config("grid needs at least 11 points".into()));
        }
        Ok(())
    }

    /// One regression environment per player on the constant feature 1.
    /// Its mean squared error at ensemble output `v` is `R(v) / a`, which has
    /// the same minimizers as `R`.
    pub fn environments(&self) -> Vec<SemEnvironment> {
        self.risks
            .iter()
            .enumerate()
            .map(|(e, r)| {
                let d = (r.b.max(0.0) / r.a).sqrt();
                SemEnvironment {
                    env_id: format!("env{}", e + 1),
                    features: Matrix::filled(2, 1, 1.0),
                    targets: vec![r.c + d, r.c - d],
                    alpha: None,
                }
            })
            .collect()
    }

    /// Ensemble whose players output `w1` and `w2` on the constant feature.
    pub fn model_at(&self, pair: (f64, f64)) -> Result<EnsembleModel> {
        EnsembleModel::new(
            vec![scalar_net(pair.0)?, scalar_net(pair.1)?],
            None,
            PhiMode::Fixed,
        )
    }
}

/// Zero-bias `1 -> 1` linear net with the given weight.
fn scalar_net(weight: f64) -> Result<Mlp> {
    Mlp::from_layers(vec![DenseLayer {
        weights: Matrix::filled(1, 1, weight),
        bias: vec![0.0],
        activation: Activation::Linear,
        l2: 0.0,
        dropout: 0.0,
    }])
}

/// Enumeration result. Pair means are stored as index sums `i + j` so set
/// comparisons are exact; value = sum · step / 2.
#[derive(Clone, Debug, PartialEq)]
pub struct GridResult {
    pub step: f64,
    pub half_width: i64,
    /// Grid indices `(i, j)` of equilibrium pairs.
    pub ne_pairs: BTreeSet<(i64, i64)>,
    pub ne_ensembles: BTreeSet<i64>,
    pub invariant_set: BTreeSet<i64>,
    pub equal: bool,
    /// Every equilibrium pair has at least one strategy on the grid edge.
    pub boundary_only: bool,
}

impl GridResult {
    pub fn value(&self, index: i64) -> f64 {
        index as f64 * self.step
    }

    pub fn ensemble_value(&self, sum: i64) -> f64 {
        sum as f64 * self.step / 2.0
    }

    /// With a non-empty invariant set the two sets must coincide; without
    /// one, equilibria may exist only with a clamped strategy.
    pub fn pass(&self) -> bool {
        if self.invariant_set.is_empty() {
            self.boundary_only && self.ne_ensembles.is_disjoint(&self.invariant_set)
        } else {
            self.equal
        }
    }

    pub fn key_values(&self) -> Vec<(String, String)> {
        let fmt_set = |s: &BTreeSet<i64>| {
            s.iter()
                .map(|&k| format!("{}", self.ensemble_value(k)))
                .collect::<Vec<_>>()
                .join(";")
        };
        vec![
            ("check".into(), "grid".into()),
            ("pass".into(), self.pass().to_string()),
            ("equal".into(), self.equal.to_string()),
            ("boundary_only".into(), self.boundary_only.to_string()),
            ("ne_pairs".into(), self.ne_pairs.len().to_string()),
            ("ne_ensembles".into(), fmt_set(&self.ne_ensembles)),
            ("invariant_set".into(), fmt_set(&self.invariant_set)),
        ]
    }
}

/// Indices in `candidates` whose mean `(k + other) · step / 2` is closest to
/// `c`; closeness ties within a tiny fraction of the step count as equal.
fn closest(candidates: impl Iterator<Item = i64>, step: f64, c: f64, other: i64) -> Vec<i64> {
    let dist = |k: i64| ((k + other) as f64 * step / 2.0 - c).abs();
    let cands: Vec<i64> = candidates.collect();
    let best = cands.iter().map(|&k| dist(k)).fold(f64::INFINITY, f64::min);
    cands
        .into_iter()
        .filter(|&k| dist(k) <= best + 1e-9 * step)
        .collect()
}

/// Exhaustive equilibrium and invariance sets of the two-player grid game.
pub fn scalar_game_grid(spec: &QuadGameSpec) -> Result<GridResult> {
    let m = spec.half_width()?;
    let (c1, c2) = (spec.risks[0].c, spec.risks[1].c);
    let axis = || -m..=m;
    // Best responses depend only on the opponent's index.
    let br1: Vec<Vec<i64>> = axis().map(|j| closest(axis(), spec.step, c1, j)).collect();
    let br2: Vec<Vec<i64>> = axis().map(|i| closest(axis(), spec.step, c2, i)).collect();
    let mut ne_pairs = BTreeSet::new();
    for i in axis() {
        for j in axis() {
            if br1[(j + m) as usize].contains(&i) && br2[(i + m) as usize].contains(&j) {
                ne_pairs.insert((i, j));
            }
        }
    }
    let ne_ensembles: BTreeSet<i64> = ne_pairs.iter().map(|&(i, j)| i + j).collect();
    // Achievable means are the sums -2m..=2m; score them directly.
    let sums = || -2 * m..=2 * m;
    let best1: BTreeSet<i64> = closest(sums(), spec.step, c1, 0).into_iter().collect();
    let best2: BTreeSet<i64> = closest(sums(), spec.step, c2, 0).into_iter().collect();
    let invariant_set: BTreeSet<i64> = best1.intersection(&best2).copied().collect();
    let boundary_only = ne_pairs.iter().all(|&(i, j)| i.abs() == m || j.abs() == m);
    Ok(GridResult {
        step: spec.step,
        half_width: m,
        equal: ne_ensembles == invariant_set,
        ne_pairs,
        ne_ensembles,
        invariant_set,
        boundary_only,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundedNe {
    pub pair: (f64, f64),
    pub ensemble: f64,
    /// Both strategies strictly inside the box.
    pub interior: bool,
    /// The ensemble minimizes both risks over the achievable means.
    pub invariant: bool,
    /// Found by iteration rather than by the algebraic fallback.
    pub converged: bool,
    pub iterations: usize,
}

impl BoundedNe {
    pub fn key_values(&self) -> Vec<(String, String)> {
        vec![
            ("check".into(), "bounded".into()),
            ("w1".into(), self.pair.0.to_string()),
            ("w2".into(), self.pair.1.to_string()),
            ("ensemble".into(), self.ensemble.to_string()),
            ("interior".into(), self.interior.to_string()),
            ("invariant".into(), self.invariant.to_string()),
            ("converged".into(), self.converged.to_string()),
            ("iterations".into(), self.iterations.to_string()),
        ]
    }
}

const BR_TOL: f64 = 1e-12;
const BR_MAX_ITERS: usize = 10_000;

/// Pure equilibrium of the continuous game on the box `[-hi, hi]^2` by
/// alternating exact best responses `w_e <- clamp(2 c_e - w_other)`.
pub fn bounded_linear_ne(spec: &QuadGameSpec) -> Result<BoundedNe> {
    spec.validate()?;
    let (lo, hi) = (-spec.hi, spec.hi);
    let (c1, c2) = (spec.risks[0].c, spec.risks[1].c);
    let clamp = |v: f64| v.clamp(lo, hi);
    let (mut w1, mut w2) = (0.0f64, 0.0f64);
    let mut found = None;
    for it in 1..=BR_MAX_ITERS {
        let n1 = clamp(2.0 * c1 - w2);
        let n2 = clamp(2.0 * c2 - n1);
        let moved = (n1 - w1).abs().max((n2 - w2).abs());
        w1 = n1;
        w2 = n2;
        if moved <= BR_TOL {
            found = Some(it);
            break;
        }
    }
    let (pair, converged, iterations) = match found {
        Some(it) => ((w1, w2), true, it),
        None => (algebraic_fixed_point(c1, c2, lo, hi), false, BR_MAX_ITERS),
    };
    let ensemble = (pair.0 + pair.1) / 2.0;
    let inside = |w: f64| w > lo + BR_TOL && w < hi - BR_TOL;
    let interior = inside(pair.0) && inside(pair.1);
    // Achievable means fill [lo, hi]; each risk's minimizer there is clamp(c).
    let invariant = (ensemble - clamp(c1)).abs() <= 1e-9 && (ensemble - clamp(c2)).abs() <= 1e-9;
    if interior && !invariant {
        return Err(Error::Contract(format!(
            "interior equilibrium ({}, {}) is not a common stationary point",
            pair.0, pair.1
        )));
    }
    Ok(BoundedNe {
        pair,
        ensemble,
        interior,
        invariant,
        converged,
        iterations,
    })
}

/// Case analysis over which player sits at a bound.
fn algebraic_fixed_point(c1: f64, c2: f64, lo: f64, hi: f64) -> (f64, f64) {
    let br = |c: f64, other: f64| (2.0 * c - other).clamp(lo, hi);
    let is_fixed = |w1: f64, w2: f64| {
        (br(c1, w2) - w1).abs() <= 1e-9 && (br(c2, w1) - w2).abs() <= 1e-9
    };
    let mut candidates = vec![(lo, lo), (lo, hi), (hi, lo), (hi, hi)];
    for b in [lo, hi] {
        candidates.push((br(c1, b), b));
        candidates.push((b, br(c2, b)));
    }
    if (c1 - c2).abs() <= 1e-12 {
        candidates.push((c1.clamp(lo, hi), c1.clamp(lo, hi)));
    }
    candidates
        .into_iter()
        .find(|&(a, b)| is_fixed(a, b))
        .expect("the clamped best-response map on a box has a fixed point")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_minimizer_equal_sets() {
        let g = scalar_game_grid(&QuadGameSpec::new(0.5, 0.5, 1.0, 0.1)).unwrap();
        assert!(g.equal && g.pass());
        assert_eq!(g.invariant_set, BTreeSet::from([10]));
        // Every pair with mean 0.5 inside the grid: i + j = 10, |i|,|j| <= 10.
        assert_eq!(g.ne_pairs.len(), 11);
        assert!(g.ne_pairs.iter().all(|&(i, j)| i + j == 10));
    }

    #[test]
    fn no_shared_minimizer_is_boundary_only() {
        let g = scalar_game_grid(&QuadGameSpec::new(0.0, 1.0, 2.0, 0.1)).unwrap();
        assert!(g.invariant_set.is_empty());
        assert!(!g.ne_pairs.is_empty());
        assert!(g.boundary_only);
        assert_eq!(g.ne_pairs, BTreeSet::from([(-20, 20)]));
        assert_eq!(g.ensemble_value(0), 0.0);
        assert!(g.pass());
    }

    #[test]
    fn small_grid_rejected() {
        assert!(scalar_game_grid(&QuadGameSpec::new(0.0, 0.0, 0.4, 0.1)).is_err());
        assert!(scalar_game_grid(&QuadGameSpec::new(0.0, 0.0, 1.05, 0.1)).is_err());
    }

    #[test]
    fn bounded_shared_interior() {
        let ne = bounded_linear_ne(&QuadGameSpec::new(0.3, 0.3, 1.0, 0.1)).unwrap();
        assert!(ne.converged && ne.interior && ne.invariant);
        assert!((ne.ensemble - 0.3).abs() < 1e-12);
        assert!((ne.pair.0 - 0.6).abs() < 1e-12 && ne.pair.1.abs() < 1e-12);
    }

    #[test]
    fn bounded_opposed_on_boundary() {
        let ne = bounded_linear_ne(&QuadGameSpec::new(0.9, -0.9, 1.0, 0.1)).unwrap();
        assert_eq!(ne.pair, (1.0, -1.0));
        assert!(!ne.interior && !ne.invariant);
    }

    #[test]
    fn huge_box_reduces_to_shared_case() {
        let ne = bounded_linear_ne(&QuadGameSpec::new(0.7, 0.7, 100.0, 0.1)).unwrap();
        assert!(ne.interior && ne.invariant);
        assert!((ne.ensemble - 0.7).abs() < 1e-12);
    }

    #[test]
    fn fallback_finds_fixed_points() {
        for &(c1, c2) in &[(0.3, 0.3), (0.9, -0.9), (-0.5, 0.2), (1.5, 1.5)] {
            let (w1, w2) = algebraic_fixed_point(c1, c2, -1.0, 1.0);
            assert!(((2.0 * c1 - w2).clamp(-1.0, 1.0) - w1).abs() < 1e-9);
            assert!(((2.0 * c2 - w1).clamp(-1.0, 1.0) - w2).abs() < 1e-9);
        }
    }

    #[test]
    fn environments_reproduce_quadratic() {
        let spec = QuadGameSpec {
            risks: vec![
                QuadRisk { a: 2.0, c: 0.3, b: 0.5 },
                QuadRisk { a: 0.5, c: -0.1, b: 0.0 },
            ],
            hi: 1.0,
            step: 0.1,
        };
        let envs = spec.environments();
        let model = spec.model_at((0.4, -0.2)).unwrap();
        for (env, r) in envs.iter().zip(&spec.risks) {
            let got = crate::game::evaluate(&model, env).unwrap().risk;
            assert!((got - r.eval(0.1) / r.a).abs() < 1e-12, "{got} vs {}", r.eval(0.1));
        }
    }
}
