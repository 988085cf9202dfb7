use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::math::quantile;

pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_QUANTILE: f64 = 0.25;

/// When best-response training stops before `max_iters`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TerminationRule {
    /// Stop once the current train accuracy is at or below the `q`-quantile
    /// of the last `window` recorded accuracies.
    Quantile { window: usize, q: f64 },
    /// Stop once the current train accuracy is at or below a fixed value.
    Threshold { window: usize, accuracy: f64 },
    Never,
}

impl Default for TerminationRule {
    fn default() -> Self {
        TerminationRule::Quantile {
            window: DEFAULT_WINDOW,
            q: DEFAULT_QUANTILE,
        }
    }
}

impl TerminationRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TerminationRule::Quantile { window, q } => {
                if window == 0 || !(0.0..=1.0).contains(&q) {
                    return Err(Error::Config(format!("quantile rule window={window} q={q}")));
                }
            }
            TerminationRule::Threshold { window, accuracy } => {
                if window == 0 || !accuracy.is_finite() {
                    return Err(Error::Config(format!(
                        "threshold rule window={window} accuracy={accuracy}"
                    )));
                }
            }
            TerminationRule::Never => {}
        }
        Ok(())
    }

    fn window(&self) -> usize {
        match *self {
            TerminationRule::Quantile { window, .. } | TerminationRule::Threshold { window, .. } => window,
            TerminationRule::Never => 0,
        }
    }
}

/// Rolling window of recent ensemble train accuracies.
#[derive(Clone, Debug)]
pub struct TerminationMonitor {
    window: VecDeque<f64>,
    capacity: usize,
    min_steps: usize,
    rule: TerminationRule,
}

impl TerminationMonitor {
    /// `min_steps` is `warm_start_steps` plus the window size.
    pub fn new(rule: TerminationRule, warm_start_steps: usize) -> Self {
        let capacity = rule.window();
        Self {
            window: VecDeque::with_capacity(capacity),
            capacity,
            min_steps: warm_start_steps + capacity,
            rule,
        }
    }

    pub fn min_steps(&self) -> usize {
        self.min_steps
    }

    pub fn window(&self) -> &VecDeque<f64> {
        &self.window
    }

    /// Records `accuracy` at `step` and reports whether training should stop.
    pub fn should_terminate(&mut self, accuracy: f64, step: usize) -> bool {
        if self.capacity == 0 {
            return false;
        }
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(accuracy);
        if step < self.min_steps || self.window.len() < self.capacity {
            return false;
        }
        match self.rule {
            TerminationRule::Quantile { q, .. } => {
                let w: Vec<f64> = self.window.iter().copied().collect();
                accuracy <= quantile(&w, q)
            }
            TerminationRule::Threshold { accuracy: t, .. } => accuracy <= t,
            TerminationRule::Never => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_stream_fires_at_first_eligible_step() {
        let mut m = TerminationMonitor::new(TerminationRule::default(), 7);
        let fired = (1..100).find(|&s| m.should_terminate(0.6, s)).unwrap();
        assert_eq!(fired, 27);
    }

    #[test]
    fn square_wave_fires_only_low() {
        let mut m = TerminationMonitor::new(TerminationRule::default(), 10);
        for step in 1..200 {
            let acc = if step % 2 == 0 { 0.88 } else { 0.75 };
            if m.should_terminate(acc, step) {
                assert_eq!(acc, 0.75);
                assert!(step >= 30);
                return;
            }
        }
        panic!("never fired");
    }

    #[test]
    fn threshold_rule() {
        let rule = TerminationRule::Threshold { window: 3, accuracy: 0.5 };
        let mut m = TerminationMonitor::new(rule, 2);
        assert!(!m.should_terminate(0.4, 1));
        assert!(!m.should_terminate(0.6, 5));
        assert!(m.should_terminate(0.5, 6));
    }

    #[test]
    fn never_rule_never_fires() {
        let mut m = TerminationMonitor::new(TerminationRule::Never, 0);
        assert!((1..500).all(|s| !m.should_terminate(0.0, s)));
    }

    proptest! {
        #[test]
        fn increasing_stream_never_fires(start in 0.0f64..0.5, incs in prop::collection::vec(1e-6f64..0.01, 1..300)) {
            let mut m = TerminationMonitor::new(TerminationRule::default(), 5);
            let mut acc = start;
            for (i, d) in incs.iter().enumerate() {
                acc += d;
                prop_assert!(!m.should_terminate(acc, i + 1));
            }
        }

        #[test]
        fn never_before_min_steps(accs in prop::collection::vec(0.0f64..1.0, 1..200), warm in 0usize..50) {
            let mut m = TerminationMonitor::new(TerminationRule::default(), warm);
            for (i, a) in accs.iter().enumerate() {
                let step = i + 1;
                if m.should_terminate(*a, step) {
                    prop_assert!(step >= warm + DEFAULT_WINDOW);
                }
                prop_assert!(m.window().len() <= DEFAULT_WINDOW);
            }
        }
    }
}
