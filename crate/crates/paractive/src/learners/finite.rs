//! Finite-hypothesis ERM learner over 1-D thresholds, used to run and verify
//! the delayed importance-weighted active learner.

/// One consumed example as recorded in the learner's log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsumedExample {
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub queried: bool,
}

/// Finite class of threshold hypotheses `h(x) = sign(x - threshold)`
/// (with `x == threshold` predicting +1), plus per-hypothesis
/// importance-weighted mistake sums.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteClass {
    thresholds: Vec<f64>,
    mistake_sums: Vec<f64>,
    m: u64,
    log: Vec<ConsumedExample>,
}

impl FiniteClass {
    pub fn new(thresholds: Vec<f64>) -> Self {
        assert!(!thresholds.is_empty(), "hypothesis class must be non-empty");
        let n = thresholds.len();
        FiniteClass {
            thresholds,
            mistake_sums: vec![0.0; n],
            m: 0,
            log: Vec::new(),
        }
    }

    /// Evenly spaced grid of `count` thresholds over `[0, 1]`.
    pub fn threshold_grid(count: usize) -> Self {
        assert!(count >= 2);
        let thresholds = (0..count)
            .map(|i| i as f64 / (count - 1) as f64)
            .collect();
        Self::new(thresholds)
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn consumed(&self) -> u64 {
        self.m
    }

    pub fn log(&self) -> &[ConsumedExample] {
        &self.log
    }

    pub fn predict(&self, hypothesis: usize, x: f64) -> f64 {
        if x >= self.thresholds[hypothesis] {
            1.0
        } else {
            -1.0
        }
    }

    /// Consume one example. Only queried examples contribute weight `1/p`
    /// to the mistake sums; every example advances `m`.
    pub fn consume(&mut self, x: f64, y: f64, p: f64, queried: bool) {
        self.log.push(ConsumedExample { x, y, p, queried });
        self.m += 1;
        if queried {
            let w = 1.0 / p;
            for h in 0..self.thresholds.len() {
                if self.predict(h, x) != y {
                    self.mistake_sums[h] += w;
                }
            }
        }
    }

    /// Importance-weighted empirical error of one hypothesis; 0 when no
    /// examples have been consumed.
    pub fn iw_error(&self, hypothesis: usize) -> f64 {
        if self.m == 0 {
            0.0
        } else {
            self.mistake_sums[hypothesis] / self.m as f64
        }
    }

    pub fn mistake_sums(&self) -> &[f64] {
        &self.mistake_sums
    }

    /// Argmin of importance-weighted error, ties broken by lowest index.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for h in 1..self.mistake_sums.len() {
            if self.mistake_sums[h] < self.mistake_sums[best] {
                best = h;
            }
        }
        best
    }

    /// Best hypothesis disagreeing with `reference` at `x`, or `None` when
    /// every hypothesis agrees there.
    pub fn best_disagreeing(&self, reference: usize, x: f64) -> Option<usize> {
        let ref_pred = self.predict(reference, x);
        let mut best: Option<usize> = None;
        for h in 0..self.thresholds.len() {
            if self.predict(h, x) == ref_pred {
                continue;
            }
            if best.is_none_or(|b| self.mistake_sums[h] < self.mistake_sums[b]) {
                best = Some(h);
            }
        }
        best
    }

    /// ±1 prediction of the current best hypothesis.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.predict(self.best(), x[0])
    }

    /// Recompute all mistake sums from the log; exact equality with the
    /// incrementally maintained sums is an invariant.
    pub fn replay_mistake_sums(&self) -> Vec<f64> {
        let mut fresh = FiniteClass::new(self.thresholds.clone());
        for e in &self.log {
            fresh.consume(e.x, e.y, e.p, e.queried);
        }
        fresh.mistake_sums
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_break_returns_lowest_index() {
        let f = FiniteClass::threshold_grid(11);
        assert_eq!(f.best(), 0);
    }

    #[test]
    fn single_query_enumeration() {
        // class {0.0, 0.1, ..., 1.0}; (x = 0.05, y = +1, p = 1) is
        // misclassified by every threshold > 0.05, so best = index of 0.0
        let mut f = FiniteClass::threshold_grid(11);
        f.consume(0.05, 1.0, 1.0, true);
        let errs: Vec<f64> = (0..11).map(|h| f.iw_error(h)).collect();
        let brute = errs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(a.0.cmp(&b.0)))
            .unwrap()
            .0;
        assert_eq!(f.best(), 0);
        assert_eq!(f.best(), brute);
        assert_eq!(f.iw_error(0), 0.0);
        assert_eq!(f.iw_error(5), 1.0);
    }

    #[test]
    fn disagreeing_hypothesis_flips_prediction() {
        let mut f = FiniteClass::threshold_grid(11);
        f.consume(0.7, 1.0, 0.5, true);
        let best = f.best();
        let x = 0.35;
        let other = f.best_disagreeing(best, x).unwrap();
        assert_ne!(f.predict(best, x), f.predict(other, x));
    }

    #[test]
    fn singleton_class_has_no_disagreement() {
        let f = FiniteClass::new(vec![0.5]);
        assert_eq!(f.best_disagreeing(0, 0.3), None);
    }

    #[test]
    fn replay_reproduces_sums_exactly() {
        let mut f = FiniteClass::threshold_grid(21);
        let pts = [
            (0.1, 1.0, 0.3, true),
            (0.9, -1.0, 1.0, true),
            (0.4, 1.0, 0.8, false),
            (0.6, -1.0, 0.05, true),
        ];
        for (x, y, p, q) in pts {
            f.consume(x, y, p, q);
        }
        assert_eq!(f.replay_mistake_sums(), f.mistake_sums);
    }
}
