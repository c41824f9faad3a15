//! Passive learners (the updater of the cluster protocols) behind a common
//! contract: produce a real-valued score `f(x)` and consume
//! importance-weighted examples one at a time.

mod finite;
mod nn;
pub mod snapshot;
mod svm;

pub use finite::{ConsumedExample, FiniteClass};
pub use nn::{NeuralNet, NnConfig};
pub use svm::{rbf_kernel, KernelSvm, SupportVector, SvmConfig};

use crate::data::Dataset;
use crate::error::Result;

/// An example together with the probability `p` with which its label was
/// queried; the importance weight is `1/p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiftedExample {
    /// Stream index into the run's dataset.
    pub index: usize,
    pub p: f64,
}

impl SiftedExample {
    pub fn weight(&self) -> f64 {
        1.0 / self.p
    }
}

/// One of the three learner states. An enum rather than a trait object so
/// replicas clone cheaply and snapshots stay a closed format.
#[derive(Clone, Debug)]
pub enum LearnerState {
    Svm(KernelSvm),
    Nn(NeuralNet),
    Finite(FiniteClass),
}

impl LearnerState {
    /// Real-valued score whose sign predicts the class.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            LearnerState::Svm(s) => s.score(x),
            LearnerState::Nn(n) => n.score(x),
            LearnerState::Finite(f) => f.score(x),
        }
    }

    /// Abstract cost of one score evaluation: kernel evaluations for the
    /// SVM, one forward pass for the others.
    pub fn score_cost(&self) -> u64 {
        match self {
            LearnerState::Svm(s) => s.support_count().max(1) as u64,
            LearnerState::Nn(_) | LearnerState::Finite(_) => 1,
        }
    }

    /// Consume one importance-weighted example; returns the abstract number
    /// of operations spent.
    pub fn update_one(&mut self, index: usize, x: &[f64], y: f64, p: f64) -> Result<u64> {
        match self {
            LearnerState::Svm(s) => s.update_one(index, x, y, p),
            LearnerState::Nn(n) => n.update_one(x, y, p),
            LearnerState::Finite(f) => {
                f.consume(x[0], y, p, true);
                Ok(1)
            }
        }
    }

    /// Fraction of `test` misclassified by the current score sign
    /// (score ≥ 0 predicts +1).
    pub fn test_error(&self, test: &Dataset) -> f64 {
        if test.is_empty() {
            return 0.0;
        }
        let mut errs = 0usize;
        for ex in test.iter() {
            let pred = if self.score(ex.features) >= 0.0 { 1.0 } else { -1.0 };
            if pred != ex.label {
                errs += 1;
            }
        }
        errs as f64 / test.len() as f64
    }
}
