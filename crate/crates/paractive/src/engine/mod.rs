//! Deterministic simulation of the cluster protocols: the synchronous round
//! protocol, the asynchronous dual-queue protocol, sequential baselines and
//! the delayed importance-weighted active learner.

mod async_sim;
mod delayed_iwal;
pub mod persist;
mod seq;
mod sync;

pub use async_sim::run_asynchronous;
pub use delayed_iwal::{run_delayed_iwal, IwalSetup};
pub use seq::{run_sequential, SequentialMode};
pub use sync::run_synchronous;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::{snapshot, FiniteClass, KernelSvm, LearnerState, NeuralNet, NnConfig, SvmConfig};
use crate::rng::substream;
use crate::sampling::{QueryLog, Rule};

/// Which learner a run instantiates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerConfig {
    Svm(SvmConfig),
    Nn(NnConfig),
    /// Finite threshold class over [0, 1] with `count` hypotheses.
    FiniteThresholds { count: usize },
}

impl LearnerConfig {
    pub fn build(&self, dim: usize, rng: &mut ChaCha8Rng) -> LearnerState {
        match *self {
            LearnerConfig::Svm(cfg) => LearnerState::Svm(KernelSvm::new(cfg)),
            LearnerConfig::Nn(cfg) => LearnerState::Nn(NeuralNet::new(dim, cfg, rng)),
            LearnerConfig::FiniteThresholds { count } => {
                LearnerState::Finite(FiniteClass::threshold_grid(count))
            }
        }
    }
}

/// Broadcast latency model of the asynchronous engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
#[derive(Default)]
pub enum LatencyModel {
    #[default]
    Zero,
    /// Uniform in `[0, max]` per destination.
    Uniform { max: f64 },
}


impl LatencyModel {
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            LatencyModel::Zero => 0.0,
            LatencyModel::Uniform { max } => rng.gen::<f64>() * max,
        }
    }
}

/// Specification of the delay process `tau(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DelayModel {
    /// `tau(t) = 1`: standard undelayed active learning.
    Unit,
    /// Model refreshed after every full batch of `b` examples.
    FixedBatch { b: u64 },
    /// Random delays drawn per step, capped at `cap`.
    RandomBounded { dist: RandomDelayDist, cap: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum RandomDelayDist {
    Uniform,
    /// Geometric with success probability `q`, shifted to start at 1.
    Geometric { q: f64 },
}

impl DelayModel {
    /// Effective sample count `m_t = t - tau(t)` at step `t >= 1`.
    /// `prev_m` keeps the sequence non-decreasing under random delays.
    pub fn effective_count(&self, t: u64, prev_m: u64, rng: &mut ChaCha8Rng) -> u64 {
        match *self {
            DelayModel::Unit => t - 1,
            DelayModel::FixedBatch { b } => (t - 1) / b * b,
            DelayModel::RandomBounded { dist, cap } => {
                let cap = cap.max(1);
                let tau = match dist {
                    RandomDelayDist::Uniform => rng.gen_range(1..=cap),
                    RandomDelayDist::Geometric { q } => {
                        let mut tau = 1u64;
                        while tau < cap && rng.gen::<f64>() >= q {
                            tau += 1;
                        }
                        tau
                    }
                };
                prev_m.max(t.saturating_sub(tau))
            }
        }
    }
}

/// Cluster shape and seeding shared by all engines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    /// Global batch size B (synchronous rounds).
    pub batch: usize,
    pub warmstart: usize,
    pub seed: u64,
    /// Checkpoint cadence: rounds (sync), examples (sequential) or events
    /// (async).
    pub checkpoint_every: u64,
    /// Per-node processing-rate multipliers for the asynchronous engine;
    /// empty means all nodes run at rate 1.
    #[serde(default)]
    pub rates: Vec<f64>,
    #[serde(default)]
    pub latency: LatencyModel,
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::argument("k must be at least 1"));
        }
        if self.batch < self.k || !self.batch.is_multiple_of(self.k) {
            return Err(Error::argument(format!(
                "batch B = {} must be a positive multiple of k = {}",
                self.batch, self.k
            )));
        }
        if !self.rates.is_empty() {
            if self.rates.len() != self.k {
                return Err(Error::argument("rates must list one multiplier per node"));
            }
            if self.rates.iter().any(|r| *r <= 0.0) {
                return Err(Error::argument("rate multipliers must be positive"));
            }
        }
        Ok(())
    }

    pub fn rate(&self, node: usize) -> f64 {
        self.rates.get(node).copied().unwrap_or(1.0)
    }
}

/// Everything an engine needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineSetup {
    pub learner: LearnerConfig,
    pub rule: Rule,
    pub cluster: ClusterConfig,
}

/// One test-error checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub examples_seen: u64,
    pub simulated_time: f64,
    pub test_error: f64,
    pub queries_so_far: u64,
}

/// Full deterministic trace of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Echo of the engine inputs, sufficient to reproduce the run.
    pub config: serde_json::Value,
    pub mode: String,
    pub query_log: QueryLog,
    pub warmstart_time: f64,
    /// Per-round max-node sift time (synchronous engine only).
    pub round_sift_times: Vec<f64>,
    /// Per-round update time (synchronous engine only).
    pub round_update_times: Vec<f64>,
    pub error_curve: Vec<ErrorPoint>,
    pub broadcast_count: u64,
    pub sift_ops: u64,
    pub update_ops: u64,
    pub simulated_time: f64,
    pub examples_streamed: u64,
    /// Final model in the snapshot container format.
    pub final_snapshot: Vec<u8>,
    /// Async only: one snapshot per node replica after the global drain.
    pub replica_snapshots: Vec<Vec<u8>>,
    /// Async only: completion time of every fresh-queue dequeue, per node.
    pub node_dequeue_times: Vec<Vec<f64>>,
}

impl RunRecord {
    pub fn new(config: serde_json::Value, mode: &str) -> Self {
        RunRecord {
            config,
            mode: mode.to_string(),
            query_log: QueryLog::default(),
            warmstart_time: 0.0,
            round_sift_times: Vec::new(),
            round_update_times: Vec::new(),
            error_curve: Vec::new(),
            broadcast_count: 0,
            sift_ops: 0,
            update_ops: 0,
            simulated_time: 0.0,
            examples_streamed: 0,
            final_snapshot: Vec::new(),
            replica_snapshots: Vec::new(),
            node_dequeue_times: Vec::new(),
        }
    }

    pub fn queries(&self) -> u64 {
        self.query_log.queried_count()
    }
}

/// Train the initial model passively on the first `warmstart` examples
/// (all `p = 1`). Returns the model and the abstract warmstart time.
pub fn warmstart(setup: &EngineSetup, train: &Dataset) -> Result<(LearnerState, f64)> {
    let w = setup.cluster.warmstart;
    if w > train.len() {
        return Err(Error::argument(format!(
            "warmstart size {w} exceeds dataset size {}",
            train.len()
        )));
    }
    let mut rng = substream(setup.cluster.seed, "warmstart", 0);
    let mut learner = setup.learner.build(train.dim(), &mut rng);
    let mut ops = 0u64;
    for i in 0..w {
        ops += learner.update_one(i, train.features_of(i), train.label_of(i), 1.0)?;
    }
    Ok((learner, ops as f64))
}

pub(crate) fn snapshot_bytes(state: &LearnerState) -> Vec<u8> {
    snapshot::serialize(state).expect("snapshot serialization cannot fail in memory")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_gaussian;

    #[test]
    fn delay_models() {
        let mut rng = substream(1, "delay", 0);
        assert_eq!(DelayModel::Unit.effective_count(1, 0, &mut rng), 0);
        assert_eq!(DelayModel::Unit.effective_count(10, 0, &mut rng), 9);
        let fixed = DelayModel::FixedBatch { b: 100 };
        assert_eq!(fixed.effective_count(1, 0, &mut rng), 0);
        assert_eq!(fixed.effective_count(100, 0, &mut rng), 0);
        assert_eq!(fixed.effective_count(101, 0, &mut rng), 100);
        assert_eq!(fixed.effective_count(250, 0, &mut rng), 200);

        let random = DelayModel::RandomBounded {
            dist: RandomDelayDist::Uniform,
            cap: 8,
        };
        let mut prev = 0;
        for t in 1..200 {
            let m = random.effective_count(t, prev, &mut rng);
            assert!(m >= prev);
            assert!(t - m <= 8 || m == prev);
            prev = m;
        }
    }

    #[test]
    fn cluster_validation() {
        let base = ClusterConfig {
            k: 4,
            batch: 8,
            warmstart: 0,
            seed: 0,
            checkpoint_every: 1,
            rates: Vec::new(),
            latency: LatencyModel::Zero,
        };
        assert!(base.validate().is_ok());
        assert!(ClusterConfig { batch: 10, ..base.clone() }.validate().is_err());
        assert!(ClusterConfig { k: 0, ..base.clone() }.validate().is_err());
        assert!(ClusterConfig {
            rates: vec![1.0, 0.5],
            ..base.clone()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn warmstart_degenerate_cases() {
        let train = synth_gaussian(1, 30, 2, 2.0).unwrap();
        let setup = EngineSetup {
            learner: LearnerConfig::Svm(SvmConfig::default()),
            rule: Rule::Constant { p: 1.0 },
            cluster: ClusterConfig {
                k: 1,
                batch: 1,
                warmstart: 0,
                seed: 3,
                checkpoint_every: 1,
                rates: Vec::new(),
                latency: LatencyModel::Zero,
            },
        };
        let (model, time) = warmstart(&setup, &train).unwrap();
        assert_eq!(time, 0.0);
        if let LearnerState::Svm(svm) = model {
            assert_eq!(svm.support_count(), 0);
        } else {
            panic!("expected svm");
        }

        let mut full = setup.clone();
        full.cluster.warmstart = 30;
        let (model, time) = warmstart(&full, &train).unwrap();
        assert!(time > 0.0);
        if let LearnerState::Svm(svm) = model {
            assert!(svm.support_count() > 0);
        }

        let mut too_big = setup;
        too_big.cluster.warmstart = 31;
        assert!(warmstart(&too_big, &train).is_err());
    }
}
