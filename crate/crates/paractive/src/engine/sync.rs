//! Synchronous rounds: every node sifts its slice of the global batch
//! against the same frozen model, then a single updater consumes the
//! selected examples in (node, within-node) order.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::Result;
use crate::rng::substream;
use crate::sampling::{sift_batch, QueryRecord, SiftResult};

use super::{snapshot_bytes, warmstart, EngineSetup, ErrorPoint, RunRecord};

/// Run Algorithm 1 over the whole stream after the warmstart prefix.
/// Rounds consume `B` examples each; a trailing partial round is dropped
/// so every round has exactly `B/k` examples per node.
pub fn run_synchronous(setup: &EngineSetup, train: &Dataset, test: &Dataset) -> Result<RunRecord> {
    setup.cluster.validate()?;
    let cluster = &setup.cluster;
    let k = cluster.k;
    let b = cluster.batch;
    let per_node = b / k;
    let w = cluster.warmstart;

    let config = serde_json::json!({
        "setup": setup,
        "train_len": train.len(),
        "test_len": test.len(),
        "dim": train.dim(),
    });
    let mut record = RunRecord::new(config, "synchronous");

    let (mut learner, warm_time) = warmstart(setup, train)?;
    record.warmstart_time = warm_time;
    record.simulated_time = warm_time;

    let rounds = (train.len() - w) / b;
    let mut rngs: Vec<ChaCha8Rng> = (0..k)
        .map(|i| substream(cluster.seed, "node", i as u64))
        .collect();
    let mut queries = 0u64;

    for round in 1..=rounds {
        let n_global = (w + (round - 1) * b) as u64;
        let round_base = w + (round - 1) * b;
        let snapshot = learner.clone();

        // Fan-out over nodes; every read targets the frozen snapshot and
        // each node owns an independent RNG stream, so the parallel
        // schedule matches the sequential one exactly.
        let results: Vec<Result<SiftResult>> = rngs
            .par_iter_mut()
            .enumerate()
            .map(|(node, rng)| {
                let start = round_base + node * per_node;
                sift_batch(&snapshot, train, start..start + per_node, &setup.rule, n_global, rng)
            })
            .collect();
        let results: Vec<SiftResult> = results.into_iter().collect::<Result<_>>()?;

        let mut max_sift = 0.0f64;
        let mut update_ops = 0u64;
        for (node, res) in results.iter().enumerate() {
            max_sift = max_sift.max(res.score_ops as f64);
            record.sift_ops += res.score_ops;
            let m = n_global - w as u64;
            for (j, (&p, &hit)) in res.probabilities.iter().zip(&res.queried).enumerate() {
                let t = ((round - 1) * b + node * per_node + j + 1) as u64;
                queries += hit as u64;
                record.query_log.push(QueryRecord {
                    t,
                    node: node as u32,
                    queried: hit,
                    p,
                    delay: t - m,
                    m,
                });
            }
        }
        for res in &results {
            record.broadcast_count += res.selected.len() as u64;
            for ex in &res.selected {
                update_ops +=
                    learner.update_one(ex.index, train.features_of(ex.index), train.label_of(ex.index), ex.p)?;
            }
        }
        record.update_ops += update_ops;
        record.round_sift_times.push(max_sift);
        record.round_update_times.push(update_ops as f64);
        record.simulated_time += max_sift + update_ops as f64;

        if (round as u64).is_multiple_of(cluster.checkpoint_every) || round == rounds {
            record.error_curve.push(ErrorPoint {
                examples_seen: (w + round * b) as u64,
                simulated_time: record.simulated_time,
                test_error: learner.test_error(test),
                queries_so_far: queries,
            });
        }
    }

    record.examples_streamed = (rounds * b) as u64;
    record.final_snapshot = snapshot_bytes(&learner);
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_gaussian;
    use crate::engine::{ClusterConfig, LatencyModel, LearnerConfig};
    use crate::learners::SvmConfig;
    use crate::sampling::Rule;

    fn setup(k: usize, batch: usize, seed: u64) -> EngineSetup {
        EngineSetup {
            learner: LearnerConfig::Svm(SvmConfig { gamma: 0.5, ..Default::default() }),
            rule: Rule::Margin { eta: 0.1 },
            cluster: ClusterConfig {
                k,
                batch,
                warmstart: 20,
                seed,
                checkpoint_every: 1,
                rates: Vec::new(),
                latency: LatencyModel::Zero,
            },
        }
    }

    #[test]
    fn deterministic_and_conserving() {
        let train = synth_gaussian(5, 420, 3, 3.0).unwrap();
        let test = synth_gaussian(6, 200, 3, 3.0).unwrap();
        let s = setup(4, 100, 9);
        let a = run_synchronous(&s, &train, &test).unwrap();
        let b = run_synchronous(&s, &train, &test).unwrap();
        assert_eq!(a, b);

        assert_eq!(a.examples_streamed, 400);
        assert_eq!(a.query_log.records.len(), 400);
        assert_eq!(a.broadcast_count, a.queries());
        // stream order: t strictly increasing
        for (i, r) in a.query_log.records.iter().enumerate() {
            assert_eq!(r.t, i as u64 + 1);
            assert!(r.delay >= 1 && r.delay <= 100);
            assert_eq!(r.m + r.delay, r.t);
        }
    }

    #[test]
    fn passive_rule_selects_everything() {
        let train = synth_gaussian(5, 120, 3, 3.0).unwrap();
        let test = synth_gaussian(6, 60, 3, 3.0).unwrap();
        let mut s = setup(2, 50, 9);
        s.rule = Rule::Constant { p: 1.0 };
        let rec = run_synchronous(&s, &train, &test).unwrap();
        assert_eq!(rec.queries(), 100);
        assert_eq!(rec.sift_ops, 0);
        assert!(rec.query_log.records.iter().all(|r| r.p == 1.0 && r.queried));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let train = synth_gaussian(7, 220, 3, 3.0).unwrap();
        let test = synth_gaussian(8, 100, 3, 3.0).unwrap();
        let s = setup(4, 40, 11);
        let base = run_synchronous(&s, &train, &test).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let single = pool.install(|| run_synchronous(&s, &train, &test)).unwrap();
        assert_eq!(base, single);
    }
}
