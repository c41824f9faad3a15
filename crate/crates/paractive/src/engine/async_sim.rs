//! Event-driven simulation of the dual-queue asynchronous protocol.
//!
//! Every node keeps a full model replica. A node's loop: drain its
//! selected-example queue (in global sequencer order), then fetch one fresh
//! example, score it against the local replica and coin-flip; selected
//! examples are stamped by a global sequencer and broadcast to every node.
//! Node clocks advance by abstract cost divided by the node's rate.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::Result;
use crate::learners::LearnerState;
use crate::rng::substream;
use crate::sampling::QueryRecord;

use super::{snapshot_bytes, warmstart, EngineSetup, ErrorPoint, RunRecord};

#[derive(Clone, Copy, Debug, PartialEq)]
enum EventKind {
    /// Broadcast arrival; carries the sequencer stamp.
    Deliver { node: usize, seq: u64, index: usize, p: f64 },
    /// Node is free to drain its queue and fetch the next fresh example.
    Step { node: usize },
}

impl EventKind {
    fn priority(&self) -> u8 {
        // deliveries land before a step at the same instant, so a lone
        // zero-latency node applies its own selection before fetching.
        match self {
            EventKind::Deliver { .. } => 0,
            EventKind::Step { .. } => 1,
        }
    }
}

#[derive(Debug)]
struct Event {
    time: f64,
    kind: EventKind,
    id: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the earliest event pops first.
        other
            .time
            .total_cmp(&self.time)
            .then(other.kind.priority().cmp(&self.kind.priority()))
            .then(other.id.cmp(&self.id))
    }
}

struct Node {
    learner: LearnerState,
    rng: ChaCha8Rng,
    /// Pending selected examples keyed by sequencer stamp; consumed only in
    /// stamp order, gaps hold the rest back.
    buffer: BTreeMap<u64, (usize, f64)>,
    next_seq: u64,
    clock: f64,
    rate: f64,
    /// Global fresh-queue dequeue count at this node's last full drain.
    n_snapshot: u64,
    step_scheduled: bool,
    dequeue_times: Vec<f64>,
}

/// Run Algorithm 2 until the fresh queue is exhausted and every broadcast
/// has been applied by every replica.
pub fn run_asynchronous(setup: &EngineSetup, train: &Dataset, test: &Dataset) -> Result<RunRecord> {
    setup.cluster.validate()?;
    let cluster = &setup.cluster;
    let k = cluster.k;
    let w = cluster.warmstart;

    let config = serde_json::json!({
        "setup": setup,
        "train_len": train.len(),
        "test_len": test.len(),
        "dim": train.dim(),
    });
    let mut record = RunRecord::new(config, "asynchronous");

    let (warm_model, warm_time) = warmstart(setup, train)?;
    record.warmstart_time = warm_time;

    let mut nodes: Vec<Node> = (0..k)
        .map(|i| Node {
            learner: warm_model.clone(),
            rng: substream(cluster.seed, "node", i as u64),
            buffer: BTreeMap::new(),
            next_seq: 0,
            clock: warm_time,
            rate: cluster.rate(i),
            n_snapshot: 0,
            step_scheduled: true,
            dequeue_times: Vec::new(),
        })
        .collect();
    let mut latency_rng = substream(cluster.seed, "latency", 0);

    let mut heap = BinaryHeap::new();
    let mut next_id = 0u64;
    for i in 0..k {
        heap.push(Event { time: warm_time, kind: EventKind::Step { node: i }, id: next_id });
        next_id += 1;
    }

    let mut next_example = w;
    let mut global_dequeues = 0u64;
    let mut seq_counter = 0u64;
    let mut queries = 0u64;

    while let Some(event) = heap.pop() {
        match event.kind {
            EventKind::Deliver { node, seq, index, p } => {
                let n = &mut nodes[node];
                n.buffer.insert(seq, (index, p));
                if !n.step_scheduled {
                    n.step_scheduled = true;
                    let time = n.clock.max(event.time);
                    heap.push(Event { time, kind: EventKind::Step { node }, id: next_id });
                    next_id += 1;
                }
            }
            EventKind::Step { node } => {
                let n = &mut nodes[node];
                n.step_scheduled = false;
                n.clock = n.clock.max(event.time);

                // drain everything consumable in sequencer order
                while let Some(&(index, p)) = n.buffer.get(&n.next_seq) {
                    n.buffer.remove(&n.next_seq);
                    n.next_seq += 1;
                    let ops = n.learner.update_one(index, train.features_of(index), train.label_of(index), p)?;
                    record.update_ops += ops;
                    n.clock += ops as f64 / n.rate;
                }
                if n.buffer.is_empty() {
                    n.n_snapshot = global_dequeues;
                }

                if next_example < train.len() {
                    let index = next_example;
                    next_example += 1;
                    global_dequeues += 1;
                    let t = global_dequeues;
                    let m = n.n_snapshot;

                    let score = if setup.rule.needs_score() {
                        let cost = n.learner.score_cost();
                        record.sift_ops += cost;
                        n.clock += cost as f64 / n.rate;
                        n.learner.score(train.features_of(index))
                    } else {
                        0.0
                    };
                    let p = setup.rule.query_probability(score, w as u64 + m)?;
                    let hit = {
                        use rand::Rng;
                        n.rng.gen::<f64>() < p
                    };
                    record.query_log.push(QueryRecord { t, node: node as u32, queried: hit, p, delay: t - m, m });
                    n.dequeue_times.push(n.clock);
                    let clock = n.clock;

                    if hit {
                        queries += 1;
                        record.broadcast_count += 1;
                        let seq = seq_counter;
                        seq_counter += 1;
                        for dest in 0..k {
                            let latency = cluster.latency.draw(&mut latency_rng);
                            heap.push(Event {
                                time: clock + latency,
                                kind: EventKind::Deliver { node: dest, seq, index, p },
                                id: next_id,
                            });
                            next_id += 1;
                        }
                    }
                    if t.is_multiple_of(cluster.checkpoint_every) {
                        record.error_curve.push(ErrorPoint {
                            examples_seen: w as u64 + t,
                            simulated_time: clock,
                            test_error: nodes[node].learner.test_error(test),
                            queries_so_far: queries,
                        });
                    }
                    let n = &mut nodes[node];
                    n.step_scheduled = true;
                    heap.push(Event { time: n.clock, kind: EventKind::Step { node }, id: next_id });
                    next_id += 1;
                }
                // fresh queue empty: go idle; a later delivery reschedules us.
            }
        }
    }

    for n in &nodes {
        debug_assert!(n.buffer.is_empty());
        debug_assert_eq!(n.next_seq, seq_counter);
    }

    record.examples_streamed = global_dequeues;
    record.simulated_time = nodes.iter().map(|n| n.clock).fold(warm_time, f64::max);
    record.error_curve.push(ErrorPoint {
        examples_seen: w as u64 + global_dequeues,
        simulated_time: record.simulated_time,
        test_error: nodes[0].learner.test_error(test),
        queries_so_far: queries,
    });
    record.replica_snapshots = nodes.iter().map(|n| snapshot_bytes(&n.learner)).collect();
    record.final_snapshot = record.replica_snapshots[0].clone();
    record.node_dequeue_times = nodes.into_iter().map(|n| n.dequeue_times).collect();
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_gaussian;
    use crate::engine::{ClusterConfig, LatencyModel, LearnerConfig};
    use crate::learners::SvmConfig;
    use crate::sampling::Rule;

    fn setup(k: usize, seed: u64) -> EngineSetup {
        EngineSetup {
            learner: LearnerConfig::Svm(SvmConfig { gamma: 0.5, ..Default::default() }),
            rule: Rule::Margin { eta: 0.1 },
            cluster: ClusterConfig {
                k,
                batch: k,
                warmstart: 20,
                seed,
                checkpoint_every: 100,
                rates: Vec::new(),
                latency: LatencyModel::Zero,
            },
        }
    }

    #[test]
    fn replicas_agree_after_drain() {
        let train = synth_gaussian(3, 620, 3, 3.0).unwrap();
        let test = synth_gaussian(4, 100, 3, 3.0).unwrap();
        let mut s = setup(4, 13);
        s.cluster.latency = LatencyModel::Uniform { max: 7.5 };
        s.cluster.rates = vec![1.0, 0.5, 2.0, 1.0];
        let rec = run_asynchronous(&s, &train, &test).unwrap();
        assert_eq!(rec.replica_snapshots.len(), 4);
        for snap in &rec.replica_snapshots[1..] {
            assert_eq!(snap, &rec.replica_snapshots[0]);
        }
        assert_eq!(rec.broadcast_count, rec.queries());
        assert_eq!(rec.examples_streamed, 600);
        assert_eq!(rec.query_log.records.len(), 600);
    }

    #[test]
    fn deterministic() {
        let train = synth_gaussian(3, 320, 3, 3.0).unwrap();
        let test = synth_gaussian(4, 100, 3, 3.0).unwrap();
        let mut s = setup(3, 5);
        s.cluster.latency = LatencyModel::Uniform { max: 2.0 };
        let a = run_asynchronous(&s, &train, &test).unwrap();
        let b = run_asynchronous(&s, &train, &test).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn slow_node_processes_fewer_examples() {
        let train = synth_gaussian(9, 4020, 3, 8.0).unwrap();
        let test = synth_gaussian(10, 100, 3, 8.0).unwrap();
        let mut s = setup(2, 21);
        // near-zero sampling rate: sifting dominates, so fetch counts track
        // the rate multipliers almost exactly
        s.rule = Rule::Margin { eta: 1e6 };
        s.cluster.warmstart = 20;
        s.cluster.rates = vec![1.0, 0.5];
        let rec = run_asynchronous(&s, &train, &test).unwrap();
        let fast = rec.node_dequeue_times[0].len() as f64;
        let slow = rec.node_dequeue_times[1].len() as f64;
        assert!(
            (fast / slow - 2.0).abs() < 0.1,
            "fast = {fast}, slow = {slow}"
        );
    }
}
