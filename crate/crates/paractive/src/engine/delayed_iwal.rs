//! Delayed importance-weighted active learning over a finite threshold
//! class: the query decision at step `t` uses only the first
//! `m_t = t - tau(t)` consumed examples.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::FiniteClass;
use crate::rng::substream;
use crate::sampling::{iwal_gap, iwal_query_probability, IwalConfig, QueryRecord};

use super::{DelayModel, ErrorPoint, RunRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IwalSetup {
    pub c0: f64,
    pub delay: DelayModel,
    /// Number of evenly spaced thresholds on [0, 1].
    pub thresholds: usize,
    pub seed: u64,
    pub checkpoint_every: u64,
}

/// Run Algorithm 3 over the whole 1-D stream. Every streamed example enters
/// the pending store; the sifting state only consumes an example once the
/// delay process has released it.
pub fn run_delayed_iwal(setup: &IwalSetup, train: &Dataset, test: &Dataset) -> Result<RunRecord> {
    if train.dim() != 1 || test.dim() != 1 {
        return Err(Error::argument("delayed IWAL requires 1-D threshold data"));
    }
    let cfg = IwalConfig::new(setup.c0)?;

    let config = serde_json::json!({
        "setup": setup,
        "train_len": train.len(),
        "test_len": test.len(),
    });
    let mut record = RunRecord::new(config, "delayed-iwal");

    let mut state = FiniteClass::threshold_grid(setup.thresholds);
    // pending store: (x, y, p, queried) for every streamed example, in order
    let mut pending: Vec<(f64, f64, f64, bool)> = Vec::new();
    let mut coin_rng = substream(setup.seed, "node", 0);
    let mut delay_rng = substream(setup.seed, "delay", 0);
    let mut queries = 0u64;
    let mut prev_m = 0u64;
    let total = train.len() as u64;

    for t in 1..=total {
        let m = setup.delay.effective_count(t, prev_m, &mut delay_rng);
        prev_m = m;
        while state.consumed() < m {
            let (x, y, p, queried) = pending[state.consumed() as usize];
            state.consume(x, y, p, queried);
        }

        let index = t as usize - 1;
        let x = train.features_of(index)[0];
        let y = train.label_of(index);
        let gap = iwal_gap(&state, x);
        let p = iwal_query_probability(gap, m, &cfg);
        record.sift_ops += 1;
        let hit = {
            use rand::Rng;
            coin_rng.gen::<f64>() < p
        };
        record.query_log.push(QueryRecord { t, node: 0, queried: hit, p, delay: t - m, m });
        pending.push((x, y, p, hit));
        if hit {
            queries += 1;
            record.update_ops += 1;
        }
        record.simulated_time += 1.0;

        if t % setup.checkpoint_every == 0 || t == total {
            // evaluate the ERM over everything released so far
            let best = state.best();
            let mistakes = (0..test.len())
                .filter(|&i| state.predict(best, test.features_of(i)[0]) != test.label_of(i))
                .count();
            record.error_curve.push(ErrorPoint {
                examples_seen: t,
                simulated_time: record.simulated_time,
                test_error: mistakes as f64 / test.len() as f64,
                queries_so_far: queries,
            });
        }
    }

    record.examples_streamed = total;
    record.broadcast_count = queries;
    record.final_snapshot = super::snapshot_bytes(&crate::learners::LearnerState::Finite(state));
    Ok(record)
}
