//! Single-machine baselines: passive (train on everything) and active
//! (sift with the current model, unit delay).

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::rng::substream;
use crate::learners::SiftedExample;
use crate::sampling::{QueryRecord, Rule};

use super::{snapshot_bytes, warmstart, EngineSetup, ErrorPoint, RunRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequentialMode {
    /// Every example trains the model; no scoring.
    Passive,
    /// The configured rule decides, scored against the up-to-date model.
    Active,
}

/// Stream the post-warmstart examples one at a time through a single
/// sifter/updater pair. Passive mode is the `p = 1` constant rule.
pub fn run_sequential(
    setup: &EngineSetup,
    mode: SequentialMode,
    train: &Dataset,
    test: &Dataset,
) -> Result<RunRecord> {
    let cluster = &setup.cluster;
    let w = cluster.warmstart;
    let rule = match mode {
        SequentialMode::Passive => Rule::Constant { p: 1.0 },
        SequentialMode::Active => setup.rule,
    };
    let mode_name = match mode {
        SequentialMode::Passive => "sequential-passive",
        SequentialMode::Active => "sequential-active",
    };

    let config = serde_json::json!({
        "setup": setup,
        "mode": mode_name,
        "train_len": train.len(),
        "test_len": test.len(),
        "dim": train.dim(),
    });
    let mut record = RunRecord::new(config, mode_name);

    let (mut learner, warm_time) = warmstart(setup, train)?;
    record.warmstart_time = warm_time;
    record.simulated_time = warm_time;

    let mut rng = substream(cluster.seed, "node", 0);
    let mut queries = 0u64;
    let total = train.len() - w;

    for t in 1..=total as u64 {
        let index = w + t as usize - 1;
        let score = if rule.needs_score() {
            record.sift_ops += learner.score_cost();
            record.simulated_time += learner.score_cost() as f64;
            learner.score(train.features_of(index))
        } else {
            0.0
        };
        let p = rule.query_probability(score, (w as u64) + t - 1)?;
        let hit = rng.gen_coin(p);
        record.query_log.push(QueryRecord {
            t,
            node: 0,
            queried: hit,
            p,
            delay: 1,
            m: t - 1,
        });
        if hit {
            queries += 1;
            record.broadcast_count += 1;
            let ex = SiftedExample { index, p };
            let ops = learner.update_one(ex.index, train.features_of(ex.index), train.label_of(ex.index), ex.p)?;
            record.update_ops += ops;
            record.simulated_time += ops as f64;
        }
        if t % cluster.checkpoint_every == 0 || t == total as u64 {
            record.error_curve.push(ErrorPoint {
                examples_seen: (w as u64) + t,
                simulated_time: record.simulated_time,
                test_error: learner.test_error(test),
                queries_so_far: queries,
            });
        }
    }

    record.examples_streamed = total as u64;
    record.final_snapshot = snapshot_bytes(&learner);
    Ok(record)
}

/// Tiny trait so the coin draw is one shared expression everywhere.
trait Coin {
    fn gen_coin(&mut self, p: f64) -> bool;
}

impl Coin for rand_chacha::ChaCha8Rng {
    fn gen_coin(&mut self, p: f64) -> bool {
        use rand::Rng;
        self.gen::<f64>() < p
    }
}
