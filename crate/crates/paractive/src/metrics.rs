//! Cost accounting, speedup tables, theoretical bound calculators and a
//! Monte-Carlo disagreement-coefficient estimator.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{DelayModel, RunRecord};
use crate::error::{Error, Result};
use crate::learners::FiniteClass;
use crate::rng::substream;
use crate::sampling::fmt_f64;

/// Operation/time/communication tabulation for one run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    /// Examples streamed past the warmstart prefix.
    pub n: u64,
    /// Selected (queried) count, the paper's phi(n).
    pub selected: u64,
    pub sift_ops: u64,
    pub update_ops: u64,
    pub broadcasts: u64,
    /// All work on one machine: total sift ops + total update ops.
    pub sequential_time: f64,
    /// The engine's simulated clock for this trace.
    pub parallel_time: f64,
}

pub fn cost_summary(record: &RunRecord) -> Result<CostSummary> {
    if record.examples_streamed == 0 || record.final_snapshot.is_empty() {
        return Err(Error::Integrity("incomplete run record".to_string()));
    }
    let selected = record.queries();
    if record.query_log.records.len() as u64 != record.examples_streamed {
        return Err(Error::Integrity("query log does not cover the stream".to_string()));
    }
    Ok(CostSummary {
        n: record.examples_streamed,
        selected,
        sift_ops: record.sift_ops,
        update_ops: record.update_ops,
        broadcasts: record.broadcast_count,
        sequential_time: record.warmstart_time + (record.sift_ops + record.update_ops) as f64,
        parallel_time: record.simulated_time,
    })
}

/// First checkpoint at or below `target`; `None` when never reached.
pub fn time_to_error(record: &RunRecord, target: f64) -> Option<f64> {
    record
        .error_curve
        .iter()
        .find(|p| p.test_error <= target)
        .map(|p| p.simulated_time)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub k: usize,
    pub target_error: f64,
    /// `None` marks an unreachable target, not an error.
    pub time: Option<f64>,
    pub speedup_vs_passive: Option<f64>,
    pub speedup_vs_active1: Option<f64>,
}

/// Speedup table over a k-sweep of active runs against a shared passive
/// baseline; the k=1 entry of the sweep is the active baseline.
pub fn speedup_curve(
    runs: &[(usize, &RunRecord)],
    passive: &RunRecord,
    targets: &[f64],
) -> Result<Vec<SpeedupRow>> {
    if runs.is_empty() || targets.is_empty() {
        return Err(Error::argument("need at least one run and one target error"));
    }
    let active1 = runs.iter().find(|(k, _)| *k == 1).map(|(_, r)| *r);
    let mut rows = Vec::new();
    for &target in targets {
        let passive_time = time_to_error(passive, target);
        let active1_time = active1.and_then(|r| time_to_error(r, target));
        for &(k, record) in runs {
            let time = time_to_error(record, target);
            rows.push(SpeedupRow {
                k,
                target_error: target,
                time,
                speedup_vs_passive: match (passive_time, time) {
                    (Some(b), Some(t)) if t > 0.0 => Some(b / t),
                    _ => None,
                },
                speedup_vs_active1: match (active1_time, time) {
                    (Some(b), Some(t)) if t > 0.0 => Some(b / t),
                    _ => None,
                },
            });
        }
    }
    Ok(rows)
}

pub fn summary_csv(rows: &[SpeedupRow]) -> String {
    let mut out = String::from("k,target_error,time,speedup_vs_passive,speedup_vs_active1\n");
    let cell = |v: Option<f64>| v.map(fmt_f64).unwrap_or_else(|| "unreachable".to_string());
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.k,
            fmt_f64(r.target_error),
            cell(r.time),
            cell(r.speedup_vs_passive),
            cell(r.speedup_vs_active1)
        );
    }
    out
}

/// `epsilon_m = C0 log(m+1)/m`.
pub fn epsilon_of(m: u64, c0: f64) -> f64 {
    c0 * ((m as f64) + 1.0).ln() / m as f64
}

/// Excess-risk bound `sqrt(2 eps_m) + 2 eps_m` with `eps_m = C0 log(m+1)/m`.
pub fn generalization_bound(m: u64, c0: f64) -> Result<f64> {
    if m < 1 {
        return Err(Error::argument("generalization bound requires m >= 1"));
    }
    let eps = epsilon_of(m, c0);
    Ok((2.0 * eps).sqrt() + 2.0 * eps)
}

/// Label-complexity bound evaluated over an explicit `m_s` sequence
/// (s = 1..t): `1 + 2 theta err* m_t + theta * sum_s sqrt(eps_s) + eps_s`,
/// with `m_s` floored at 1 inside the summand and implied constant 1.
pub fn label_complexity_over(ms: &[u64], theta: f64, err_star: f64, c0: f64) -> Result<f64> {
    if ms.is_empty() {
        return Err(Error::argument("empty m sequence"));
    }
    if theta <= 0.0 || !(0.0..=1.0).contains(&err_star) {
        return Err(Error::argument("need theta > 0 and err_star in [0,1]"));
    }
    let m_t = *ms.last().unwrap();
    let mut sum = 0.0;
    for &m in ms {
        let eps = epsilon_of(m.max(1), c0);
        sum += eps.sqrt() + eps;
    }
    Ok(1.0 + 2.0 * theta * err_star * m_t as f64 + theta * sum)
}

/// Bound value flagged as indicative: the paper's O(.) carries an
/// unspecified constant, reported here as 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub m: u64,
    pub epsilon: f64,
    pub excess_risk_bound: f64,
    pub label_complexity_bound: f64,
    pub theta: f64,
    pub indicative: bool,
}

/// Full report for horizon `t` under a deterministic delay model.
/// `RandomBounded` is evaluated at its worst case (`m_s = s - cap`).
pub fn bound_report(
    t: u64,
    delay: &DelayModel,
    theta: f64,
    err_star: f64,
    c0: f64,
) -> Result<BoundReport> {
    if t < 1 {
        return Err(Error::argument("horizon t must be >= 1"));
    }
    let ms: Vec<u64> = (1..=t).map(|s| deterministic_m(delay, s)).collect();
    let m_t = *ms.last().unwrap();
    Ok(BoundReport {
        m: m_t,
        epsilon: epsilon_of(m_t.max(1), c0),
        excess_risk_bound: generalization_bound(m_t.max(1), c0)?,
        label_complexity_bound: label_complexity_over(&ms, theta, err_star, c0)?,
        theta,
        indicative: true,
    })
}

fn deterministic_m(delay: &DelayModel, s: u64) -> u64 {
    match *delay {
        DelayModel::Unit => s - 1,
        DelayModel::FixedBatch { b } => (s - 1) / b * b,
        DelayModel::RandomBounded { cap, .. } => s.saturating_sub(cap.max(1)),
    }
}

/// Default log-spaced radius grid 2^-1 .. 2^-10.
pub fn default_r_grid() -> Vec<f64> {
    (1..=10).map(|i| 0.5f64.powi(i)).collect()
}

/// Monte-Carlo estimate of the disagreement coefficient
/// `sup_r P(X in DIS(h*, r)) / r` for a threshold class under the uniform
/// marginal on [0, 1]. Hypothesis distances are analytic
/// (`P(h != h*) = |theta_h - theta*|`); DIS membership per draw is exact.
pub fn estimate_disagreement_coefficient(
    class: &FiniteClass,
    h_star: usize,
    r_grid: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if r_grid.is_empty() {
        return Err(Error::argument("empty radius grid"));
    }
    if r_grid.iter().any(|r| !(0.0 < *r && *r <= 1.0)) {
        return Err(Error::argument("radii must lie in (0, 1]"));
    }
    let star = class.thresholds()[h_star];
    let mut sorted: Vec<f64> = class.thresholds().to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut rng = substream(seed, "theta-mc", 0);
    let draws: Vec<f64> = (0..n_mc).map(|_| rng.gen::<f64>()).collect();

    let mut theta_hat = 0.0f64;
    for &r in r_grid {
        let hits = draws
            .iter()
            .filter(|&&x| in_disagreement_region(&sorted, star, r, x))
            .count();
        theta_hat = theta_hat.max(hits as f64 / n_mc as f64 / r);
    }
    Ok(theta_hat)
}

/// Is some hypothesis within distance `r` of `star` that disagrees at `x`?
/// Disagreement at `x` means the threshold falls on the other side of `x`.
fn in_disagreement_region(sorted: &[f64], star: f64, r: f64, x: f64) -> bool {
    if x >= star {
        // need a threshold in (x, star + r]
        let lo = sorted.partition_point(|&th| th <= x);
        lo < sorted.len() && sorted[lo] <= star + r
    } else {
        // need a threshold in [star - r, x]
        let hi = sorted.partition_point(|&th| th <= x);
        hi > 0 && sorted[hi - 1] >= star - r
    }
}
