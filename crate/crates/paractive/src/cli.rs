//! Config file schema and the implementations behind the `run`, `sweep`
//! and `verify` subcommands.

use std::collections::BTreeSet;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    load_idx, make_binary_task, scale_pixels, synth_gaussian, synth_threshold, Dataset, ScaleRange,
};
use crate::engine::{
    persist, run_asynchronous, run_delayed_iwal, run_sequential, run_synchronous, ClusterConfig,
    DelayModel, EngineSetup, IwalSetup, LatencyModel, LearnerConfig, RunRecord, SequentialMode,
};
use crate::error::{Error, Result};
use crate::learners::SvmConfig;
use crate::metrics::{speedup_curve, summary_csv};
use crate::sampling::Rule;

/// Environment variable naming the dataset root for relative IDX paths.
pub const DATA_ROOT_ENV: &str = "PARACTIVE_DATA_ROOT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sync,
    Async,
    SequentialPassive,
    SequentialActive,
    DelayedIwal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Two Gaussian classes; paper-style separable synthetic task.
    SynthGaussian {
        n: usize,
        #[serde(default = "default_test_n")]
        test_n: usize,
        dim: usize,
        separation: f64,
    },
    /// 1-D noisy threshold task for the delayed-IWAL regime.
    SynthThreshold {
        n: usize,
        #[serde(default = "default_test_n")]
        test_n: usize,
        #[serde(default)]
        noise: f64,
    },
    /// IDX image/label pairs, binarized by digit groups.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        positive: Vec<u8>,
        negative: Vec<u8>,
        #[serde(default = "default_scale")]
        scale: ScaleRange,
    },
}

fn default_test_n() -> usize {
    2000
}

fn default_scale() -> ScaleRange {
    ScaleRange::SymmetricOne
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Paper default global batch.
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default = "default_warmstart")]
    pub warmstart: usize,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: u64,
    #[serde(default)]
    pub rates: Vec<f64>,
    #[serde(default)]
    pub latency: LatencyModel,
}

fn default_k() -> usize {
    1
}
fn default_batch() -> usize {
    4000
}
fn default_warmstart() -> usize {
    1000
}
fn default_checkpoint() -> u64 {
    1
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            k: default_k(),
            batch: default_batch(),
            warmstart: default_warmstart(),
            checkpoint_every: default_checkpoint(),
            rates: Vec::new(),
            latency: LatencyModel::Zero,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IwalSpec {
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_delay")]
    pub delay: DelayModel,
    #[serde(default = "default_thresholds")]
    pub thresholds: usize,
}

fn default_c0() -> f64 {
    2.0
}
fn default_delay() -> DelayModel {
    DelayModel::Unit
}
fn default_thresholds() -> usize {
    201
}

impl Default for IwalSpec {
    fn default() -> Self {
        IwalSpec {
            c0: default_c0(),
            delay: default_delay(),
            thresholds: default_thresholds(),
        }
    }
}

fn default_rule() -> Rule {
    // the paper's aggressive parallel setting
    Rule::Margin { eta: 0.1 }
}

fn default_learner() -> LearnerConfig {
    LearnerConfig::Svm(SvmConfig::default())
}

fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub cluster: ClusterSpec,
    #[serde(default = "default_rule")]
    pub rule: Rule,
    #[serde(default = "default_learner")]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub iwal: IwalSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::DelayedIwal {
            if !matches!(self.dataset, DatasetSpec::SynthThreshold { .. }) {
                return Err(Error::Config(
                    "delayed-iwal requires the synth-threshold dataset".to_string(),
                ));
            }
            if self.iwal.thresholds < 2 {
                return Err(Error::Config("iwal.thresholds must be at least 2".to_string()));
            }
        } else if matches!(self.learner, LearnerConfig::FiniteThresholds { .. }) {
            return Err(Error::Config(
                "finite-thresholds learner is only meaningful under delayed-iwal".to_string(),
            ));
        }
        Ok(())
    }

    fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            k: self.cluster.k,
            batch: self.cluster.batch,
            warmstart: self.cluster.warmstart,
            seed: self.seed,
            checkpoint_every: self.cluster.checkpoint_every,
            rates: self.cluster.rates.clone(),
            latency: self.cluster.latency,
        }
    }

    fn engine_setup(&self) -> EngineSetup {
        EngineSetup {
            learner: self.learner,
            rule: self.rule,
            cluster: self.cluster_config(),
        }
    }

    /// Materialize (train, test) datasets; IDX paths resolve against the
    /// dataset-root environment variable when relative.
    pub fn datasets(&self) -> Result<(Dataset, Dataset)> {
        match &self.dataset {
            DatasetSpec::SynthGaussian { n, test_n, dim, separation } => Ok((
                synth_gaussian(self.seed, *n, *dim, *separation)?,
                synth_gaussian(self.seed.wrapping_add(1), *test_n, *dim, *separation)?,
            )),
            DatasetSpec::SynthThreshold { n, test_n, noise } => Ok((
                synth_threshold(self.seed, *n, *noise)?,
                synth_threshold(self.seed.wrapping_add(1), *test_n, 0.0)?,
            )),
            DatasetSpec::Idx { train_images, train_labels, test_images, test_labels, positive, negative, scale } => {
                let train = load_split(train_images, train_labels, positive, negative, *scale)?;
                let test = load_split(test_images, test_labels, positive, negative, *scale)?;
                Ok((train.shuffled(self.seed), test))
            }
        }
    }

    pub fn execute(&self, train: &Dataset, test: &Dataset) -> Result<RunRecord> {
        match self.mode {
            Mode::Sync => run_synchronous(&self.engine_setup(), train, test),
            Mode::Async => run_asynchronous(&self.engine_setup(), train, test),
            Mode::SequentialPassive => {
                run_sequential(&self.engine_setup(), SequentialMode::Passive, train, test)
            }
            Mode::SequentialActive => {
                run_sequential(&self.engine_setup(), SequentialMode::Active, train, test)
            }
            Mode::DelayedIwal => {
                let setup = IwalSetup {
                    c0: self.iwal.c0,
                    delay: self.iwal.delay,
                    thresholds: self.iwal.thresholds,
                    seed: self.seed,
                    checkpoint_every: self.cluster.checkpoint_every,
                };
                run_delayed_iwal(&setup, train, test)
            }
        }
    }
}

pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match env::var_os(DATA_ROOT_ENV) {
        Some(root) => Path::new(&root).join(path),
        None => path.to_path_buf(),
    }
}

fn load_split(
    images: &Path,
    labels: &Path,
    positive: &[u8],
    negative: &[u8],
    scale: ScaleRange,
) -> Result<Dataset> {
    let digits = load_idx(&resolve_data_path(images), &resolve_data_path(labels))?;
    let task = make_binary_task(&digits, positive, negative)?;
    scale_pixels(&task, scale)
}

/// `run` subcommand: execute one engine, write the record, print one line.
pub fn cmd_run(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    let (train, test) = config.datasets()?;
    let record = config.execute(&train, &test)?;
    if let Some(dir) = out.or(config.out.as_deref()) {
        persist::write_run(&record, dir)?;
    }
    let last = record.error_curve.last();
    println!(
        "mode={} examples={} queries={} final_error={} simulated_time={}",
        record.mode,
        record.examples_streamed,
        record.queries(),
        last.map(|p| format!("{:.4}", p.test_error)).unwrap_or_else(|| "n/a".to_string()),
        record.simulated_time,
    );
    Ok(())
}

/// `sweep` subcommand: synchronous runs across a k list plus a sequential
/// passive baseline, summarized as speedup rows.
pub fn cmd_sweep(config: &RunConfig, ks: &[usize], out: Option<&Path>) -> Result<()> {
    if ks.is_empty() {
        return Err(Error::Config("sweep requires a non-empty k list".to_string()));
    }
    let unique: BTreeSet<usize> = ks.iter().copied().collect();
    if unique.len() != ks.len() {
        eprintln!("warning: duplicate k values deduplicated");
    }
    let (train, test) = config.datasets()?;

    let mut passive_cfg = config.clone();
    passive_cfg.mode = Mode::SequentialPassive;
    passive_cfg.cluster.checkpoint_every = config.cluster.batch as u64;
    let passive = passive_cfg.execute(&train, &test)?;

    let mut runs: Vec<(usize, RunRecord)> = Vec::new();
    for &k in &unique {
        let mut cfg = config.clone();
        cfg.mode = Mode::Sync;
        cfg.cluster.k = k;
        match cfg.execute(&train, &test) {
            Ok(rec) => runs.push((k, rec)),
            Err(e) => eprintln!("k = {k} failed: {e}"),
        }
    }
    if runs.is_empty() {
        return Err(Error::Integrity("every sweep run failed".to_string()));
    }

    // default targets: fractions above the best final error seen
    let best_final = runs
        .iter()
        .map(|(_, r)| r.error_curve.last().map(|p| p.test_error).unwrap_or(1.0))
        .fold(1.0f64, f64::min);
    let targets = [best_final + 0.01, best_final + 0.005, best_final + 0.002];
    let borrowed: Vec<(usize, &RunRecord)> = runs.iter().map(|(k, r)| (*k, r)).collect();
    let rows = speedup_curve(&borrowed, &passive, &targets)?;
    let csv = summary_csv(&rows);
    if let Some(dir) = out.or(config.out.as_deref()) {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.csv"), &csv)?;
        for (k, rec) in &runs {
            persist::write_run(rec, &dir.join(format!("k{k}")))?;
        }
        persist::write_run(&passive, &dir.join("passive"))?;
    }
    print!("{csv}");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "sequential-active"

[dataset]
source = "synth-gaussian"
n = 200
test_n = 100
dim = 3
separation = 4.0
"#;

    #[test]
    fn minimal_config_uses_paper_defaults() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.cluster.batch, 4000);
        assert_eq!(cfg.rule, Rule::Margin { eta: 0.1 });
        match cfg.learner {
            LearnerConfig::Svm(svm) => {
                assert_eq!(svm.c, 1.0);
                assert_eq!(svm.gamma, 0.012);
            }
            _ => panic!("default learner should be the svm"),
        }
    }

    #[test]
    fn rejects_unknown_fields_and_bad_combos() {
        assert!(RunConfig::parse("mode = \"sync\"\nbogus = 1\n").is_err());
        let bad = r#"
mode = "delayed-iwal"

[dataset]
source = "synth-gaussian"
n = 10
dim = 2
separation = 1.0
"#;
        assert!(RunConfig::parse(bad).is_err());
        let finite = r#"
mode = "sync"

[dataset]
source = "synth-gaussian"
n = 10
dim = 2
separation = 1.0

[learner]
kind = "finite-thresholds"
count = 11
"#;
        assert!(RunConfig::parse(finite).is_err());
    }

    #[test]
    fn run_and_sweep_end_to_end() {
        let mut cfg = RunConfig::parse(MINIMAL).unwrap();
        cfg.cluster = ClusterSpec {
            k: 1,
            batch: 20,
            warmstart: 20,
            checkpoint_every: 1,
            rates: Vec::new(),
            latency: LatencyModel::Zero,
        };
        cfg.learner = LearnerConfig::Svm(SvmConfig { gamma: 0.5, ..Default::default() });
        let dir = tempfile::tempdir().unwrap();
        cmd_run(&cfg, Some(dir.path())).unwrap();
        assert!(dir.path().join("querylog.csv").exists());

        let sweep_dir = tempfile::tempdir().unwrap();
        cmd_sweep(&cfg, &[1, 2, 2], Some(sweep_dir.path())).unwrap();
        let summary = fs::read_to_string(sweep_dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with("k,target_error,time,speedup_vs_passive,speedup_vs_active1\n"));
        assert!(sweep_dir.path().join("k2").join("errors.csv").exists());
        assert!(sweep_dir.path().join("passive").join("config.json").exists());
    }

    #[test]
    fn delayed_iwal_config_runs() {
        let text = r#"
mode = "delayed-iwal"
seed = 9

[dataset]
source = "synth-threshold"
n = 400
test_n = 100
noise = 0.05

[cluster]
checkpoint_every = 100

[iwal]
c0 = 2.0
thresholds = 51
delay = { kind = "fixed-batch", b = 20 }
"#;
        let cfg = RunConfig::parse(text).unwrap();
        let (train, test) = cfg.datasets().unwrap();
        let rec = cfg.execute(&train, &test).unwrap();
        assert_eq!(rec.examples_streamed, 400);
        assert!(rec.query_log.records.iter().all(|r| r.m % 20 == 0));
    }
}
