//! On-disk form of a run: human-readable config echo and CSV traces plus
//! the binary model snapshot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::sampling::fmt_f64;

use super::RunRecord;

pub fn errors_csv(record: &RunRecord) -> String {
    let mut out = String::from("examples_seen,simulated_time,test_error,queries_so_far\n");
    for p in &record.error_curve {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.examples_seen,
            fmt_f64(p.simulated_time),
            fmt_f64(p.test_error),
            p.queries_so_far
        );
    }
    out
}

/// Write `config.json`, `querylog.csv`, `errors.csv` and `model.bin` into
/// `dir`, creating it if needed.
pub fn write_run(record: &RunRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let config = serde_json::json!({
        "mode": record.mode,
        "config": record.config,
        "warmstart_time": record.warmstart_time,
        "simulated_time": record.simulated_time,
        "examples_streamed": record.examples_streamed,
        "queries": record.queries(),
        "broadcast_count": record.broadcast_count,
        "sift_ops": record.sift_ops,
        "update_ops": record.update_ops,
    });
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&config)? + "\n")?;
    fs::write(dir.join("querylog.csv"), record.query_log.to_csv())?;
    fs::write(dir.join("errors.csv"), errors_csv(record))?;
    fs::write(dir.join("model.bin"), &record.final_snapshot)?;
    Ok(())
}
