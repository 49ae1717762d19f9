use std::fs::File;
use std::path::Path;

use bicl_core::MetricsRecord;

use crate::error::{CliError, Result};

pub const METRICS_HEADER: [&str; 9] = [
    "episode",
    "c_k",
    "train_return",
    "rl_reward",
    "t_reward",
    "r_gap",
    "il_loss",
    "value_loss",
    "wall_ms",
];

/// Shortest decimal that round-trips `x` rounded to 6 significant digits.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    if rounded == 0.0 {
        "0".into()
    } else {
        rounded.to_string()
    }
}

pub(crate) fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file))
}

pub(crate) fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_metrics_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(METRICS_HEADER).map_err(&err)?;
    for r in records {
        w.write_record([
            r.episode.to_string(),
            sig6(r.c_k),
            sig6(r.train_return),
            sig6(r.rl_reward),
            sig6(r.t_reward),
            sig6(r.r_gap),
            sig6(r.il_loss),
            sig6(r.value_loss),
            r.wall_ms.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
