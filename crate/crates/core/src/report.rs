//! CSV and JSON emitters. Every output carries a header block (CSV comments /
//! JSON fields) recording the config hash, the seed and the crate version, and
//! all floats are written with 17 significant digits so serial reruns are
//! byte-identical.

use crate::error::Result;
use crate::fbm::ScalarFbmPath;
use crate::solver::{HistoryPath, MomentTable};
use crate::stability::DecayFit;
use serde::Serialize;
use std::io::Write;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct RunHeader {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl RunHeader {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        RunHeader {
            config_hash: config_hash.into(),
            seed,
            version: VERSION.to_string(),
        }
    }

    fn write_csv_comments(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "# config_hash: {}", self.config_hash)?;
        writeln!(w, "# seed: {}", self.seed)?;
        writeln!(w, "# version: {}", self.version)?;
        Ok(())
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// `t,mean_sq,std_err,n_paths` rows, one per uniform grid node.
pub fn write_moment_csv(w: &mut impl Write, table: &MomentTable, header: &RunHeader) -> Result<()> {
    header.write_csv_comments(w)?;
    writeln!(w, "t,mean_sq,std_err,n_paths")?;
    for j in 0..table.times.len() {
        writeln!(
            w,
            "{},{},{},{}",
            fmt(table.times[j]),
            fmt(table.mean_sq[j]),
            fmt(table.std_err[j]),
            table.n_paths
        )?;
    }
    Ok(())
}

/// `path_id,t,value` rows, one per node per path.
pub fn write_ensemble_csv(
    w: &mut impl Write,
    paths: &[ScalarFbmPath],
    header: &RunHeader,
) -> Result<()> {
    header.write_csv_comments(w)?;
    writeln!(w, "path_id,t,value")?;
    for (id, path) in paths.iter().enumerate() {
        for (j, v) in path.values.iter().enumerate() {
            writeln!(w, "{},{},{}", id, fmt(path.grid.node(j)), fmt(*v))?;
        }
    }
    Ok(())
}

/// `t,mode,value,is_left_limit` rows; jump nodes emit their left limit first.
pub fn write_path_csv(w: &mut impl Write, path: &HistoryPath, header: &RunHeader) -> Result<()> {
    header.write_csv_comments(w)?;
    writeln!(w, "t,mode,value,is_left_limit")?;
    for i in 0..path.n_nodes() {
        let t = path.time(i);
        if path.is_jump_node(i) {
            for (k, v) in path.left_limit(i).iter().enumerate() {
                writeln!(w, "{},{},{},1", fmt(t), k, fmt(*v))?;
            }
        }
        for (k, v) in path.state(i).iter().enumerate() {
            writeln!(w, "{},{},{},0", fmt(t), k, fmt(*v))?;
        }
    }
    Ok(())
}

/// Decay-fit report written by `simulate`; a fit failure is recorded in the
/// report instead of failing the run.
#[derive(Debug, Clone, Serialize)]
pub struct DecayFitReport {
    #[serde(flatten)]
    pub header: RunHeader,
    pub fit: Option<DecayFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
}

/// Serializes a report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(w: &mut impl Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)
        .map_err(|e| crate::error::Error::numerical(format!("json serialization: {e}")))?;
    writeln!(w)?;
    Ok(())
}
