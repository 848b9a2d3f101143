//! Per-step episode records, written as JSONL for offline analysis.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub t: f64,
    pub phi: f64,
    pub v_cmd: [f64; 3],
    /// Base velocity observation layout: vx, vz, pitch rate.
    pub v_base: [f64; 3],
    pub fz: [f64; 2],
    pub reward_total: f64,
    pub fault_active: bool,
    pub label: Vec<f64>,
    pub est_p: Vec<f64>,
    pub est_s: Vec<f64>,
}

pub fn write_jsonl(path: &Path, records: &[EpisodeRecord]) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}
