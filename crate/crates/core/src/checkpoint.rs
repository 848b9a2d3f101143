//! Versioned checkpoint files: a fixed magic and format version, a small
//! header readable on its own, then the full training state. Round-trips are
//! bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::env::CurriculumStage;
use crate::error::CheckpointError;

pub const MAGIC: [u8; 4] = *b"FTBP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub actor_sizes: Vec<usize>,
    pub critic_sizes: Vec<usize>,
    pub estimator_input: usize,
    pub estimator_hidden: usize,
    pub estimator_output: usize,
    /// Fixed exploration standard deviations, physical units.
    pub sigma: Vec<f64>,
    pub iteration: u64,
    pub stage: CurriculumStage,
}

fn io_err(path: &Path, source: std::io::Error) -> CheckpointError {
    CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save<T: Serialize>(
    path: &Path,
    header: &CheckpointHeader,
    state: &T,
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    w.write_all(&MAGIC).map_err(|e| io_err(path, e))?;
    w.write_all(&VERSION.to_le_bytes()).map_err(|e| io_err(path, e))?;
    bincode::serialize_into(&mut w, header).map_err(|e| CheckpointError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    bincode::serialize_into(&mut w, state).map_err(|e| CheckpointError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

fn open_checked(path: &Path) -> Result<BufReader<File>, CheckpointError> {
    let mut r = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let mut version = [0u8; 4];
    r.read_exact(&mut version).map_err(|e| io_err(path, e))?;
    let version = u32::from_le_bytes(version);
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: VERSION,
        });
    }
    Ok(r)
}

/// Read only the header, for `inspect` and version checks.
pub fn read_header(path: &Path) -> Result<CheckpointHeader, CheckpointError> {
    let mut r = open_checked(path)?;
    bincode::deserialize_from(&mut r).map_err(|e| CheckpointError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<(CheckpointHeader, T), CheckpointError> {
    let mut r = open_checked(path)?;
    let header = bincode::deserialize_from(&mut r).map_err(|e| CheckpointError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let state = bincode::deserialize_from(&mut r).map_err(|e| CheckpointError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((header, state))
}
