//! Versioned, checksummed training-state container.
//!
//! ```text
//! 0   magic "SNNCKPT\0"
//! 8   u32 LE format version
//! 12  u64 LE payload length
//! 20  32-byte SHA-256 of the payload
//! 52  bincode payload (TrainingState)
//! ```
//!
//! Saving writes a sibling temporary file and renames it into place, so an
//! interrupted save never leaves a torn checkpoint behind.

use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::EpochMetrics;
use crate::constraint::SynapseBounds;
use crate::error::{io_err, Result, SnnError};
use crate::mask::StructureMask;
use crate::network::NetworkSpec;
use crate::optim::Adam;
use crate::params::Parameters;
use crate::pruning::PruneSchedule;
use crate::regeneration::RegenState;

pub const CHECKPOINT_MAGIC: [u8; 8] = *b"SNNCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 32;

/// Everything needed to continue a run bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    /// Resolved config the run was started with.
    pub config_text: String,
    pub spec: NetworkSpec,
    /// Completed epochs.
    pub epoch: usize,
    pub params: Parameters,
    /// Weights as they entered the current epoch; the constraint's decay
    /// streak compares against them.
    pub prev_weights: Parameters,
    pub bounds: SynapseBounds,
    pub mask: StructureMask,
    pub schedule: PruneSchedule,
    pub regen: RegenState,
    pub optimizer: Adam,
    pub rng: ChaCha8Rng,
    pub metrics: Vec<EpochMetrics>,
}

fn refuse(msg: impl Into<String>) -> SnnError {
    SnnError::Checkpoint(msg.into())
}

pub fn checkpoint_save(state: &TrainingState, path: &Path) -> Result<()> {
    let payload = bincode::serialize(state).map_err(|e| refuse(format!("serialize: {e}")))?;
    let mut bytes = Vec::with_capacity(HEADER_LEN + payload.len());
    bytes.extend(CHECKPOINT_MAGIC);
    bytes.extend(CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend((payload.len() as u64).to_le_bytes());
    bytes.extend(Sha256::digest(&payload));
    bytes.extend(payload);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn checkpoint_load(path: &Path) -> Result<TrainingState> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < HEADER_LEN {
        return Err(refuse(format!("{}: truncated header ({} bytes)", path.display(), bytes.len())));
    }
    if bytes[..8] != CHECKPOINT_MAGIC {
        return Err(refuse(format!("{}: not a checkpoint file", path.display())));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(refuse(format!(
            "{}: format version {version}, this build reads {CHECKPOINT_VERSION}",
            path.display()
        )));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let payload = &bytes[HEADER_LEN..];
    if payload.len() as u64 != len {
        return Err(refuse(format!(
            "{}: payload is {} bytes, header says {len}",
            path.display(),
            payload.len()
        )));
    }
    if Sha256::digest(payload).as_slice() != &bytes[20..52] {
        return Err(refuse(format!("{}: checksum mismatch", path.display())));
    }
    bincode::deserialize(payload).map_err(|e| refuse(format!("{}: {e}", path.display())))
}
