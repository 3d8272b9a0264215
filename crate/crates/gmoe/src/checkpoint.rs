//! Binary checkpoint:
//!
//! ```text
//! "GMOE" | u32 LE version | u64 LE header length | header JSON | f64 LE blobs
//! ```
//!
//! The header carries the architecture config, the standardizer and a hash
//! of the feature layout. Blobs follow the model's parameter order.

use std::path::{Path, PathBuf};

use gmoe_core::layers::Standardizer;
use gmoe_core::model::{init_baseline, init_gmoe, AnyModel, FeatureLayout};
use gmoe_core::train::ArchConfig;
use gmoe_core::SeededRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fsutil::write_bytes_atomic;

pub const MAGIC: &[u8; 4] = b"GMOE";
pub const VERSION: u32 = 1;
const PREAMBLE: usize = 4 + 4 + 8;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated checkpoint: need {need} bytes, have {have}")]
    Truncated { need: u64, have: u64 },
    #[error("invalid checkpoint header: {0}")]
    InvalidHeader(String),
    #[error("parameter size mismatch: config implies {expected} values, file holds {found}")]
    SizeMismatch { expected: u64, found: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub model: ArchConfig,
    pub standardizer: Standardizer,
    pub layout_hash: String,
    pub blocks: Vec<BlockInfo>,
}

/// SHA-256 of the canonical JSON of a feature layout, hex encoded.
pub fn layout_hash(layout: &FeatureLayout) -> String {
    let json = serde_json::to_vec(layout).expect("layout serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn arch_config(model: &AnyModel) -> ArchConfig {
    match model {
        AnyModel::Gmoe(m) => ArchConfig::Gmoe(m.config.clone()),
        AnyModel::Baseline(m) => ArchConfig::Baseline(m.config.clone()),
    }
}

pub fn encode(model: &AnyModel) -> Vec<u8> {
    let refs = model.param_refs();
    let header = Header {
        model: arch_config(model),
        standardizer: model.standardizer().clone(),
        layout_hash: layout_hash(&model.task().layout),
        blocks: refs
            .iter()
            .map(|p| BlockInfo {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + 8 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in &refs {
        for v in p.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn need(bytes: &[u8], n: u64) -> Result<(), CheckpointError> {
    if (bytes.len() as u64) < n {
        return Err(CheckpointError::Truncated {
            need: n,
            have: bytes.len() as u64,
        });
    }
    Ok(())
}

/// Parses the preamble and header without touching the blobs.
pub fn decode_header(bytes: &[u8]) -> Result<(Header, usize), CheckpointError> {
    need(bytes, 4)?;
    if &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    need(bytes, 8)?;
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    need(bytes, PREAMBLE as u64)?;
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let end = (PREAMBLE as u64).saturating_add(len);
    need(bytes, end)?;
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..end as usize])
        .map_err(|e| CheckpointError::InvalidHeader(e.to_string()))?;
    Ok((header, end as usize))
}

pub fn decode(bytes: &[u8]) -> Result<AnyModel, CheckpointError> {
    let (header, start) = decode_header(bytes)?;
    let invalid = |e: gmoe_core::Error| CheckpointError::InvalidHeader(e.to_string());
    // The initial values are overwritten below; the seed is irrelevant.
    let mut rng = SeededRng::new(0);
    let mut model = match &header.model {
        ArchConfig::Gmoe(c) => AnyModel::Gmoe(init_gmoe(c.clone(), &mut rng).map_err(invalid)?),
        ArchConfig::Baseline(c) => AnyModel::Baseline(init_baseline(c.clone(), &mut rng).map_err(invalid)?),
    };
    let blob = &bytes[start..];
    let expected = model.param_count() as u64;
    if blob.len() % 8 != 0 || blob.len() as u64 / 8 != expected {
        return Err(CheckpointError::SizeMismatch {
            expected,
            found: blob.len() as u64 / 8,
        });
    }
    {
        let refs = model.param_refs();
        let declared = header.blocks.len() == refs.len()
            && header.blocks.iter().zip(&refs).all(|(b, r)| b.name == r.name && b.shape == r.tensor.shape());
        if !declared {
            return Err(CheckpointError::InvalidHeader("parameter blocks disagree with the config".into()));
        }
    }
    if header.standardizer.width() != model.task().feature_width() {
        return Err(CheckpointError::InvalidHeader("standardizer width disagrees with the config".into()));
    }
    if header.layout_hash != layout_hash(&model.task().layout) {
        return Err(CheckpointError::InvalidHeader("layout hash disagrees with the config".into()));
    }
    let mut values = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for t in model.tensors_mut() {
        for v in t.data_mut() {
            *v = values.next().expect("length checked");
        }
    }
    match &mut model {
        AnyModel::Gmoe(m) => m.standardizer = header.standardizer,
        AnyModel::Baseline(m) => m.standardizer = header.standardizer,
    }
    Ok(model)
}

pub fn save_checkpoint(model: &AnyModel, path: &Path) -> Result<(), CheckpointError> {
    write_bytes_atomic(path, &encode(model)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<AnyModel, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

/// Reads only the preamble and header of a checkpoint file.
pub fn read_header(path: &Path) -> Result<Header, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_header(&bytes).map(|(h, _)| h)
}
