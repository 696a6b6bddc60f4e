use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::chain::{Mps, SiteKind};
use super::tebd::MpsEngine;
use super::{EvolutionConfig, MpsError, MpsResult};
use crate::model::{build_terms, DisorderRealization, HtcParams};

const FORMAT_VERSION: u32 = 1;
const MANIFEST_FILE: &str = "manifest.json";
const TENSOR_FILE: &str = "tensors.bin";

/// JSON side of a checkpoint. Tensor data lives next to it as little-endian
/// `(re, im)` f64 pairs in site order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub params: HtcParams,
    pub params_digest: String,
    pub realization: DisorderRealization,
    pub time: f64,
    pub steps: usize,
    pub dt: f64,
    pub truncation_weight: f64,
    pub kinds: Vec<SiteKind>,
    pub local_charges: Vec<Vec<i32>>,
    pub bond_charges: Vec<Vec<i32>>,
    pub shapes: Vec<[usize; 3]>,
    pub center: usize,
    pub tensor_sha256: String,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> MpsResult<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes the engine state into `dir`, creating it if needed. The manifest is
/// written last so a directory without one is an incomplete checkpoint.
pub fn save_checkpoint(engine: &MpsEngine, realization: &DisorderRealization, dir: &Path) -> MpsResult<CheckpointManifest> {
    fs::create_dir_all(dir)?;
    let state = engine.state();
    let mut bytes = Vec::new();
    for t in &state.tensors {
        for z in t.iter() {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let params = engine.terms().params.clone();
    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        params_digest: params.digest(),
        params,
        realization: realization.clone(),
        time: engine.time(),
        steps: engine.steps(),
        dt: engine.config().dt,
        truncation_weight: engine.truncation_weight(),
        kinds: state.kinds.clone(),
        local_charges: state.local_charges.clone(),
        bond_charges: state.bonds.clone(),
        shapes: state.tensors.iter().map(|t| { let (a, b, c) = t.dim(); [a, b, c] }).collect(),
        center: state.center,
        tensor_sha256: hex::encode(Sha256::digest(&bytes)),
    };
    write_atomic(&dir.join(TENSOR_FILE), &bytes)?;
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| MpsError::Checkpoint(e.to_string()))?;
    write_atomic(&dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

fn read_state(manifest: &CheckpointManifest, bytes: &[u8]) -> MpsResult<Mps> {
    let n = manifest.kinds.len();
    if manifest.local_charges.len() != n || manifest.shapes.len() != n || manifest.bond_charges.len() != n + 1 {
        return Err(MpsError::Checkpoint("site lists have inconsistent lengths".into()));
    }
    let expected: usize = manifest.shapes.iter().map(|s| s[0] * s[1] * s[2] * 16).sum();
    if bytes.len() != expected {
        return Err(MpsError::Checkpoint(format!("tensor file has {} bytes, expected {expected}", bytes.len())));
    }
    let mut tensors = Vec::with_capacity(n);
    let mut chunks = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    for (j, &[a, b, c]) in manifest.shapes.iter().enumerate() {
        if manifest.bond_charges[j].len() != a || manifest.bond_charges[j + 1].len() != c || manifest.local_charges[j].len() != b {
            return Err(MpsError::Checkpoint(format!("site {j}: shape does not match its charges")));
        }
        let data: Vec<C64> = (0..a * b * c)
            .map(|_| {
                let re = chunks.next().expect("length checked");
                let im = chunks.next().expect("length checked");
                C64::new(re, im)
            })
            .collect();
        tensors.push(Array3::from_shape_vec((a, b, c), data).map_err(|e| MpsError::Checkpoint(e.to_string()))?);
    }
    if manifest.center >= n {
        return Err(MpsError::Checkpoint(format!("center {} outside chain of {n}", manifest.center)));
    }
    Ok(Mps {
        kinds: manifest.kinds.clone(),
        local_charges: manifest.local_charges.clone(),
        tensors,
        bonds: manifest.bond_charges.clone(),
        center: manifest.center,
    })
}

/// Restores an engine from `dir`. `config.dt` must match the saved step.
pub fn load_checkpoint(dir: &Path, config: EvolutionConfig) -> MpsResult<(CheckpointManifest, MpsEngine)> {
    let json = fs::read(dir.join(MANIFEST_FILE))?;
    let manifest: CheckpointManifest =
        serde_json::from_slice(&json).map_err(|e| MpsError::Checkpoint(e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(MpsError::Checkpoint(format!("unsupported format version {}", manifest.format_version)));
    }
    if manifest.params.digest() != manifest.params_digest {
        return Err(MpsError::Checkpoint("parameter digest mismatch".into()));
    }
    if (manifest.dt - config.dt).abs() > 1e-12 * manifest.dt.abs() {
        return Err(MpsError::Checkpoint(format!("saved dt {} differs from requested {}", manifest.dt, config.dt)));
    }
    let bytes = fs::read(dir.join(TENSOR_FILE))?;
    if hex::encode(Sha256::digest(&bytes)) != manifest.tensor_sha256 {
        return Err(MpsError::Checkpoint("tensor data checksum mismatch".into()));
    }
    let state = read_state(&manifest, &bytes)?;
    let terms = build_terms(&manifest.params, &manifest.realization)?;
    let engine = MpsEngine::resume(terms, state, config, manifest.time, manifest.steps, manifest.truncation_weight)?;
    Ok((manifest, engine))
}
