//! Output files: CSV tables, a binary container for complex matrices, and the
//! run manifest that lists every file it owns.
//!
//! Matrix container: `<stem>.bin` holds the matrices back to back, each
//! row-major as little-endian `f64` pairs `(re, im)`. `<stem>.json` is the
//! index: one entry per matrix with its name, sample time, shape and byte
//! offset.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
const CONTAINER_FORMAT: &str = "htc-complex-matrices";

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn csv_bytes<S: Serialize>(rows: &[S]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    }
    w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub name: String,
    pub time: f64,
    pub rows: usize,
    pub cols: usize,
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixIndex {
    pub format: String,
    pub version: u32,
    pub data_file: String,
    pub entries: Vec<MatrixEntry>,
}

/// Serializes `(name, time, matrix)` triples; returns the data and index bytes.
pub fn matrix_container(stem: &str, items: &[(String, f64, &Array2<C64>)]) -> (Vec<u8>, Vec<u8>) {
    let mut data = Vec::new();
    let mut entries = Vec::with_capacity(items.len());
    for (name, time, m) in items {
        let (rows, cols) = m.dim();
        entries.push(MatrixEntry { name: name.clone(), time: *time, rows, cols, offset: data.len() as u64 });
        for z in m.iter() {
            data.extend_from_slice(&z.re.to_le_bytes());
            data.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let index = MatrixIndex {
        format: CONTAINER_FORMAT.into(),
        version: 1,
        data_file: format!("{stem}.bin"),
        entries,
    };
    (data, serde_json::to_vec_pretty(&index).expect("index serializes"))
}

pub fn read_matrices(dir: &Path, stem: &str) -> Result<Vec<(MatrixEntry, Array2<C64>)>, CliError> {
    let index_path = dir.join(format!("{stem}.json"));
    let index: MatrixIndex = serde_json::from_slice(
        &fs::read(&index_path).map_err(|e| CliError::Missing(format!("{}: {e}", index_path.display())))?,
    )
    .map_err(|e| CliError::Missing(format!("{}: {e}", index_path.display())))?;
    if index.format != CONTAINER_FORMAT {
        return Err(CliError::Missing(format!("{} is not a matrix index", index_path.display())));
    }
    let data = fs::read(dir.join(&index.data_file))?;
    let mut out = Vec::with_capacity(index.entries.len());
    for e in index.entries {
        let start = e.offset as usize;
        let len = e.rows * e.cols * 16;
        let bytes = data
            .get(start..start + len)
            .ok_or_else(|| CliError::Missing(format!("matrix '{}' runs past the end of the data file", e.name)))?;
        let vals: Vec<C64> = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                C64::new(re, im)
            })
            .collect();
        let m = Array2::from_shape_vec((e.rows, e.cols), vals).expect("length checked");
        out.push((e, m));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    /// `simulate`, `sweep`, `oracle_check` or `figure:<name>`.
    pub kind: String,
    pub tool_version: String,
    pub config_sha256: Option<String>,
    pub engine: Option<String>,
    pub master_seed: Option<u64>,
    pub realization_seeds: Vec<u64>,
    pub workers: usize,
    pub wall_time_s: f64,
    pub diagnostics: serde_json::Value,
    pub outputs: Vec<OutputFile>,
}

/// Collects output files, then writes them and finally the manifest.
pub struct OutputSet {
    dir: PathBuf,
    files: BTreeMap<String, Vec<u8>>,
}

impl OutputSet {
    /// `dir` must be absent or empty.
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        if dir.exists() && fs::read_dir(dir)?.next().is_some() {
            return Err(CliError::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("output directory {} is not empty", dir.display()),
            )));
        }
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    pub fn add_csv<S: Serialize>(&mut self, name: &str, rows: &[S]) -> Result<(), CliError> {
        let bytes = csv_bytes(rows)?;
        self.add(name, bytes);
        Ok(())
    }

    pub fn add_matrices(&mut self, stem: &str, items: &[(String, f64, &Array2<C64>)]) {
        let (data, index) = matrix_container(stem, items);
        self.add(&format!("{stem}.bin"), data);
        self.add(&format!("{stem}.json"), index);
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
        manifest.outputs.clear();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            write_atomic(&path, bytes)?;
            manifest.outputs.push(OutputFile {
                path: name.clone(),
                sha256: hex::encode(Sha256::digest(bytes)),
                bytes: bytes.len() as u64,
            });
        }
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.dir.join(MANIFEST_FILE), &json)?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, CliError> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))
}

/// Result of checking a directory tree against its manifests.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Audit {
    /// Files no manifest lists.
    pub orphans: Vec<PathBuf>,
    /// Files listed by more than one manifest.
    pub shared: Vec<PathBuf>,
    /// Listed files that are absent or whose checksum differs.
    pub broken: Vec<PathBuf>,
}

impl Audit {
    pub fn is_clean(&self) -> bool {
        self.orphans.is_empty() && self.shared.is_empty() && self.broken.is_empty()
    }
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Every file under `root` other than a manifest must be listed by exactly one
/// manifest with a matching checksum.
pub fn audit(root: &Path) -> Result<Audit, CliError> {
    let mut files = Vec::new();
    walk(root, &mut files)?;
    files.sort();
    let mut owners: BTreeMap<PathBuf, usize> = BTreeMap::new();
    let mut audit = Audit::default();
    for m in files.iter().filter(|p| p.file_name().is_some_and(|n| n == MANIFEST_FILE)) {
        let dir = m.parent().expect("file has a parent");
        let manifest = read_manifest(dir)?;
        for o in &manifest.outputs {
            let path = dir.join(&o.path);
            *owners.entry(path.clone()).or_default() += 1;
            match fs::read(&path) {
                Ok(bytes) if hex::encode(Sha256::digest(&bytes)) == o.sha256 => {}
                _ => audit.broken.push(path),
            }
        }
    }
    for f in files.iter().filter(|p| p.file_name().is_some_and(|n| n != MANIFEST_FILE)) {
        match owners.get(f) {
            None => audit.orphans.push(f.clone()),
            Some(&k) if k > 1 => audit.shared.push(f.clone()),
            _ => {}
        }
    }
    Ok(audit)
}
