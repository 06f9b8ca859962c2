//! Artifact writing and the per-command manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Serialize)]
struct InputRecord {
    role: String,
    path: String,
    sha256: String,
    bytes: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a C,
    inputs: &'a [InputRecord],
    outputs: &'a [String],
}

/// Collects written files and hashed inputs for one command run.
pub struct Artifacts {
    dir: PathBuf,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Domain(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), Failure> {
        let (sha256, bytes) = sha256_file(path)?;
        self.inputs.push(InputRecord {
            role: role.into(),
            path: path.display().to_string(),
            sha256,
            bytes,
        });
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", p.display())))?;
        self.outputs.push(name.into());
        Ok(p)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, Failure> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Domain(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf, Failure>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Failure::Domain(e.to_string());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r.into_iter().collect::<Vec<_>>()).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Domain(e.to_string()))?;
        self.write(name, &String::from_utf8_lossy(&bytes))
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        self.write(name, contents)
    }

    /// Writes `<command>.manifest.json`. No timestamps or thread counts,
    /// so repeated runs produce identical bytes.
    pub fn finish<C: Serialize>(self, command: &str, seed: u64, config: &C) -> Result<(), Failure> {
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut s = serde_json::to_string_pretty(&m).map_err(|e| Failure::Domain(e.to_string()))?;
        s.push('\n');
        let p = self.dir.join(format!("{command}.manifest.json"));
        fs::write(&p, s).map_err(|e| Failure::Domain(format!("cannot write {}: {e}", p.display())))
    }
}
