use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Write through a temporary file in the target directory and rename it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    body: T,
}

pub fn to_cbor<T: Serialize>(format: &str, body: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    ciborium::into_writer(
        &Envelope {
            format: format.to_string(),
            version: 1,
            body,
        },
        &mut out,
    )
    .map_err(|e| Error::Artifact(e.to_string()))?;
    Ok(out)
}

pub fn from_cbor<T: DeserializeOwned>(format: &str, bytes: &[u8]) -> Result<T> {
    let env: Envelope<T> =
        ciborium::from_reader(bytes).map_err(|e| Error::Artifact(e.to_string()))?;
    if env.format != format || env.version != 1 {
        return Err(Error::Artifact(format!(
            "expected {format} v1, found {} v{}",
            env.format, env.version
        )));
    }
    Ok(env.body)
}

/// Record of one command run: what it read and what it wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Output directory of a run. Artifact paths are relative to `root`.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn manifest_path(command: &str) -> String {
        format!("manifests/{command}.json")
    }

    /// Manifest of an upstream command, or `MissingArtifact` naming it.
    pub fn require(&self, command: &str) -> Result<Manifest> {
        let rel = Self::manifest_path(command);
        let path = self.path(&rel);
        if !path.exists() {
            return Err(Error::MissingArtifact {
                path: path.display().to_string(),
                producer: command.to_string(),
            });
        }
        let m: Manifest = serde_json::from_slice(&fs::read(&path)?)
            .map_err(|e| Error::Artifact(format!("{rel}: {e}")))?;
        for out in m.outputs.keys() {
            if !self.path(out).exists() {
                return Err(Error::MissingArtifact {
                    path: self.path(out).display().to_string(),
                    producer: command.to_string(),
                });
            }
        }
        Ok(m)
    }

    pub fn read(&self, rel: &str, producer: &str) -> Result<Vec<u8>> {
        let path = self.path(rel);
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingArtifact {
                path: path.display().to_string(),
                producer: producer.to_string(),
            },
            _ => Error::Io(e),
        })
    }
}

/// Collects the outputs of one command and finally writes its manifest.
pub struct Recorder<'a> {
    ws: &'a Workspace,
    command: String,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
}

impl<'a> Recorder<'a> {
    pub fn new(ws: &'a Workspace, command: &str) -> Self {
        Self {
            ws,
            command: command.to_string(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Record the outputs of an upstream manifest as inputs.
    pub fn inputs_from(&mut self, upstream: &Manifest) {
        self.inputs
            .extend(upstream.outputs.iter().map(|(k, v)| (k.clone(), v.clone())));
    }

    /// Record an input that lives outside the workspace.
    pub fn external_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.ws.path(rel), bytes)?;
        self.outputs
            .insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn finish(self, config_hash: &str, seed: u64) -> Result<Manifest> {
        let m = Manifest {
            command: self.command.clone(),
            config_hash: config_hash.to_string(),
            seed,
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let mut json = serde_json::to_vec_pretty(&m).expect("manifest serializes");
        json.push(b'\n');
        write_atomic(
            &self.ws.path(&Workspace::manifest_path(&self.command)),
            &json,
        )?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cbor_envelope_checks_format() {
        let bytes = to_cbor("a", &vec![1.5f64, 2.0]).unwrap();
        let back: Vec<f64> = from_cbor("a", &bytes).unwrap();
        assert_eq!(back, vec![1.5, 2.0]);
        assert!(from_cbor::<Vec<f64>>("b", &bytes).is_err());
    }

    #[test]
    fn missing_upstream_names_producer() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::new(dir.path());
        match ws.require("fit") {
            Err(Error::MissingArtifact { producer, .. }) => assert_eq!(producer, "fit"),
            other => panic!("{other:?}"),
        }
        let mut r = Recorder::new(&ws, "fit");
        r.write("models/x.bin", b"abc").unwrap();
        r.finish("h", 1).unwrap();
        assert_eq!(ws.require("fit").unwrap().outputs.len(), 1);
        fs::remove_file(ws.path("models/x.bin")).unwrap();
        assert!(matches!(
            ws.require("fit"),
            Err(Error::MissingArtifact { .. })
        ));
    }
}
