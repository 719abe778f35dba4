use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ieca::{Error, Result};
use sha2::{Digest, Sha256};

pub const INTERFACE_VERSION: &str = "1.0";

/// Key/value block written as `# key: value` lines at the top of every CSV
/// artifact and as a `provenance` object in JSON artifacts. Contains no
/// timestamps, so identical invocations give identical files.
#[derive(Debug, Clone, Default)]
pub struct Provenance(BTreeMap<String, String>);

impl Provenance {
    pub fn new(command: &str) -> Self {
        let mut p = Self::default();
        p.set("tool", format!("ieca {}", env!("CARGO_PKG_VERSION")));
        p.set("interface", INTERFACE_VERSION);
        p.set("command", command);
        p
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string().replace('\n', " "));
    }

    /// Records the path and SHA-256 digest of an input file.
    pub fn input(&mut self, key: &str, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.set(key, path.display());
        self.set(&format!("{key}_sha256"), hex::encode(Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn header(&self) -> String {
        self.0.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }

    pub fn into_map(self) -> BTreeMap<String, String> {
        self.0
    }
}

pub fn write_with_header(path: &Path, prov: &Provenance, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, prov.header() + body).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
