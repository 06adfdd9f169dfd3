use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::cache::sha256_hex;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub stage: String,
}

/// `<out>/manifest.csv`: one row per artifact, sorted by path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(out: &Path) -> Result<Self> {
        let path = out.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Self::default());
        }
        let mut reader = csv::Reader::from_path(&path)?;
        let mut entries = BTreeMap::new();
        for row in reader.records() {
            let row = row?;
            if row.len() != 3 {
                return Err(Error::Schema(format!("{}: expected path,sha256,stage", path.display())));
            }
            let entry = ManifestEntry { path: row[0].to_string(), sha256: row[1].to_string(), stage: row[2].to_string() };
            entries.insert(entry.path.clone(), entry);
        }
        Ok(Self { entries })
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let path = out.join(MANIFEST_FILE);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["path", "sha256", "stage"])?;
        for e in self.entries.values() {
            w.write_record([&e.path, &e.sha256, &e.stage])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    pub fn entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.values()
    }

    /// Replace every entry of `stage` by `files` (paths relative to `out`).
    pub fn replace_stage(&mut self, out: &Path, stage: &str, files: &[PathBuf]) -> Result<()> {
        self.entries.retain(|_, e| e.stage != stage);
        for rel in files {
            let full = out.join(rel);
            let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
            let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            self.entries.insert(path.clone(), ManifestEntry { path, sha256: sha256_hex(&bytes), stage: stage.to_string() });
        }
        Ok(())
    }

    /// Paths whose current content no longer matches the recorded digest.
    pub fn mismatches(&self, out: &Path) -> Vec<String> {
        self.entries
            .values()
            .filter(|e| std::fs::read(out.join(&e.path)).map(|b| sha256_hex(&b) != e.sha256).unwrap_or(true))
            .map(|e| e.path.clone())
            .collect()
    }
}
