use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::dataset::{sha256_hex, Dataset};
use crate::data::schema::Schema;
use crate::error::{Error, Result};

/// Environment variable overriding the data directory.
pub const DATA_DIR_ENV: &str = "SIMLEARN_DATA_DIR";

/// `$SIMLEARN_DATA_DIR`, falling back to the `data/` directory of this
/// source tree.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub name: String,
    pub url: String,
    /// Path relative to the data directory.
    pub file: String,
    /// Schema path relative to the data directory.
    pub schema: String,
    /// Expected digest of `file`; `None` when no copy has been pinned yet.
    pub sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileStatus {
    /// Present and matching the pinned digest.
    Verified,
    /// Present, but the manifest pins no digest.
    Unpinned { sha256: String },
    Missing,
}

impl ManifestEntry {
    pub fn path(&self, data_dir: &Path) -> PathBuf {
        data_dir.join(&self.file)
    }

    fn verify_bytes(&self, path: &Path, bytes: &[u8]) -> Result<FileStatus> {
        let actual = sha256_hex(bytes);
        match &self.sha256 {
            Some(expected) if *expected == actual => Ok(FileStatus::Verified),
            Some(expected) => Err(Error::HashMismatch {
                path: path.to_owned(),
                expected: expected.clone(),
                actual,
            }),
            None => Ok(FileStatus::Unpinned { sha256: actual }),
        }
    }

    /// Checks the local copy; a digest mismatch is an error.
    pub fn check(&self, data_dir: &Path) -> Result<FileStatus> {
        let path = self.path(data_dir);
        match std::fs::read(&path) {
            Ok(bytes) => self.verify_bytes(&path, &bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(FileStatus::Missing),
            Err(e) => Err(Error::data(&path, e.to_string())),
        }
    }

    /// Verifies downloaded bytes and writes them into place.
    pub fn install(&self, data_dir: &Path, bytes: &[u8]) -> Result<FileStatus> {
        let path = self.path(data_dir);
        let status = self.verify_bytes(&path, bytes)?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        Ok(status)
    }

    pub fn load_schema(&self, data_dir: &Path) -> Result<Schema> {
        Schema::from_path(&data_dir.join(&self.schema))
    }

    /// Loads the dataset after verifying its digest.
    pub fn load(&self, data_dir: &Path) -> Result<Dataset> {
        let path = self.path(data_dir);
        let bytes = std::fs::read(&path).map_err(|e| {
            Error::data(
                &path,
                format!("{e}; run `simlearn fetch --datasets {}` first", self.id),
            )
        })?;
        self.verify_bytes(&path, &bytes)?;
        let schema = self.load_schema(data_dir)?;
        Dataset::parse(&self.id, &path, &bytes, &schema)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub datasets: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(data_dir: &Path) -> Result<Self> {
        let path = data_dir.join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn entry(&self, id: &str) -> Result<&ManifestEntry> {
        self.datasets
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::Config(format!("unknown dataset `{id}`")))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.datasets.iter().map(|e| e.id.as_str())
    }

    /// Expands `all` and comma lists into manifest entries, in manifest order
    /// for `all` and in the given order otherwise.
    pub fn select(&self, selector: &str) -> Result<Vec<&ManifestEntry>> {
        if selector == "all" {
            return Ok(self.datasets.iter().collect());
        }
        selector
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|id| self.entry(id))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(sha: Option<String>) -> ManifestEntry {
        ManifestEntry {
            id: "toy".into(),
            name: "Toy".into(),
            url: "https://example.invalid/toy.data".into(),
            file: "toy.data".into(),
            schema: "toy.json".into(),
            sha256: sha,
            note: None,
        }
    }

    #[test]
    fn mismatched_digest_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let e = entry(Some(sha256_hex(b"good")));
        assert!(matches!(e.install(dir.path(), b"evil"), Err(Error::HashMismatch { .. })));
        assert_eq!(e.check(dir.path()).unwrap(), FileStatus::Missing);
        assert_eq!(e.install(dir.path(), b"good").unwrap(), FileStatus::Verified);
        std::fs::write(dir.path().join("toy.data"), b"tampered").unwrap();
        assert!(e.check(dir.path()).is_err());
    }

    #[test]
    fn unpinned_entries_report_their_digest() {
        let dir = tempfile::tempdir().unwrap();
        let e = entry(None);
        match e.install(dir.path(), b"abc").unwrap() {
            FileStatus::Unpinned { sha256 } => assert_eq!(sha256, sha256_hex(b"abc")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bundled_manifest_lists_fourteen_datasets() {
        let m = Manifest::load(&default_data_dir()).unwrap();
        let ids: Vec<&str> = m.ids().collect();
        assert_eq!(
            ids,
            ["bal", "car", "cmc", "eco", "glass", "hay", "heart", "iris", "mam", "mon", "pim", "ttt", "use", "who"]
        );
        assert_eq!(m.select("iris,bal").unwrap()[1].id, "bal");
        assert!(m.select("nope").is_err());
    }
}
