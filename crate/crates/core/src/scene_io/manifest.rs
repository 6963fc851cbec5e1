use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!(
                "unknown split {other:?} (expected train, val or test)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub scene_id: String,
    pub vv_path: PathBuf,
    pub vh_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub land_mask_path: Option<PathBuf>,
    pub split: Split,
}

impl ManifestEntry {
    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.vv_path, &self.vh_path]
            .into_iter()
            .chain(self.mask_path.iter())
            .chain(self.land_mask_path.iter())
    }

    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [&mut self.vv_path, &mut self.vh_path]
            .into_iter()
            .chain(self.mask_path.iter_mut())
            .chain(self.land_mask_path.iter_mut())
    }
}

/// JSON array of scene entries. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        DatasetManifest { entries }
    }

    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries: Vec<ManifestEntry> =
            serde_json::from_str(text).map_err(|source| Error::Json {
                context: "manifest".into(),
                source,
            })?;
        for e in &mut entries {
            for p in e.paths_mut() {
                if p.is_relative() {
                    *p = base_dir.join(&*p);
                }
            }
        }
        Ok(DatasetManifest { entries })
    }

    /// Parses and validates: ids unique, every path present, train entries
    /// carry a mask.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let manifest = Self::from_json(&text, base)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.scene_id.as_str()) {
                return Err(Error::Manifest(format!("duplicate scene_id {:?}", e.scene_id)));
            }
            if e.split == Split::Train && e.mask_path.is_none() {
                return Err(Error::Manifest(format!(
                    "train entry {:?} has no mask_path",
                    e.scene_id
                )));
            }
            if let Some(p) = e.paths().find(|p| !p.is_file()) {
                return Err(Error::Manifest(format!(
                    "entry {:?} references missing file {}",
                    e.scene_id,
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// Writes the manifest with paths relative to its own directory when
    /// they live beneath it.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut entries = self.entries.clone();
        for e in &mut entries {
            for p in e.paths_mut() {
                if let Ok(rel) = p.strip_prefix(base) {
                    *p = rel.to_path_buf();
                }
            }
        }
        let text = serde_json::to_string_pretty(&entries).map_err(|source| Error::Json {
            context: "manifest".into(),
            source,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn split(&self, split: Split) -> Vec<&ManifestEntry> {
        self.entries.iter().filter(|e| e.split == split).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_resolve_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        for f in ["a_vv.png", "a_vh.png", "a_mask.png"] {
            std::fs::write(dir.path().join(f), b"x").unwrap();
        }
        let json = r#"[{"scene_id":"a","vv_path":"a_vv.png","vh_path":"a_vh.png",
                        "mask_path":"a_mask.png","split":"train"}]"#;
        let mpath = dir.path().join("m.json");
        std::fs::write(&mpath, json).unwrap();
        let m = DatasetManifest::load(&mpath).unwrap();
        assert_eq!(m.entries[0].vv_path, dir.path().join("a_vv.png"));
        assert_eq!(m.split(Split::Train).len(), 1);
        assert!(m.split(Split::Test).is_empty());

        m.save(&mpath).unwrap();
        assert_eq!(DatasetManifest::load(&mpath).unwrap(), m);
    }

    #[test]
    fn validation_failures() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("v.png"), b"x").unwrap();
        let base = dir.path();
        let dup = r#"[{"scene_id":"a","vv_path":"v.png","vh_path":"v.png","split":"test"},
                      {"scene_id":"a","vv_path":"v.png","vh_path":"v.png","split":"test"}]"#;
        let no_mask = r#"[{"scene_id":"a","vv_path":"v.png","vh_path":"v.png","split":"train"}]"#;
        let missing = r#"[{"scene_id":"a","vv_path":"v.png","vh_path":"w.png","split":"test"}]"#;
        for bad in [dup, no_mask, missing] {
            let m = DatasetManifest::from_json(bad, base).unwrap();
            assert!(matches!(m.validate(), Err(Error::Manifest(_))));
        }
        assert!(DatasetManifest::from_json("{}", base).is_err());
    }
}
