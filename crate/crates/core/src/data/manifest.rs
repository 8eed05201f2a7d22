use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Provenance, RIGHT_WRIST};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u32,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImuEntry {
    pub path: PathBuf,
    pub provenance: Provenance,
    #[serde(default)]
    pub subject: Option<String>,
    #[serde(default)]
    pub unit: Option<String>,
    /// Id of the video this virtual series was synthesized from.
    #[serde(default)]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub id: String,
    pub flow: PathBuf,
    pub pose: PathBuf,
    pub class: u32,
    #[serde(default = "default_joint")]
    pub target_joint: u8,
}

fn default_joint() -> u8 {
    RIGHT_WRIST
}

/// Class table plus the IMU and video files of a dataset.
///
/// Relative paths are resolved against the manifest's directory by [`load`].
///
/// [`load`]: DatasetManifest::load
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub classes: Vec<ClassEntry>,
    #[serde(default)]
    pub imu: Vec<ImuEntry>,
    #[serde(default)]
    pub videos: Vec<VideoEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: DatasetManifest = serde_json::from_str(&text)
            .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve_paths(base);
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.imu.iter_mut().for_each(|e| resolve(&mut e.path));
        for v in &mut self.videos {
            resolve(&mut v.flow);
            resolve(&mut v.pose);
        }
    }

    /// Checks class references, id uniqueness and that every file exists.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for c in &self.classes {
            if !ids.insert(c.id) {
                return Err(Error::ConfigInvalid(format!("duplicate class id {}", c.id)));
            }
        }
        if ids.is_empty() {
            return Err(Error::ConfigInvalid("class table is empty".into()));
        }
        let mut video_ids = BTreeSet::new();
        for v in &self.videos {
            if !ids.contains(&v.class) {
                return Err(Error::ConfigInvalid(format!(
                    "video {} references unknown class {}",
                    v.id, v.class
                )));
            }
            if !video_ids.insert(v.id.as_str()) {
                return Err(Error::ConfigInvalid(format!("duplicate video id {}", v.id)));
            }
        }
        for e in &self.imu {
            if let Some(src) = &e.source {
                if !video_ids.contains(src.as_str()) {
                    return Err(Error::ConfigInvalid(format!(
                        "{} references unknown video {src}",
                        e.path.display()
                    )));
                }
            }
        }
        let paths = self
            .imu
            .iter()
            .map(|e| &e.path)
            .chain(self.videos.iter().flat_map(|v| [&v.flow, &v.pose]));
        for p in paths {
            if !p.is_file() {
                return Err(Error::DataLoadFailed(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn class_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.classes.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn has_class(&self, id: u32) -> bool {
        self.classes.iter().any(|c| c.id == id)
    }

    pub fn video(&self, id: &str) -> Option<&VideoEntry> {
        self.videos.iter().find(|v| v.id == id)
    }
}
