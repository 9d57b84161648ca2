//! Index of everything a `generate` run wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleStats {
    pub muons: u64,
    /// Generated muons whose line misses the slab.
    pub missed_slab: u64,
    /// Muons that ranged out inside the slab.
    pub stopped: u64,
    pub rejected_geometry: u64,
    pub rejected_inefficiency: u64,
    /// Track pairs too close to parallel for a vertex.
    pub degenerate: u64,
    /// Vertices outside the slab.
    pub dropped_outside: u64,
    pub events: u64,
}

impl SampleStats {
    pub fn add(&mut self, o: &SampleStats) {
        self.muons += o.muons;
        self.missed_slab += o.missed_slab;
        self.stopped += o.stopped;
        self.rejected_geometry += o.rejected_geometry;
        self.rejected_inefficiency += o.rejected_inefficiency;
        self.degenerate += o.degenerate;
        self.dropped_outside += o.dropped_outside;
        self.events += o.events;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayEntry {
    pub day: u32,
    /// Directory holding `slice_ZZZ.raw` files and `slices.toml`.
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: u32,
    #[serde(with = "crate::serde_u64")]
    pub seed: u64,
    /// `None` when the sample completed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracks: Option<PathBuf>,
    #[serde(default)]
    pub days: Vec<DayEntry>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub stats: SampleStats,
}

impl SampleEntry {
    pub fn dir_name(id: u32) -> String {
        format!("sample_{id:04}")
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Every file path the entry refers to, relative to the run root.
    pub fn files(&self) -> Vec<PathBuf> {
        let mut out: Vec<PathBuf> =
            [&self.geometry, &self.labels, &self.volume, &self.tracks].into_iter().flatten().cloned().collect();
        out.extend(self.days.iter().map(|d| d.dir.join(crate::pipeline::SLICES_SIDECAR)));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub config_hash: String,
    pub config: PathBuf,
    /// Slice spacing (mm) and per-slice image dims, x first.
    pub voxel_mm: f64,
    pub dims: [usize; 3],
    pub days: Vec<u32>,
    #[serde(rename = "sample")]
    pub samples: Vec<SampleEntry>,
}

impl Manifest {
    pub fn tool_version() -> String {
        format!("muscat {}", env!("CARGO_PKG_VERSION"))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(format!("manifest: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("manifest: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// Reads `path`, or `path/manifest.toml` when `path` is a directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let (file, root) = if path.is_dir() {
            (path.join(MANIFEST_FILE), path.to_path_buf())
        } else {
            (path.to_path_buf(), path.parent().map(Path::to_path_buf).unwrap_or_default())
        };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let m = toml::from_str(&text).map_err(|e| Error::parse(&file, e))?;
        Ok((m, root))
    }

    pub fn final_day(&self) -> Option<u32> {
        self.days.last().copied()
    }

    /// Referenced files that do not exist under `root`.
    pub fn missing_files(&self, root: &Path) -> Vec<PathBuf> {
        let mut out: Vec<PathBuf> = [self.config.clone()].into_iter().filter(|p| !root.join(p).exists()).collect();
        for s in &self.samples {
            out.extend(s.files().into_iter().filter(|p| !root.join(p).exists()));
        }
        out
    }

    pub fn failures(&self) -> impl Iterator<Item = &SampleEntry> {
        self.samples.iter().filter(|s| !s.is_ok())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> Manifest {
        Manifest {
            tool: Manifest::tool_version(),
            config_hash: "ab".repeat(32),
            config: CONFIG_FILE.into(),
            voxel_mm: 2.0,
            dims: [60, 60, 30],
            days: vec![1, 2],
            samples: vec![
                SampleEntry {
                    id: 0,
                    seed: u64::MAX,
                    error: None,
                    geometry: Some("sample_0000/geometry.toml".into()),
                    labels: Some("sample_0000/labels.raw".into()),
                    volume: Some("sample_0000/volume.raw".into()),
                    tracks: None,
                    days: vec![DayEntry { day: 1, dir: "sample_0000/day_001".into() }],
                    warnings: vec!["dropped a void".into()],
                    stats: SampleStats { muons: 10, events: 7, ..Default::default() },
                },
                SampleEntry {
                    id: 1,
                    seed: 3,
                    error: Some("disk full".into()),
                    geometry: None,
                    labels: None,
                    volume: None,
                    tracks: None,
                    days: vec![],
                    warnings: vec![],
                    stats: SampleStats::default(),
                },
            ],
        }
    }

    #[test]
    fn round_trip() {
        let m = example();
        assert_eq!(Manifest::from_toml(&m.to_toml().unwrap()).unwrap(), m);
        assert_eq!(m.failures().count(), 1);
        assert_eq!(m.final_day(), Some(2));
    }

    #[test]
    fn missing_files_listed() {
        let dir = tempfile::tempdir().unwrap();
        let m = example();
        m.save(&dir.path().join(MANIFEST_FILE)).unwrap();
        let (back, root) = Manifest::load(dir.path()).unwrap();
        assert_eq!(back, m);
        assert_eq!(root, dir.path());
        assert_eq!(m.missing_files(dir.path()).len(), 5);
    }
}
