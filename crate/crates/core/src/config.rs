//! Run configuration: one TOML file with a section per subsystem.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::DetectorSpec;
use crate::error::{Error, Result};
use crate::geometry::{DuctConfig, DuctSize, GridConfig, RandomizerConfig, Slab, UnknownConfig, VoidConfig};
use crate::muon_source::GeneratorSpec;
use crate::reconstruction::validate_boundaries;
use crate::transport::TransportOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub samples: u32,
    #[serde(with = "crate::serde_u64")]
    pub seed: u64,
    /// Exposure length in days.
    pub days: u32,
    /// Cumulative days at which image slices are written. Empty means every day.
    pub day_boundaries: Vec<u32>,
    /// Worker threads; 0 uses every available core.
    pub jobs: usize,
    pub out: PathBuf,
    /// Muons per parallel work unit.
    pub chunk_size: usize,
    /// Write the fitted track pairs of each sample.
    pub export_tracks: bool,
    /// Material table replacing the built-in one.
    pub materials: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            samples: 10,
            seed: 1,
            days: 5,
            day_boundaries: Vec::new(),
            jobs: 0,
            out: PathBuf::from("muscat-out"),
            chunk_size: 4096,
            export_tracks: false,
            materials: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExposureSection {
    /// muons cm⁻² min⁻¹
    pub flux: f64,
    /// Draw each day's muon count from a Poisson distribution instead of
    /// using its mean.
    pub poisson: bool,
}

impl Default for ExposureSection {
    fn default() -> Self {
        ExposureSection { flux: 1.0, poisson: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub exposure: ExposureSection,
    pub geometry: RandomizerConfig,
    pub generator: GeneratorSpec,
    pub transport: TransportOptions,
    pub detector: DetectorSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run: RunSection::default(),
            exposure: ExposureSection::default(),
            geometry: desk_geometry(),
            generator: GeneratorSpec::default(),
            transport: TransportOptions::default(),
            detector: DetectorSpec::default(),
        }
    }
}

/// Object menus scaled to a 120 × 120 × 60 mm block.
pub fn desk_geometry() -> RandomizerConfig {
    RandomizerConfig {
        slab: Slab { size: [120.0, 120.0, 60.0] },
        grids: GridConfig {
            count: [1, 2],
            rod_diameters: vec![8.0, 10.0, 12.0, 16.0],
            spacings: vec![30.0, 40.0, 50.0],
            rods_per_direction: [2, 3],
            ..GridConfig::default()
        },
        ducts: DuctConfig {
            count: [0, 1],
            sizes: vec![DuctSize { diameter: 40.0, strands: 2 }, DuctSize { diameter: 50.0, strands: 3 }],
            ..DuctConfig::default()
        },
        voids: VoidConfig { count: [0, 2], diameter: [10.0, 30.0], ..VoidConfig::default() },
        unknowns: UnknownConfig { count: [0, 1], edge: [10.0, 25.0], ..UnknownConfig::default() },
        ..RandomizerConfig::default()
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(format!("config: {e}")))
    }

    /// Slice days: the configured boundaries or every day.
    pub fn boundaries(&self) -> Vec<u32> {
        if self.run.day_boundaries.is_empty() {
            (1..=self.run.days).collect()
        } else {
            self.run.day_boundaries.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        if self.run.samples < 1 {
            return fail("run.samples must be at least 1".into());
        }
        if self.run.days < 1 {
            return fail("run.days must be at least 1".into());
        }
        if self.run.chunk_size == 0 {
            return fail("run.chunk_size must be positive".into());
        }
        let b = self.boundaries();
        validate_boundaries(&b)?;
        if b.last().is_some_and(|&d| d > self.run.days) {
            return fail(format!("day boundaries {b:?} exceed the {}-day exposure", self.run.days));
        }
        if !(self.exposure.flux > 0.0) {
            return fail(format!("exposure.flux must be positive, got {}", self.exposure.flux));
        }
        self.geometry.validate()?;
        self.geometry.slab.voxel_dims()?;
        self.generator.validate()?;
        self.transport.validate()?;
        self.detector.validate()?;
        self.detector.check_clearance(self.geometry.slab.half().z)?;
        let plane = self.generator.plane(self.geometry.slab.size);
        if plane.z < self.geometry.slab.top_z() || plane.z >= self.detector.module_z()[1] {
            return fail(format!("generation plane z = {} must lie between the slab top and the upstream modules", plane.z));
        }
        Ok(())
    }

    /// Hash of every setting that influences the generated data. Output
    /// location and thread count are excluded.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.run.out = PathBuf::new();
        canonical.run.jobs = 0;
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        assert_eq!(c.boundaries(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = RunConfig::from_toml("[run]\nsamples = 2\nseed = \"0xff\"\n[detector]\nefficiency = 0.5\n").unwrap();
        assert_eq!(c.run.samples, 2);
        assert_eq!(c.run.seed, 255);
        assert_eq!(c.detector.efficiency, 0.5);
        assert_eq!(c.run.days, 5);
        assert!(RunConfig::from_toml("[run]\nsampels = 2\n").is_err());
    }

    #[test]
    fn invalid_settings() {
        let mut c = RunConfig::default();
        c.run.day_boundaries = vec![2, 7];
        assert!(c.validate().is_err());
        c.run.day_boundaries = vec![3, 2];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.run.samples = 0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.geometry.slab = Slab { size: [120.0, 120.0, 61.0] };
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.generator.plane_z = Some(400.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_placement_settings() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.run.jobs = 8;
        b.run.out = "elsewhere".into();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.run.seed = 2;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }
}
