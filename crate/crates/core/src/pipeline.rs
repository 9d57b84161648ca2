//! End-to-end dataset generation.
//!
//! Each muon draws from its own keyed stream `(sample seed, day, index)`, and
//! voxel sums are integers, so the output is the same for any thread count
//! and any chunking.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::detector::{record_and_fit, Detection, Rejection, TrackPair};
use crate::error::{Error, Result};
use crate::geometry::{randomize_sample, rasterize_labels, ConcreteSample, RandomizerConfig, Scene};
use crate::manifest::{DayEntry, Manifest, SampleEntry, SampleStats, CONFIG_FILE, MANIFEST_FILE};
use crate::materials::MaterialRegistry;
use crate::muon_source::{exposure_count, exposure_count_poisson, sample_muon, ExposureSpec, GenerationPlane, SECONDS_PER_DAY};
use crate::raw::{self, SampleFormat, Sidecar};
use crate::reconstruction::{poca, Deposit, ImageSlice, VoxelGrid};
use crate::rng::{domain, keyed_u64, sample_seed, stream};
use crate::transport::propagate;

pub const SLICES_SIDECAR: &str = "slices.toml";
pub const GEOMETRY_FILE: &str = "geometry.toml";
pub const LABELS_FILE: &str = "labels.raw";
pub const VOLUME_FILE: &str = "volume.raw";
pub const TRACKS_FILE: &str = "tracks.raw";

/// Chunks simulated between two sequential deposit passes.
const CHUNKS_PER_BATCH: usize = 64;

pub fn day_dir_name(day: u32) -> String {
    format!("day_{day:03}")
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Outcome {
    Missed,
    Stopped,
    Rejected(Rejection),
    Degenerate,
    Outside,
    Event(Deposit),
}

/// Simulates muons through one sample.
pub struct SampleSimulator<'a> {
    cfg: &'a RunConfig,
    scene: Scene,
    plane: GenerationPlane,
    seed: u64,
    empty: VoxelGrid,
}

#[derive(Clone, Debug, Default)]
pub struct DayResult {
    pub stats: SampleStats,
    pub tracks: Vec<TrackPair>,
}

impl<'a> SampleSimulator<'a> {
    pub fn new(cfg: &'a RunConfig, sample: &ConcreteSample, registry: &MaterialRegistry) -> Result<Self> {
        let scene = Scene::new(sample, registry)?;
        let empty = VoxelGrid::for_slab(&sample.slab)?;
        Ok(SampleSimulator { cfg, plane: cfg.generator.plane(sample.slab.size), scene, seed: sample.seed, empty })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn empty_grid(&self) -> VoxelGrid {
        self.empty.clone()
    }

    /// Muons crossing the generation plane on `day` (1-based).
    pub fn muon_count(&self, day: u32) -> Result<u64> {
        let spec = ExposureSpec { flux: self.cfg.exposure.flux, plane_area: self.plane.area(), duration_days: 1.0 };
        if self.cfg.exposure.poisson {
            exposure_count_poisson(&spec, keyed_u64(self.seed, &[domain::EXPOSURE, day as u64]))
        } else {
            exposure_count(&spec)
        }
    }

    fn muon(&self, day: u32, index: u64) -> (Outcome, Option<TrackPair>) {
        let mut rng = stream(self.seed, &[domain::MUON, day as u64, index]);
        let mut m = sample_muon(&mut rng, &self.cfg.generator, &self.plane);
        m.time_offset = ((day - 1) as f64 + rand::Rng::random::<f64>(&mut rng)) * SECONDS_PER_DAY;
        let Ok(result) = propagate(&m, &self.scene, &mut rng, &self.cfg.transport) else {
            return (Outcome::Missed, None);
        };
        let pair = match record_and_fit(&result.entry, result.exit.as_ref(), &self.cfg.detector, &mut rng) {
            Detection::Track(t) => t,
            Detection::Rejected(Rejection::Stopped) => return (Outcome::Stopped, None),
            Detection::Rejected(r) => return (Outcome::Rejected(r), None),
        };
        let outcome = match poca(&pair) {
            None => Outcome::Degenerate,
            Some(e) => self.empty.deposit_of(&e).map_or(Outcome::Outside, Outcome::Event),
        };
        (outcome, Some(pair))
    }

    fn chunk(&self, day: u32, range: std::ops::Range<u64>, keep_tracks: bool) -> (Vec<Deposit>, SampleStats, Vec<TrackPair>) {
        let mut deposits = Vec::with_capacity((range.end - range.start) as usize);
        let mut stats = SampleStats::default();
        let mut tracks = Vec::new();
        for i in range {
            stats.muons += 1;
            let (outcome, pair) = self.muon(day, i);
            if keep_tracks {
                tracks.extend(pair);
            }
            match outcome {
                Outcome::Missed => stats.missed_slab += 1,
                Outcome::Stopped => stats.stopped += 1,
                Outcome::Rejected(Rejection::Inefficiency { .. }) => stats.rejected_inefficiency += 1,
                Outcome::Rejected(_) => stats.rejected_geometry += 1,
                Outcome::Degenerate => stats.degenerate += 1,
                Outcome::Outside => stats.dropped_outside += 1,
                Outcome::Event(d) => {
                    stats.events += 1;
                    deposits.push(d);
                }
            }
        }
        (deposits, stats, tracks)
    }

    /// Simulate one day's muons and add their vertices to `grid`.
    pub fn run_day(&self, day: u32, grid: &mut VoxelGrid, keep_tracks: bool) -> Result<DayResult> {
        let n = self.muon_count(day)?;
        let size = self.cfg.run.chunk_size as u64;
        let chunks = n.div_ceil(size);
        let mut out = DayResult::default();
        let mut next = 0;
        while next < chunks {
            let end = (next + CHUNKS_PER_BATCH as u64).min(chunks);
            let parts: Vec<_> = (next..end)
                .into_par_iter()
                .map(|c| self.chunk(day, c * size..((c + 1) * size).min(n), keep_tracks))
                .collect();
            for (deposits, stats, tracks) in parts {
                for d in deposits {
                    grid.deposit(d)?;
                }
                out.stats.add(&stats);
                out.tracks.extend(tracks);
            }
            next = end;
        }
        Ok(out)
    }
}

/// Writes every z slice of `grid` into `dir` with a shared sidecar.
pub fn write_slices(dir: &Path, grid: &VoxelGrid, day: u32) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for s in grid.slices(day) {
        raw::write_f32(&dir.join(ImageSlice::file_name(s.z_index)), &s.data)?;
    }
    Sidecar {
        format: SampleFormat::F32le,
        dims: grid.dims.to_vec(),
        spacing_mm: grid.spacing(),
        origin_mm: grid.origin().to_vec(),
        units: "mrad".into(),
        cumulative_days: Some(day),
        files: Some("slice_{z:03}.raw, one x-y plane per z index".into()),
        class_map: Default::default(),
    }
    .save(&dir.join(SLICES_SIDECAR))
}

/// Reads one slice written by [`write_slices`].
pub fn read_slice(dir: &Path, z_index: usize) -> Result<ImageSlice> {
    let side = Sidecar::load(&dir.join(SLICES_SIDECAR))?;
    if side.dims.len() != 3 || z_index >= side.dims[2] {
        return Err(Error::parse(dir.join(SLICES_SIDECAR), format!("no slice {z_index}")));
    }
    let data = raw::read_f32(&dir.join(ImageSlice::file_name(z_index)), side.dims[0] * side.dims[1])?;
    Ok(ImageSlice { dims: [side.dims[0], side.dims[1]], z_index, cumulative_days: side.cumulative_days.unwrap_or(0), data })
}

fn rel(p: &Path, root: &Path) -> PathBuf {
    p.strip_prefix(root).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
}

fn run_sample(cfg: &RunConfig, registry: &MaterialRegistry, root: &Path, id: u32) -> SampleEntry {
    let seed = sample_seed(cfg.run.seed, id as u64);
    let mut entry = SampleEntry {
        id,
        seed,
        error: None,
        geometry: None,
        labels: None,
        volume: None,
        tracks: None,
        days: Vec::new(),
        warnings: Vec::new(),
        stats: SampleStats::default(),
    };
    if let Err(e) = fill_sample(cfg, registry, root, &mut entry) {
        log::error!("sample {id}: {e}");
        entry.error = Some(e.to_string());
    }
    entry
}

fn fill_sample(cfg: &RunConfig, registry: &MaterialRegistry, root: &Path, entry: &mut SampleEntry) -> Result<()> {
    let dir = root.join(SampleEntry::dir_name(entry.id));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let sample = randomize_sample(entry.seed, &cfg.geometry);
    entry.warnings = sample.warnings.clone();
    let geometry = dir.join(GEOMETRY_FILE);
    sample.save(&geometry)?;
    entry.geometry = Some(rel(&geometry, root));

    let sim = SampleSimulator::new(cfg, &sample, registry)?;
    let labels = dir.join(LABELS_FILE);
    rasterize_labels(sim.scene())?.save(&labels)?;
    entry.labels = Some(rel(&labels, root));

    let boundaries = cfg.boundaries();
    let mut grid = sim.empty_grid();
    let mut tracks = Vec::new();
    for day in 1..=boundaries.last().copied().unwrap_or(cfg.run.days) {
        let r = sim.run_day(day, &mut grid, cfg.run.export_tracks)?;
        entry.stats.add(&r.stats);
        tracks.extend(r.tracks);
        if boundaries.contains(&day) {
            let day_dir = dir.join(day_dir_name(day));
            write_slices(&day_dir, &grid, day)?;
            entry.days.push(DayEntry { day, dir: rel(&day_dir, root) });
        }
    }
    let volume = dir.join(VOLUME_FILE);
    grid.save_volume(&volume, boundaries.last().copied())?;
    entry.volume = Some(rel(&volume, root));
    if cfg.run.export_tracks {
        let path = dir.join(TRACKS_FILE);
        crate::detector::write_tracks(&path, &tracks)?;
        entry.tracks = Some(rel(&path, root));
    }
    log::info!("sample {}: {} muons, {} events", entry.id, entry.stats.muons, entry.stats.events);
    Ok(())
}

/// Builds the material table named in the config, or the built-in one.
pub fn registry_for(cfg: &RunConfig) -> Result<MaterialRegistry> {
    match &cfg.run.materials {
        Some(p) => MaterialRegistry::load(p),
        None => Ok(MaterialRegistry::builtin()),
    }
}

/// Every material the randomizer can place must be known before any sample runs.
pub fn check_materials(g: &RandomizerConfig, registry: &MaterialRegistry) -> Result<()> {
    let names = [&g.bulk_material, &g.grids.material, &g.ducts.grout_material, &g.ducts.strand_material, &g.voids.material]
        .into_iter()
        .chain(g.ducts.casings.iter().map(|c| &c.material))
        .chain(&g.unknowns.materials);
    for name in names {
        registry.lookup(name)?;
    }
    Ok(())
}

/// Generate every sample of the run under `cfg.run.out` and write the manifest.
///
/// A sample that fails is recorded in the manifest and the run continues.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let registry = registry_for(cfg)?;
    check_materials(&cfg.geometry, &registry)?;
    let root = &cfg.run.out;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    fs::write(root.join(CONFIG_FILE), cfg.to_toml()?).map_err(|e| Error::io(root.join(CONFIG_FILE), e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.jobs)
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    let samples: Vec<SampleEntry> =
        pool.install(|| (0..cfg.run.samples).into_par_iter().map(|id| run_sample(cfg, &registry, root, id)).collect());

    let manifest = Manifest {
        tool: Manifest::tool_version(),
        config_hash: cfg.hash()?,
        config: CONFIG_FILE.into(),
        voxel_mm: crate::geometry::VOXEL_MM,
        dims: cfg.geometry.slab.voxel_dims()?,
        days: cfg.boundaries(),
        samples,
    };
    manifest.save(&root.join(MANIFEST_FILE))?;
    Ok(manifest)
}
