//! Randomised placement of rebar grids, tendon ducts, air voids and
//! "unknown" objects inside a concrete slab.
//!
//! Objects are placed kind by kind (grids, ducts, voids, unknowns). A
//! candidate that leaves the slab or overlaps an earlier object is discarded
//! and all of its parameters are drawn again; after `max_attempts` failures
//! the object is dropped and a warning is kept on the sample.

use std::f64::consts::TAU;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::solid::{oriented_half_extents, overlaps, Solid};
use super::{grid_half_extents, Axis, ConcreteSample, ObjectShape, PlacedObject, Pose, Primitive, Slab, Vec3};
use crate::error::{Error, Result};
use crate::materials::ClassLabel;
use crate::rng::{domain, keyed_unit};

/// Inclusive integer range `[min, max]`.
pub type CountRange = [u32; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    RebarGrid,
    TendonDuct,
    AirVoid,
    Unknown,
}

impl ObjectKind {
    /// Placement order.
    pub const ORDER: [ObjectKind; 4] =
        [ObjectKind::RebarGrid, ObjectKind::TendonDuct, ObjectKind::AirVoid, ObjectKind::Unknown];

    pub fn class_label(self) -> ClassLabel {
        match self {
            ObjectKind::RebarGrid => ClassLabel::Rebar,
            ObjectKind::TendonDuct => ClassLabel::TendonDuct,
            ObjectKind::AirVoid => ClassLabel::AirVoid,
            ObjectKind::Unknown => ClassLabel::Unknown,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::RebarGrid => "rebar_grid",
            ObjectKind::TendonDuct => "tendon_duct",
            ObjectKind::AirVoid => "air_void",
            ObjectKind::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownShape {
    Box,
    Cylinder,
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub count: CountRange,
    pub rod_diameters: Vec<f64>,
    pub spacings: Vec<f64>,
    pub rods_per_direction: CountRange,
    pub material: String,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            count: [1, 4],
            rod_diameters: vec![8.0, 10.0, 12.0, 16.0, 20.0, 25.0],
            spacings: vec![100.0, 150.0, 200.0, 250.0],
            rods_per_direction: [2, 12],
            material: "rebar_steel".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuctSize {
    pub diameter: f64,
    pub strands: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CasingOption {
    pub material: String,
    pub thickness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DuctConfig {
    pub count: CountRange,
    pub sizes: Vec<DuctSize>,
    pub casings: Vec<CasingOption>,
    pub strand_diameter: f64,
    pub grout_material: String,
    pub strand_material: String,
}

impl Default for DuctConfig {
    fn default() -> Self {
        let sizes = [(50.0, 3), (60.0, 4), (70.0, 7), (80.0, 9), (90.0, 12), (100.0, 15)]
            .into_iter()
            .map(|(diameter, strands)| DuctSize { diameter, strands })
            .collect();
        DuctConfig {
            count: [1, 3],
            sizes,
            casings: vec![
                CasingOption { material: "casing_steel".into(), thickness: 0.5 },
                CasingOption { material: "hdpe".into(), thickness: 3.0 },
                CasingOption { material: "hdpp".into(), thickness: 3.0 },
            ],
            strand_diameter: 15.7,
            grout_material: "grout".into(),
            strand_material: "strand_steel".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoidConfig {
    pub count: CountRange,
    pub diameter: [f64; 2],
    pub material: String,
}

impl Default for VoidConfig {
    fn default() -> Self {
        VoidConfig { count: [0, 3], diameter: [10.0, 100.0], material: "air".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnknownConfig {
    pub count: CountRange,
    pub edge: [f64; 2],
    pub shapes: Vec<UnknownShape>,
    pub materials: Vec<String>,
}

impl Default for UnknownConfig {
    fn default() -> Self {
        UnknownConfig {
            count: [0, 2],
            edge: [35.0, 75.0],
            shapes: vec![UnknownShape::Box, UnknownShape::Cylinder, UnknownShape::Sphere],
            materials: ["water", "aluminium", "iron", "lead", "uranium"].map(String::from).to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomizerConfig {
    pub slab: Slab,
    pub bulk_material: String,
    pub max_attempts: u32,
    /// Surface sampling pitch for overlap tests involving rotated objects (mm).
    pub overlap_spacing: f64,
    pub grids: GridConfig,
    pub ducts: DuctConfig,
    pub voids: VoidConfig,
    pub unknowns: UnknownConfig,
}

impl Default for RandomizerConfig {
    fn default() -> Self {
        RandomizerConfig {
            slab: Slab::FULL,
            bulk_material: "concrete".into(),
            max_attempts: 1000,
            overlap_spacing: 1.0,
            grids: GridConfig::default(),
            ducts: DuctConfig::default(),
            voids: VoidConfig::default(),
            unknowns: UnknownConfig::default(),
        }
    }
}

impl RandomizerConfig {
    pub fn count_range(&self, kind: ObjectKind) -> CountRange {
        match kind {
            ObjectKind::RebarGrid => self.grids.count,
            ObjectKind::TendonDuct => self.ducts.count,
            ObjectKind::AirVoid => self.voids.count,
            ObjectKind::Unknown => self.unknowns.count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Validation(format!("randomizer: {m}")));
        Slab::new(self.slab.size)?;
        for kind in ObjectKind::ORDER {
            let [lo, hi] = self.count_range(kind);
            if lo > hi {
                return fail(&format!("{} count range is empty", kind.name()));
            }
        }
        let g = &self.grids;
        if g.rod_diameters.is_empty() || g.spacings.is_empty() || g.rods_per_direction[0] > g.rods_per_direction[1] {
            return fail("grid menus must be non-empty");
        }
        if g.rods_per_direction[0] < 1 || g.rod_diameters.iter().chain(&g.spacings).any(|&v| !(v > 0.0)) {
            return fail("grid parameters must be positive");
        }
        let d = &self.ducts;
        if d.sizes.is_empty() || d.casings.is_empty() {
            return fail("duct menus must be non-empty");
        }
        if d.casings.iter().any(|c| d.sizes.iter().any(|s| c.thickness <= 0.0 || c.thickness >= s.diameter / 2.0)) {
            return fail("casing thickness must be positive and thinner than every duct radius");
        }
        if !(self.voids.diameter[0] > 0.0 && self.voids.diameter[0] <= self.voids.diameter[1]) {
            return fail("void diameter range is empty");
        }
        let u = &self.unknowns;
        if u.shapes.is_empty() || u.materials.is_empty() || !(u.edge[0] > 0.0 && u.edge[0] <= u.edge[1]) {
            return fail("unknown-object menus must be non-empty");
        }
        if self.max_attempts == 0 || !(self.overlap_spacing > 0.0) {
            return fail("max_attempts and overlap_spacing must be positive");
        }
        Ok(())
    }
}

/// Identifies a drawn parameter within one placement attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u64)]
pub enum Param {
    Count = 0,
    RodDiameter,
    Spacing,
    RodsAlongX,
    RodsAlongY,
    Axis,
    DuctSize,
    Casing,
    Diameter,
    Shape,
    Material,
    EdgeA,
    EdgeB,
    EdgeC,
    Rotation0,
    Rotation1,
    Rotation2,
    PositionX,
    PositionY,
    PositionZ,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DrawRecord {
    pub kind: ObjectKind,
    pub param: Param,
    pub value: f64,
    /// `(index, menu_len)` for categorical draws.
    pub choice: Option<(usize, usize)>,
}

/// Every parameter draw made while building a sample, including those of
/// rejected attempts.
#[derive(Clone, Debug, Default)]
pub struct DrawLog {
    pub records: Vec<DrawRecord>,
}

impl DrawLog {
    pub fn values(&self, kind: ObjectKind, param: Param) -> impl Iterator<Item = &DrawRecord> {
        self.records.iter().filter(move |r| r.kind == kind && r.param == param)
    }
}

struct Draws<'a> {
    seed: u64,
    key: [u64; 4],
    kind: ObjectKind,
    log: Option<&'a mut DrawLog>,
}

impl Draws<'_> {
    fn unit(&self, param: Param) -> f64 {
        let [d, a, b, c] = self.key;
        keyed_unit(self.seed, &[d, a, b, c, param as u64])
    }

    fn record(&mut self, param: Param, value: f64, choice: Option<(usize, usize)>) {
        if let Some(log) = self.log.as_deref_mut() {
            log.records.push(DrawRecord { kind: self.kind, param, value, choice });
        }
    }

    fn index(&mut self, param: Param, len: usize) -> usize {
        let i = ((self.unit(param) * len as f64) as usize).min(len - 1);
        i
    }

    fn choose<T: Copy + Into<f64>>(&mut self, param: Param, menu: &[T]) -> T {
        let i = self.index(param, menu.len());
        self.record(param, menu[i].into(), Some((i, menu.len())));
        menu[i]
    }

    fn choose_index(&mut self, param: Param, len: usize) -> usize {
        let i = self.index(param, len);
        self.record(param, i as f64, Some((i, len)));
        i
    }

    fn int(&mut self, param: Param, range: CountRange) -> u32 {
        let span = (range[1] - range[0]) as usize + 1;
        let i = self.index(param, span);
        let v = range[0] + i as u32;
        self.record(param, v as f64, Some((i, span)));
        v
    }

    fn uniform(&mut self, param: Param, lo: f64, hi: f64) -> f64 {
        let v = lo + self.unit(param) * (hi - lo);
        self.record(param, v, None);
        v
    }

    /// Position along one axis so that `[v - half, v + half]` fits in `[-limit, limit]`.
    fn position(&mut self, param: Param, limit: f64, half: f64) -> Option<f64> {
        let room = limit - half;
        if room < 0.0 {
            return None;
        }
        Some(self.uniform(param, -room, room))
    }

    /// Uniform random rotation (Shoemake's method).
    fn rotation(&mut self) -> UnitQuaternion<f64> {
        let u1 = self.uniform(Param::Rotation0, 0.0, 1.0);
        let u2 = self.uniform(Param::Rotation1, 0.0, 1.0);
        let u3 = self.uniform(Param::Rotation2, 0.0, 1.0);
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        let q = Quaternion::new(b * (TAU * u3).cos(), a * (TAU * u2).sin(), a * (TAU * u2).cos(), b * (TAU * u3).sin());
        UnitQuaternion::new_normalize(q)
    }
}

fn propose(kind: ObjectKind, d: &mut Draws<'_>, cfg: &RandomizerConfig) -> Option<PlacedObject> {
    let h = cfg.slab.half();
    match kind {
        ObjectKind::RebarGrid => {
            let g = &cfg.grids;
            let rod_diameter = d.choose(Param::RodDiameter, &g.rod_diameters);
            let spacing = d.choose(Param::Spacing, &g.spacings);
            let rods_along_x = d.int(Param::RodsAlongX, g.rods_per_direction);
            let rods_along_y = d.int(Param::RodsAlongY, g.rods_per_direction);
            let half = grid_half_extents(rod_diameter, spacing, rods_along_x, rods_along_y);
            let center = Vec3::new(
                d.position(Param::PositionX, h.x, half.x)?,
                d.position(Param::PositionY, h.y, half.y)?,
                d.position(Param::PositionZ, h.z, half.z)?,
            );
            Some(PlacedObject {
                pose: Pose::at(center),
                shape: ObjectShape::RebarGrid { rod_diameter, spacing, rods_along_x, rods_along_y, material: g.material.clone() },
            })
        }
        ObjectKind::TendonDuct => {
            let c = &cfg.ducts;
            let axis = [Axis::X, Axis::Y][d.choose_index(Param::Axis, 2)];
            let size = c.sizes[d.choose_index(Param::DuctSize, c.sizes.len())];
            d.record(Param::Diameter, size.diameter, None);
            let casing = &c.casings[d.choose_index(Param::Casing, c.casings.len())];
            let r = size.diameter * 0.5;
            let (length, center) = match axis {
                Axis::X => (cfg.slab.size[0], Vec3::new(0.0, d.position(Param::PositionY, h.y, r)?, d.position(Param::PositionZ, h.z, r)?)),
                Axis::Y => (cfg.slab.size[1], Vec3::new(d.position(Param::PositionX, h.x, r)?, 0.0, d.position(Param::PositionZ, h.z, r)?)),
            };
            Some(PlacedObject {
                pose: Pose::at(center),
                shape: ObjectShape::TendonDuct {
                    axis,
                    length,
                    casing_diameter: size.diameter,
                    casing_thickness: casing.thickness,
                    casing_material: casing.material.clone(),
                    grout_material: c.grout_material.clone(),
                    strand_material: c.strand_material.clone(),
                    strand_diameter: c.strand_diameter,
                    strand_count: size.strands,
                },
            })
        }
        ObjectKind::AirVoid => {
            let v = &cfg.voids;
            let diameter = d.uniform(Param::Diameter, v.diameter[0], v.diameter[1]);
            let r = diameter * 0.5;
            let center = Vec3::new(
                d.position(Param::PositionX, h.x, r)?,
                d.position(Param::PositionY, h.y, r)?,
                d.position(Param::PositionZ, h.z, r)?,
            );
            Some(PlacedObject { pose: Pose::at(center), shape: ObjectShape::AirVoid { diameter, material: v.material.clone() } })
        }
        ObjectKind::Unknown => {
            let u = &cfg.unknowns;
            let shape = u.shapes[d.choose_index(Param::Shape, u.shapes.len())];
            let material = u.materials[d.choose_index(Param::Material, u.materials.len())].clone();
            let [lo, hi] = u.edge;
            let primitive = match shape {
                UnknownShape::Box => Primitive::Box {
                    size: [d.uniform(Param::EdgeA, lo, hi), d.uniform(Param::EdgeB, lo, hi), d.uniform(Param::EdgeC, lo, hi)],
                },
                UnknownShape::Cylinder => Primitive::Cylinder {
                    diameter: d.uniform(Param::EdgeA, lo, hi),
                    height: d.uniform(Param::EdgeB, lo, hi),
                },
                UnknownShape::Sphere => Primitive::Sphere { diameter: d.uniform(Param::EdgeA, lo, hi) },
            };
            let rotation = d.rotation();
            let half = oriented_half_extents(&Pose::new(Vec3::zeros(), rotation), &primitive);
            let center = Vec3::new(
                d.position(Param::PositionX, h.x, half.x)?,
                d.position(Param::PositionY, h.y, half.y)?,
                d.position(Param::PositionZ, h.z, half.z)?,
            );
            Some(PlacedObject { pose: Pose::new(center, rotation), shape: ObjectShape::Unknown { primitive, material } })
        }
    }
}

/// Build a random sample. A pure function of `(seed, config)`.
pub fn randomize_sample(seed: u64, config: &RandomizerConfig) -> ConcreteSample {
    build(seed, config, None)
}

/// As [`randomize_sample`], also returning every parameter draw.
pub fn randomize_sample_with_log(seed: u64, config: &RandomizerConfig) -> (ConcreteSample, DrawLog) {
    let mut log = DrawLog::default();
    let sample = build(seed, config, Some(&mut log));
    (sample, log)
}

fn build(seed: u64, cfg: &RandomizerConfig, mut log: Option<&mut DrawLog>) -> ConcreteSample {
    let mut sample = ConcreteSample::empty(seed, cfg.slab);
    sample.bulk_material = cfg.bulk_material.clone();
    let slab_box = cfg.slab.aabb();
    let mut solids: Vec<Solid> = Vec::new();
    let mut slot = 0u64;
    for (kind_index, kind) in ObjectKind::ORDER.into_iter().enumerate() {
        let count = {
            let mut d = Draws { seed, key: [domain::GEOMETRY_COUNT, kind_index as u64, 0, 0], kind, log: log.as_deref_mut() };
            d.int(Param::Count, cfg.count_range(kind))
        };
        for ordinal in 0..count {
            let mut placed = false;
            for attempt in 0..cfg.max_attempts {
                let mut d = Draws { seed, key: [domain::GEOMETRY, slot, attempt as u64, 0], kind, log: log.as_deref_mut() };
                let Some(candidate) = propose(kind, &mut d, cfg) else { continue };
                let solid = candidate.collision_solid();
                if !slab_box.contains_box(&solid.aabb(), 1e-9) {
                    continue;
                }
                if solids.iter().any(|s| overlaps(s, &solid, cfg.overlap_spacing)) {
                    continue;
                }
                solids.push(solid);
                sample.objects.push(candidate);
                placed = true;
                break;
            }
            if !placed {
                let msg = format!(
                    "dropped {} #{ordinal}: no valid placement in {} attempts",
                    kind.name(),
                    cfg.max_attempts
                );
                log::warn!("sample {seed:#018x}: {msg}");
                sample.warnings.push(msg);
            }
            slot += 1;
        }
    }
    sample
}
