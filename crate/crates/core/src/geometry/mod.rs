//! Concrete-sample geometry: placed objects, point and ray material queries,
//! and ground-truth label volumes.

mod labels;
mod randomizer;
mod scene;
pub mod solid;

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::ClassLabel;

pub use labels::{rasterize_labels, LabelVolume};
pub use randomizer::{
    randomize_sample, randomize_sample_with_log, CountRange, DrawLog, DrawRecord, DuctConfig, DuctSize,
    CasingOption, GridConfig, ObjectKind, Param, RandomizerConfig, UnknownConfig, VoidConfig,
};
pub use scene::{PathSegment, Scene};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Edge length of a reconstruction / label voxel in mm.
pub const VOXEL_MM: f64 = 2.0;

/// Axis-aligned concrete block centred on the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slab {
    /// Full extents along x, y, z in mm.
    pub size: [f64; 3],
}

impl Slab {
    pub const FULL: Slab = Slab { size: [1000.0, 1000.0, 200.0] };

    pub fn new(size: [f64; 3]) -> Result<Self> {
        if size.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Validation(format!("slab extents must be positive, got {size:?}")));
        }
        Ok(Slab { size })
    }

    pub fn half(&self) -> Vec3 {
        Vec3::new(self.size[0], self.size[1], self.size[2]) * 0.5
    }

    pub fn aabb(&self) -> solid::Aabb {
        let h = self.half();
        solid::Aabb { min: -h, max: h }
    }

    pub fn top_z(&self) -> f64 {
        self.size[2] * 0.5
    }

    /// Inclusive containment with a sub-nanometre tolerance.
    pub fn contains(&self, p: &Vec3) -> bool {
        let h = self.half();
        const EPS: f64 = 1e-9;
        (0..3).all(|i| p[i].abs() <= h[i] + EPS)
    }

    /// Parametric interval `[t_in, t_out]` of the ray inside the slab, if any.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        self.aabb().intersect_ray(origin, dir)
    }

    /// Voxel counts along each axis at `VOXEL_MM` spacing.
    pub fn voxel_dims(&self) -> Result<[usize; 3]> {
        let mut dims = [0usize; 3];
        for i in 0..3 {
            let n = self.size[i] / VOXEL_MM;
            if (n - n.round()).abs() > 1e-9 || n < 1.0 {
                return Err(Error::Validation(format!(
                    "slab extent {} mm is not a multiple of the {VOXEL_MM} mm voxel",
                    self.size[i]
                )));
            }
            dims[i] = n.round() as usize;
        }
        Ok(dims)
    }
}

/// Rigid placement of an object. The rotation is a unit quaternion stored as
/// `[w, x, y, z]` so that serialisation round-trips bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: [f64; 4],
}

impl Pose {
    pub fn at(translation: Vec3) -> Self {
        Pose { translation, rotation: [1.0, 0.0, 0.0, 0.0] }
    }

    pub fn new(translation: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        let q = rotation.quaternion();
        Pose { translation, rotation: [q.w, q.i, q.j, q.k] }
    }

    pub fn unit_quaternion(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotation;
        UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z))
    }

    pub fn is_identity_rotation(&self) -> bool {
        self.rotation == [1.0, 0.0, 0.0, 0.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Solid primitive used by "unknown" objects, in local coordinates centred on
/// the pose translation. Cylinders are aligned with the local z axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Primitive {
    Box { size: [f64; 3] },
    Cylinder { diameter: f64, height: f64 },
    Sphere { diameter: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectShape {
    /// Two touching rod layers centred on the pose: the lower layer holds
    /// `rods_along_x` rods parallel to x, the upper `rods_along_y` rods
    /// parallel to y. Rods span the opposite layer's footprint.
    RebarGrid {
        rod_diameter: f64,
        spacing: f64,
        rods_along_x: u32,
        rods_along_y: u32,
        material: String,
    },
    /// Straight duct whose axis passes through the pose translation.
    TendonDuct {
        axis: Axis,
        length: f64,
        casing_diameter: f64,
        casing_thickness: f64,
        casing_material: String,
        grout_material: String,
        strand_material: String,
        strand_diameter: f64,
        strand_count: u32,
    },
    AirVoid {
        diameter: f64,
        material: String,
    },
    Unknown {
        primitive: Primitive,
        material: String,
    },
}

impl ObjectShape {
    pub fn kind(&self) -> ObjectKind {
        match self {
            ObjectShape::RebarGrid { .. } => ObjectKind::RebarGrid,
            ObjectShape::TendonDuct { .. } => ObjectKind::TendonDuct,
            ObjectShape::AirVoid { .. } => ObjectKind::AirVoid,
            ObjectShape::Unknown { .. } => ObjectKind::Unknown,
        }
    }

    pub fn class_label(&self) -> ClassLabel {
        self.kind().class_label()
    }

    pub fn material_names(&self) -> Vec<&str> {
        match self {
            ObjectShape::RebarGrid { material, .. }
            | ObjectShape::AirVoid { material, .. }
            | ObjectShape::Unknown { material, .. } => vec![material],
            ObjectShape::TendonDuct { casing_material, grout_material, strand_material, .. } => {
                vec![casing_material, grout_material, strand_material]
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub pose: Pose,
    pub shape: ObjectShape,
}

impl PlacedObject {
    /// The solid used for overlap tests. Rebar grids are represented by their
    /// whole bounding box.
    pub fn collision_solid(&self) -> solid::Solid {
        use solid::Solid;
        let c = self.pose.translation;
        match &self.shape {
            ObjectShape::RebarGrid { rod_diameter, spacing, rods_along_x, rods_along_y, .. } => {
                let half = grid_half_extents(*rod_diameter, *spacing, *rods_along_x, *rods_along_y);
                Solid::Box(solid::Aabb { min: c - half, max: c + half })
            }
            ObjectShape::TendonDuct { axis, length, casing_diameter, .. } => Solid::AxisCylinder {
                axis: *axis,
                center: c,
                radius: casing_diameter * 0.5,
                half_length: length * 0.5,
            },
            ObjectShape::AirVoid { diameter, .. } => Solid::Sphere { center: c, radius: diameter * 0.5 },
            ObjectShape::Unknown { primitive, .. } => Solid::Oriented { pose: self.pose, primitive: *primitive },
        }
    }
}

pub(crate) fn grid_half_extents(d: f64, s: f64, rods_along_x: u32, rods_along_y: u32) -> Vec3 {
    // rods parallel to x are spread along y and vice versa
    let x = (rods_along_y.saturating_sub(1)) as f64 * s + d;
    let y = (rods_along_x.saturating_sub(1)) as f64 * s + d;
    Vec3::new(x, y, 2.0 * d) * 0.5
}

/// Strand centres for a duct cross-section, relative to the duct axis.
///
/// The `count` hexagonal-lattice sites nearest the lattice origin (ties broken
/// by polar angle) are taken with touching pitch, then shifted so their
/// centroid sits on the axis.
pub fn strand_layout(count: u32, strand_diameter: f64) -> Vec<[f64; 2]> {
    if count == 0 {
        return Vec::new();
    }
    let n = count as i32;
    let reach = (n as f64).sqrt().ceil() as i32 + 2;
    let mut sites = Vec::new();
    for j in -reach..=reach {
        for i in -reach..=reach {
            let x = strand_diameter * (i as f64 + 0.5 * j as f64);
            let y = strand_diameter * (3f64.sqrt() * 0.5 * j as f64);
            let r = (x * x + y * y).sqrt();
            let mut phi = y.atan2(x);
            if phi < -1e-12 {
                phi += std::f64::consts::TAU;
            }
            // quantise so lattice rounding does not reorder equal radii
            let key = ((r / strand_diameter * 1e6).round() as i64, (phi.max(0.0) * 1e6).round() as i64);
            sites.push((key, [x, y]));
        }
    }
    sites.sort_by_key(|&(k, _)| k);
    let chosen: Vec<[f64; 2]> = sites.into_iter().take(count as usize).map(|(_, p)| p).collect();
    let cx = chosen.iter().map(|p| p[0]).sum::<f64>() / chosen.len() as f64;
    let cy = chosen.iter().map(|p| p[1]).sum::<f64>() / chosen.len() as f64;
    chosen.into_iter().map(|p| [p[0] - cx, p[1] - cy]).collect()
}

/// A randomised concrete block and its contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcreteSample {
    #[serde(with = "crate::serde_u64")]
    pub seed: u64,
    pub slab: Slab,
    pub bulk_material: String,
    /// Messages about objects dropped after exhausting placement attempts.
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub objects: Vec<PlacedObject>,
}

impl ConcreteSample {
    pub fn empty(seed: u64, slab: Slab) -> Self {
        ConcreteSample { seed, slab, bulk_material: "concrete".into(), warnings: Vec::new(), objects: Vec::new() }
    }

    pub fn count(&self, kind: ObjectKind) -> usize {
        self.objects.iter().filter(|o| o.shape.kind() == kind).count()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Validation(format!("cannot serialise sample: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse("<sample>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slab_voxel_dims() {
        assert_eq!(Slab::FULL.voxel_dims().unwrap(), [500, 500, 100]);
        assert_eq!(Slab::new([100.0, 100.0, 40.0]).unwrap().voxel_dims().unwrap(), [50, 50, 20]);
        assert!(Slab::new([101.0, 100.0, 40.0]).unwrap().voxel_dims().is_err());
        assert!(Slab::new([0.0, 100.0, 40.0]).is_err());
    }

    #[test]
    fn strand_layouts_fit_every_casing() {
        let sizes = [(50.0, 3), (60.0, 4), (70.0, 7), (80.0, 9), (90.0, 12), (100.0, 15)];
        for (diameter, count) in sizes {
            let strands = strand_layout(count, 15.7);
            assert_eq!(strands.len(), count as usize);
            for t in [0.5, 3.0] {
                let inner = diameter / 2.0 - t;
                for s in &strands {
                    let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
                    assert!(r + 7.85 <= inner + 1e-9, "d={diameter} n={count} t={t}: {r}");
                }
            }
            for (i, a) in strands.iter().enumerate() {
                for b in &strands[i + 1..] {
                    let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                    assert!(d >= 15.7 - 1e-9, "strands overlap: {d}");
                }
            }
        }
    }

    #[test]
    fn sample_toml_round_trip() {
        let sample = randomize_sample(0xdead_beef_dead_beef, &RandomizerConfig::default());
        assert!(!sample.objects.is_empty());
        let text = sample.to_toml().unwrap();
        let back = ConcreteSample::from_toml(&text).unwrap();
        assert_eq!(back, sample);
    }
}
