use nalgebra::UnitQuaternion;

use super::solid::{oriented_half_extents, primitive_sdf, Aabb};
use super::{grid_half_extents, strand_layout, Axis, ConcreteSample, ObjectShape, Primitive, Slab, Vec3, VOXEL_MM};
use crate::error::{Error, Result};
use crate::materials::{ClassLabel, Material, MaterialRegistry};

/// A stretch of a ray inside one material.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSegment<'a> {
    pub length: f64,
    pub material: &'a Material,
}

#[derive(Clone, Debug)]
enum Body {
    Grid { center: Vec3, rod_radius: f64, spacing: f64, rods_along_x: u32, rods_along_y: u32, half: Vec3, material: usize },
    Duct { axis: Axis, center: Vec3, half_length: f64, outer: f64, inner: f64, strands: Vec<[f64; 2]>, strand_radius: f64, casing: usize, grout: usize, strand: usize },
    Sphere { center: Vec3, radius: f64, material: usize },
    Rotated { rotation: UnitQuaternion<f64>, translation: Vec3, primitive: Primitive, material: usize },
}

#[derive(Clone, Debug)]
struct SceneObject {
    aabb: Aabb,
    class: ClassLabel,
    body: Body,
}

/// A sample with its materials resolved, ready for point and ray queries.
/// Immutable; safe to share across threads.
#[derive(Clone, Debug)]
pub struct Scene {
    slab: Slab,
    bounds: Aabb,
    materials: Vec<Material>,
    bulk: usize,
    objects: Vec<SceneObject>,
}

fn offset_index(pos: f64, count: u32, spacing: f64) -> f64 {
    // distance from `pos` to the nearest of `count` evenly spaced rods centred on 0
    let first = -0.5 * (count as f64 - 1.0) * spacing;
    let k = ((pos - first) / spacing).round().clamp(0.0, count as f64 - 1.0);
    pos - (first + k * spacing)
}

impl Scene {
    pub fn new(sample: &ConcreteSample, registry: &MaterialRegistry) -> Result<Self> {
        let mut materials: Vec<Material> = Vec::new();
        let mut resolve = |name: &str| -> Result<usize> {
            if let Some(i) = materials.iter().position(|m| m.name == name) {
                return Ok(i);
            }
            materials.push(registry.lookup(name)?.clone());
            Ok(materials.len() - 1)
        };
        let bulk = resolve(&sample.bulk_material)?;
        let mut objects = Vec::with_capacity(sample.objects.len());
        for obj in &sample.objects {
            let c = obj.pose.translation;
            let body = match &obj.shape {
                ObjectShape::RebarGrid { rod_diameter, spacing, rods_along_x, rods_along_y, material } => Body::Grid {
                    center: c,
                    rod_radius: rod_diameter * 0.5,
                    spacing: *spacing,
                    rods_along_x: *rods_along_x,
                    rods_along_y: *rods_along_y,
                    half: grid_half_extents(*rod_diameter, *spacing, *rods_along_x, *rods_along_y),
                    material: resolve(material)?,
                },
                ObjectShape::TendonDuct {
                    axis,
                    length,
                    casing_diameter,
                    casing_thickness,
                    casing_material,
                    grout_material,
                    strand_material,
                    strand_diameter,
                    strand_count,
                } => Body::Duct {
                    axis: *axis,
                    center: c,
                    half_length: length * 0.5,
                    outer: casing_diameter * 0.5,
                    inner: casing_diameter * 0.5 - casing_thickness,
                    strands: strand_layout(*strand_count, *strand_diameter),
                    strand_radius: strand_diameter * 0.5,
                    casing: resolve(casing_material)?,
                    grout: resolve(grout_material)?,
                    strand: resolve(strand_material)?,
                },
                ObjectShape::AirVoid { diameter, material } => {
                    Body::Sphere { center: c, radius: diameter * 0.5, material: resolve(material)? }
                }
                ObjectShape::Unknown { primitive, material } => Body::Rotated {
                    rotation: obj.pose.unit_quaternion(),
                    translation: c,
                    primitive: *primitive,
                    material: resolve(material)?,
                },
            };
            let aabb = match &obj.shape {
                ObjectShape::Unknown { primitive, .. } => {
                    Aabb::centered(c, oriented_half_extents(&obj.pose, primitive))
                }
                _ => obj.collision_solid().aabb(),
            };
            objects.push(SceneObject { aabb, class: obj.shape.class_label(), body });
        }
        Ok(Scene { slab: sample.slab, bounds: sample.slab.aabb(), materials, bulk, objects })
    }

    /// Replace the background material; used to build diagnostic scenes.
    pub fn with_bulk_material(mut self, material: Material) -> Self {
        self.materials.push(material);
        self.bulk = self.materials.len() - 1;
        self
    }

    pub fn slab(&self) -> &Slab {
        &self.slab
    }

    fn locate(&self, p: &Vec3) -> Option<(usize, ClassLabel)> {
        for obj in &self.objects {
            if !obj.aabb.contains(p) {
                continue;
            }
            let hit = match &obj.body {
                Body::Grid { center, rod_radius, spacing, rods_along_x, rods_along_y, half, material } => {
                    let l = p - center;
                    let r2 = rod_radius * rod_radius;
                    // lower layer: rods parallel to x, spread along y
                    let lower = l.z <= 0.0 && {
                        let dy = offset_index(l.y, *rods_along_x, *spacing);
                        let dz = l.z + rod_radius;
                        l.x.abs() <= half.x && dy * dy + dz * dz <= r2
                    };
                    let upper = l.z >= 0.0 && {
                        let dx = offset_index(l.x, *rods_along_y, *spacing);
                        let dz = l.z - rod_radius;
                        l.y.abs() <= half.y && dx * dx + dz * dz <= r2
                    };
                    (lower || upper).then_some(*material)
                }
                Body::Duct { axis, center, half_length, outer, inner, strands, strand_radius, casing, grout, strand } => {
                    let l = p - center;
                    let (along, u) = match axis {
                        Axis::X => (l.x, l.y),
                        Axis::Y => (l.y, l.x),
                    };
                    let r2 = u * u + l.z * l.z;
                    if along.abs() > *half_length || r2 > outer * outer {
                        None
                    } else if r2 > inner * inner {
                        Some(*casing)
                    } else if strands
                        .iter()
                        .any(|s| (u - s[0]).powi(2) + (l.z - s[1]).powi(2) <= strand_radius * strand_radius)
                    {
                        Some(*strand)
                    } else {
                        Some(*grout)
                    }
                }
                Body::Sphere { center, radius, material } => {
                    ((p - center).norm_squared() <= radius * radius).then_some(*material)
                }
                Body::Rotated { rotation, translation, primitive, material } => {
                    let local = rotation.inverse_transform_vector(&(p - translation));
                    (primitive_sdf(primitive, &local) <= 0.0).then_some(*material)
                }
            };
            if let Some(m) = hit {
                return Some((m, obj.class));
            }
        }
        None
    }

    /// Material of the innermost component containing `p`, else the bulk.
    pub fn material_at(&self, p: &Vec3) -> Result<&Material> {
        if !self.slab.contains(p) {
            return Err(Error::Domain(format!("point {:?} lies outside the slab", p.as_slice())));
        }
        Ok(self.material_unchecked(p))
    }

    #[inline]
    pub(crate) fn material_unchecked(&self, p: &Vec3) -> &Material {
        let idx = self.locate(p).map_or(self.bulk, |(m, _)| m);
        &self.materials[idx]
    }

    /// Radiation length at `p` (mm); assumes `p` is inside the slab.
    #[inline]
    pub fn radiation_length_at(&self, p: &Vec3) -> f64 {
        self.material_unchecked(p).radiation_length
    }

    /// Segmentation class at `p`, from the kind of the containing object.
    pub fn class_at(&self, p: &Vec3) -> ClassLabel {
        self.locate(p).map_or(ClassLabel::Concrete, |(_, c)| c)
    }

    /// Material runs along a ray through the slab, by midpoint sampling of
    /// equal steps no longer than one voxel.
    pub fn path_segments(&self, origin: &Vec3, direction: &Vec3, max_length: f64) -> Vec<PathSegment<'_>> {
        let Some((t0, t1)) = self.bounds.intersect_ray(origin, direction) else {
            return Vec::new();
        };
        let (t0, t1) = (t0.max(0.0), t1.min(max_length));
        let chord = t1 - t0;
        if !(chord > 0.0) {
            return Vec::new();
        }
        let n = (chord / VOXEL_MM).ceil().max(1.0) as usize;
        let step = chord / n as f64;
        let mut out: Vec<PathSegment<'_>> = Vec::new();
        let mut run = 0usize;
        let mut current: Option<&Material> = None;
        for i in 0..n {
            let t = t0 + (i as f64 + 0.5) * step;
            let m = self.material_unchecked(&(origin + direction * t));
            match current {
                Some(c) if std::ptr::eq(c, m) => run += 1,
                Some(c) => {
                    out.push(PathSegment { length: run as f64 * step, material: c });
                    current = Some(m);
                    run = 1;
                }
                None => {
                    current = Some(m);
                    run = 1;
                }
            }
        }
        if let Some(c) = current {
            // absorb rounding so the lengths add up to the chord
            let done: f64 = out.iter().map(|s| s.length).sum();
            out.push(PathSegment { length: chord - done, material: c });
        }
        out
    }
}
