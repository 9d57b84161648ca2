use std::collections::BTreeMap;
use std::path::Path;

use super::{Scene, Vec3, VOXEL_MM};
use crate::error::{Error, Result};
use crate::materials::ClassLabel;
use crate::raw::{self, SampleFormat, Sidecar};

/// Per-voxel class indices over the slab, x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelVolume {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
    pub data: Vec<u8>,
}

impl LabelVolume {
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> ClassLabel {
        ClassLabel::from_index(self.data[self.index(ix, iy, iz)]).expect("label volume holds valid classes")
    }

    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + (ix as f64 + 0.5) * self.spacing,
            self.origin[1] + (iy as f64 + 0.5) * self.spacing,
            self.origin[2] + (iz as f64 + 0.5) * self.spacing,
        )
    }

    /// One x-y plane at height index `iz`.
    pub fn slice(&self, iz: usize) -> &[u8] {
        let n = self.dims[0] * self.dims[1];
        &self.data[iz * n..(iz + 1) * n]
    }

    pub fn count(&self, class: ClassLabel) -> usize {
        self.data.iter().filter(|&&v| v == class.index()).count()
    }

    pub fn sidecar(&self) -> Sidecar {
        let class_map: BTreeMap<String, String> =
            ClassLabel::ALL.iter().map(|c| (c.index().to_string(), c.name().to_string())).collect();
        Sidecar {
            format: SampleFormat::U8,
            dims: self.dims.to_vec(),
            spacing_mm: self.spacing,
            origin_mm: self.origin.to_vec(),
            units: "class".into(),
            cumulative_days: None,
            files: None,
            class_map,
        }
    }

    /// Writes `path` and a `.toml` sidecar beside it.
    pub fn save(&self, path: &Path) -> Result<()> {
        raw::write_u8(path, &self.data)?;
        self.sidecar().save(&raw::sidecar_path(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let side = Sidecar::load(&raw::sidecar_path(path))?;
        if side.format != SampleFormat::U8 || side.dims.len() != 3 || side.origin_mm.len() != 3 {
            return Err(Error::parse(path, "label sidecar must describe a 3-D u8 volume"));
        }
        let data = raw::read_u8(path, side.element_count())?;
        if data.iter().any(|&v| ClassLabel::from_index(v).is_none()) {
            return Err(Error::parse(path, "label value out of range"));
        }
        Ok(LabelVolume {
            dims: [side.dims[0], side.dims[1], side.dims[2]],
            spacing: side.spacing_mm,
            origin: [side.origin_mm[0], side.origin_mm[1], side.origin_mm[2]],
            data,
        })
    }
}

/// Label every voxel by the class at its centre.
pub fn rasterize_labels(scene: &Scene) -> Result<LabelVolume> {
    let slab = scene.slab();
    let dims = slab.voxel_dims()?;
    let h = slab.half();
    let mut vol = LabelVolume { dims, spacing: VOXEL_MM, origin: [-h.x, -h.y, -h.z], data: vec![0; dims.iter().product()] };
    let mut i = 0;
    for iz in 0..dims[2] {
        for iy in 0..dims[1] {
            for ix in 0..dims[0] {
                vol.data[i] = scene.class_at(&vol.voxel_center(ix, iy, iz)).index();
                i += 1;
            }
        }
    }
    Ok(vol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Axis, ConcreteSample, ObjectShape, PlacedObject, Pose, Slab};
    use crate::materials::MaterialRegistry;
    use std::f64::consts::PI;

    #[test]
    fn empty_sample_is_background() {
        let reg = MaterialRegistry::builtin();
        let s = ConcreteSample::empty(0, Slab::new([100.0, 60.0, 40.0]).unwrap());
        let vol = rasterize_labels(&Scene::new(&s, &reg).unwrap()).unwrap();
        assert_eq!(vol.dims, [50, 30, 20]);
        assert!(vol.data.iter().all(|&v| v == 0));
    }

    #[test]
    fn central_void_volume() {
        let reg = MaterialRegistry::builtin();
        let mut s = ConcreteSample::empty(0, Slab::FULL);
        s.objects.push(PlacedObject { pose: Pose::at(Vec3::zeros()), shape: ObjectShape::AirVoid { diameter: 100.0, material: "air".into() } });
        let vol = rasterize_labels(&Scene::new(&s, &reg).unwrap()).unwrap();
        let expected = 4.0 / 3.0 * PI * 25f64.powi(3);
        let got = vol.count(ClassLabel::AirVoid) as f64;
        assert!((got - expected).abs() / expected < 0.02, "{got} vs {expected}");
    }

    #[test]
    fn duct_footprint_spans_x() {
        let reg = MaterialRegistry::builtin();
        let slab = Slab::new([200.0, 200.0, 100.0]).unwrap();
        let mut s = ConcreteSample::empty(0, slab);
        s.objects.push(PlacedObject {
            pose: Pose::at(Vec3::new(0.0, 31.0, -5.0)),
            shape: ObjectShape::TendonDuct {
                axis: Axis::X,
                length: 200.0,
                casing_diameter: 60.0,
                casing_thickness: 0.5,
                casing_material: "casing_steel".into(),
                grout_material: "grout".into(),
                strand_material: "strand_steel".into(),
                strand_diameter: 15.7,
                strand_count: 4,
            },
        });
        let vol = rasterize_labels(&Scene::new(&s, &reg).unwrap()).unwrap();
        let mut footprint = 0;
        for iz in 0..vol.dims[2] {
            for iy in 0..vol.dims[1] {
                let c = vol.voxel_center(0, iy, iz);
                let inside = (c.y - 31.0).powi(2) + (c.z + 5.0).powi(2) <= 30.0 * 30.0;
                let column: Vec<ClassLabel> = (0..vol.dims[0]).map(|ix| vol.get(ix, iy, iz)).collect();
                if inside {
                    footprint += 1;
                    assert!(column.iter().all(|&c| c == ClassLabel::TendonDuct));
                } else {
                    assert!(column.iter().all(|&c| c == ClassLabel::Concrete));
                }
            }
        }
        assert!(footprint > 0);
    }

    #[test]
    fn save_and_load() {
        let reg = MaterialRegistry::builtin();
        let mut s = ConcreteSample::empty(0, Slab::new([40.0, 40.0, 20.0]).unwrap());
        s.objects.push(PlacedObject { pose: Pose::at(Vec3::zeros()), shape: ObjectShape::AirVoid { diameter: 10.0, material: "air".into() } });
        let vol = rasterize_labels(&Scene::new(&s, &reg).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.raw");
        vol.save(&p).unwrap();
        assert_eq!(LabelVolume::load(&p).unwrap(), vol);
    }
}
