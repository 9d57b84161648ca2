//! Point-of-closest-approach events and voxel accumulation.
//!
//! Angles are accumulated as integer multiples of [`ANGLE_QUANTUM`], so a
//! grid's contents do not depend on the order in which events arrive or on
//! how partial grids are merged.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{Line, TrackPair};
use crate::error::{Error, Result};
use crate::geometry::{Slab, Vec3, VOXEL_MM};
use crate::muon_source::SECONDS_PER_DAY;
use crate::raw::{self, SampleFormat, Sidecar};

/// Cross-product norm below which two tracks count as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-12;

/// Resolution of accumulated angles (radians).
pub const ANGLE_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterEvent {
    pub point: Vec3,
    /// Radians, in `[0, π]`.
    pub angle: f64,
    pub time_offset: f64,
}

/// Parameters `(s, t)` of the closest points `p1 + s·d1` and `p2 + t·d2`.
fn closest_parameters(p1: &Vec3, d1: &Vec3, p2: &Vec3, d2: &Vec3) -> (f64, f64) {
    let w = p1 - p2;
    let a = d1.dot(d1);
    let b = d1.dot(d2);
    let c = d2.dot(d2);
    let d = d1.dot(&w);
    let e = d2.dot(&w);
    let den = a * c - b * b;
    ((b * e - c * d) / den, (a * e - b * d) / den)
}

/// Midpoint of the shortest segment between the two track lines and the angle
/// between their directions. Parallel tracks give `None`.
pub fn poca(pair: &TrackPair) -> Option<ScatterEvent> {
    let Line { point: p1, direction: d1 } = pair.incoming;
    let Line { point: p2, direction: d2 } = pair.outgoing;
    let cross = d1.cross(&d2).norm();
    if !(cross >= PARALLEL_TOLERANCE) {
        return None;
    }
    let (s, t) = closest_parameters(&p1, &d1, &p2, &d2);
    let (mut a, mut b) = (p1 + d1 * s, p2 + d2 * t);
    // one correction step from the new anchors removes most of the
    // cancellation left by distant reference points
    let (ds, dt) = closest_parameters(&a, &d1, &b, &d2);
    a += d1 * ds;
    b += d2 * dt;
    Some(ScatterEvent { point: (a + b) * 0.5, angle: cross.atan2(d1.dot(&d2)), time_offset: pair.time_offset })
}

#[inline]
pub fn quantize_angle(angle: f64) -> u64 {
    (angle / ANGLE_QUANTUM).round() as u64
}

/// One event reduced to its voxel and quantised angle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Deposit {
    pub voxel: u32,
    pub angle: u64,
}

/// Per-voxel event count and angle sum over the slab.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VoxelGrid {
    pub dims: [usize; 3],
    pub count: Vec<u32>,
    pub sum: Vec<u64>,
    origin: [i64; 3],
}

impl VoxelGrid {
    pub fn for_slab(slab: &Slab) -> Result<Self> {
        let dims = slab.voxel_dims()?;
        let n: usize = dims.iter().product();
        if n > u32::MAX as usize {
            return Err(Error::Range(format!("{n} voxels exceed the addressable grid")));
        }
        let h = slab.half();
        // extents are whole multiples of the voxel, so the corner is integral in mm
        let origin = [-h.x.round() as i64, -h.y.round() as i64, -h.z.round() as i64];
        Ok(VoxelGrid { dims, count: vec![0; n], sum: vec![0; n], origin })
    }

    pub fn spacing(&self) -> f64 {
        VOXEL_MM
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin.map(|v| v as f64)
    }

    pub fn len(&self) -> usize {
        self.count.len()
    }

    pub fn is_empty(&self) -> bool {
        self.count.is_empty()
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.dims[0] * (iy + self.dims[1] * iz)
    }

    /// Voxel containing `p`. Points on the upper faces belong to the last voxel.
    pub fn voxel_of(&self, p: &Vec3) -> Option<usize> {
        let mut idx = [0usize; 3];
        for k in 0..3 {
            let u = (p[k] - self.origin[k] as f64) / VOXEL_MM;
            if !(u >= 0.0 && u <= self.dims[k] as f64) {
                return None;
            }
            idx[k] = (u.floor() as usize).min(self.dims[k] - 1);
        }
        Some(self.index(idx[0], idx[1], idx[2]))
    }

    pub fn deposit_of(&self, event: &ScatterEvent) -> Option<Deposit> {
        self.voxel_of(&event.point).map(|v| Deposit { voxel: v as u32, angle: quantize_angle(event.angle) })
    }

    pub fn deposit(&mut self, d: Deposit) -> Result<()> {
        let i = d.voxel as usize;
        let (Some(c), Some(s)) = (self.count[i].checked_add(1), self.sum[i].checked_add(d.angle)) else {
            return Err(Error::Range(format!("voxel {i} accumulator overflow")));
        };
        self.count[i] = c;
        self.sum[i] = s;
        Ok(())
    }

    /// Add events inside the slab; returns how many fell outside and were dropped.
    pub fn accumulate<'a>(&mut self, events: impl IntoIterator<Item = &'a ScatterEvent>) -> Result<u64> {
        let mut dropped = 0;
        for e in events {
            match self.deposit_of(e) {
                Some(d) => self.deposit(d)?,
                None => dropped += 1,
            }
        }
        Ok(dropped)
    }

    pub fn merge(&mut self, other: &VoxelGrid) -> Result<()> {
        if self.dims != other.dims || self.origin != other.origin {
            return Err(Error::Validation(format!("cannot merge grids {:?} and {:?}", self.dims, other.dims)));
        }
        for i in 0..self.len() {
            let (Some(c), Some(s)) = (self.count[i].checked_add(other.count[i]), self.sum[i].checked_add(other.sum[i])) else {
                return Err(Error::Range(format!("voxel {i} accumulator overflow")));
            };
            self.count[i] = c;
            self.sum[i] = s;
        }
        Ok(())
    }

    /// Mean angle of voxel `i` in mrad; zero where no events landed.
    pub fn mean_mrad(&self, i: usize) -> f64 {
        if self.count[i] == 0 {
            0.0
        } else {
            self.sum[i] as f64 * ANGLE_QUANTUM * 1e3 / self.count[i] as f64
        }
    }

    pub fn values(&self) -> Vec<f32> {
        (0..self.len()).map(|i| self.mean_mrad(i) as f32).collect()
    }

    pub fn slice(&self, z_index: usize, cumulative_days: u32) -> ImageSlice {
        let n = self.dims[0] * self.dims[1];
        let data = (z_index * n..(z_index + 1) * n).map(|i| self.mean_mrad(i) as f32).collect();
        ImageSlice { dims: [self.dims[0], self.dims[1]], z_index, cumulative_days, data }
    }

    pub fn slices(&self, cumulative_days: u32) -> Vec<ImageSlice> {
        (0..self.dims[2]).map(|z| self.slice(z, cumulative_days)).collect()
    }

    pub fn sidecar(&self, cumulative_days: Option<u32>) -> Sidecar {
        Sidecar {
            format: SampleFormat::F32le,
            dims: self.dims.to_vec(),
            spacing_mm: VOXEL_MM,
            origin_mm: self.origin().to_vec(),
            units: "mrad".into(),
            cumulative_days,
            files: None,
            class_map: Default::default(),
        }
    }

    /// Writes the mean-angle volume and its sidecar.
    pub fn save_volume(&self, path: &Path, cumulative_days: Option<u32>) -> Result<()> {
        raw::write_f32(path, &self.values())?;
        self.sidecar(cumulative_days).save(&raw::sidecar_path(path))
    }
}

/// One x-y plane of mean angles (mrad), x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageSlice {
    pub dims: [usize; 2],
    pub z_index: usize,
    pub cumulative_days: u32,
    pub data: Vec<f32>,
}

impl ImageSlice {
    pub fn file_name(z_index: usize) -> String {
        format!("slice_{z_index:03}.raw")
    }
}

/// Cumulative grid for one day boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub cumulative_days: u32,
    pub grid: VoxelGrid,
    pub dropped: u64,
}

pub fn validate_boundaries(days: &[u32]) -> Result<()> {
    if days.first() == Some(&0) || days.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation(format!("day boundaries must be positive and strictly ascending: {days:?}")));
    }
    Ok(())
}

/// Snapshot `k` holds exactly the events with `time_offset` before
/// `day_boundaries[k]` days.
pub fn slice_series(events: &[ScatterEvent], day_boundaries: &[u32], empty: &VoxelGrid) -> Result<Vec<Snapshot>> {
    validate_boundaries(day_boundaries)?;
    let mut buckets: Vec<Vec<&ScatterEvent>> = vec![Vec::new(); day_boundaries.len()];
    for e in events {
        let k = day_boundaries.partition_point(|&d| d as f64 * SECONDS_PER_DAY <= e.time_offset);
        if k < buckets.len() {
            buckets[k].push(e);
        }
    }
    let mut grid = empty.clone();
    let mut dropped = 0;
    let mut out = Vec::with_capacity(day_boundaries.len());
    for (bucket, &day) in buckets.iter().zip(day_boundaries) {
        dropped += grid.accumulate(bucket.iter().copied())?;
        out.push(Snapshot { cumulative_days: day, grid: grid.clone(), dropped });
    }
    Ok(out)
}
