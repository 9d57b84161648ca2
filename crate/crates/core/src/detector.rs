//! Four-module scintillating-fibre tracker.
//!
//! Two modules sit above the sample and two below. Each module carries an
//! x-measuring and a y-measuring fibre plane at the same height. A muon is
//! recorded when all eight planes fire; the incoming and outgoing lines are
//! the straight lines through the two quantised hits on each side.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::muon_source::MuonState;
use crate::raw::{self, SampleFormat, Sidecar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSpec {
    /// Active area (mm), centred on the z axis.
    pub area: [f64; 2],
    /// Distance between the lower upstream and upper downstream modules (mm).
    pub gap: f64,
    /// Distance between the two modules of a pair (mm).
    pub pair_separation: f64,
    /// Height of the midpoint between the pairs (mm).
    pub center_z: f64,
    pub pitch: f64,
    /// Probability that a single plane registers a crossing.
    pub efficiency: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec { area: [1066.0, 1066.0], gap: 530.0, pair_separation: 100.0, center_z: 0.0, pitch: 2.0, efficiency: 1.0 }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(format!("detector: {m}")));
        if !(self.pitch > 0.0) || !(self.gap > 0.0) || !(self.pair_separation > 0.0) {
            return fail(format!("pitch, gap and pair separation must be positive: {self:?}"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return fail(format!("efficiency {} outside (0, 1]", self.efficiency));
        }
        for a in self.area {
            let n = a / self.pitch;
            if !(a > 0.0) || (n - n.round()).abs() > 1e-9 {
                return fail(format!("pitch {} does not divide the extent {a}", self.pitch));
            }
        }
        Ok(())
    }

    /// Module heights, top to bottom.
    pub fn module_z(&self) -> [f64; 4] {
        let inner = self.gap * 0.5;
        let outer = inner + self.pair_separation;
        [self.center_z + outer, self.center_z + inner, self.center_z - inner, self.center_z - outer]
    }

    pub fn fibers(&self, axis: usize) -> usize {
        (self.area[axis] / self.pitch).round() as usize
    }

    fn plane_origin(&self, axis: usize) -> f64 {
        -0.5 * self.area[axis]
    }

    /// Check that the sample fits between the upstream and downstream pairs.
    pub fn check_clearance(&self, slab_half_height: f64) -> Result<()> {
        let z = self.module_z();
        if z[1] <= slab_half_height || z[2] >= -slab_half_height {
            return Err(Error::Validation(format!(
                "detector modules at {z:?} intersect a slab of half-height {slab_half_height}"
            )));
        }
        Ok(())
    }
}

/// Fibre index and centre for a crossing at `x`, or `None` outside the plane.
pub fn quantize_hit(x: f64, origin: f64, pitch: f64, n_fibers: usize) -> Option<(usize, f64)> {
    let f = ((x - origin) / pitch).floor();
    if !(f >= 0.0) || f >= n_fibers as f64 {
        return None;
    }
    Some((f as usize, origin + (f + 0.5) * pitch))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub point: Vec3,
    /// Unit vector.
    pub direction: Vec3,
}

impl Line {
    pub fn at(&self, t: f64) -> Vec3 {
        self.point + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPair {
    pub incoming: Line,
    pub outgoing: Line,
    pub time_offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rejection {
    /// The straight path leaves the active area of a module.
    Geometry { module: usize },
    /// A plane failed to fire.
    Inefficiency { module: usize },
    /// The muon ranged out inside the sample.
    Stopped,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Detection {
    Track(TrackPair),
    Rejected(Rejection),
}

/// Quantised crossing of one module.
fn module_hit<R: Rng + ?Sized>(
    state: &MuonState,
    z: f64,
    module: usize,
    spec: &DetectorSpec,
    rng: &mut R,
) -> std::result::Result<Vec3, Rejection> {
    if state.direction.z == 0.0 {
        return Err(Rejection::Geometry { module });
    }
    let t = (z - state.position.z) / state.direction.z;
    let p = state.position + state.direction * t;
    let mut hit = Vec3::new(0.0, 0.0, z);
    for axis in 0..2 {
        let (_, c) = quantize_hit(p[axis], spec.plane_origin(axis), spec.pitch, spec.fibers(axis))
            .ok_or(Rejection::Geometry { module })?;
        hit[axis] = c;
    }
    if spec.efficiency < 1.0 {
        for _ in 0..2 {
            if rng.random::<f64>() >= spec.efficiency {
                return Err(Rejection::Inefficiency { module });
            }
        }
    }
    Ok(hit)
}

/// Record a muon in all four modules and fit the incoming and outgoing lines.
///
/// `entry` and `exit` are the states where the muon enters and leaves the
/// sample; the paths outside the sample are straight.
pub fn record_and_fit<R: Rng + ?Sized>(
    entry: &MuonState,
    exit: Option<&MuonState>,
    spec: &DetectorSpec,
    rng: &mut R,
) -> Detection {
    let Some(exit) = exit else {
        return Detection::Rejected(Rejection::Stopped);
    };
    let z = spec.module_z();
    let mut hits = [Vec3::zeros(); 4];
    for (m, hit) in hits.iter_mut().enumerate() {
        let state = if m < 2 { entry } else { exit };
        match module_hit(state, z[m], m, spec, rng) {
            Ok(h) => *hit = h,
            Err(r) => return Detection::Rejected(r),
        }
    }
    Detection::Track(TrackPair {
        incoming: Line { point: hits[1], direction: (hits[1] - hits[0]).normalize() },
        outgoing: Line { point: hits[2], direction: (hits[3] - hits[2]).normalize() },
        time_offset: entry.time_offset,
    })
}

pub const TRACK_RECORD_LEN: usize = 13;

/// Writes track pairs as little-endian f32 records of incoming point and
/// direction, outgoing point and direction, then time, with a sidecar.
pub fn write_tracks(path: &Path, tracks: &[TrackPair]) -> Result<()> {
    let mut data = Vec::with_capacity(tracks.len() * TRACK_RECORD_LEN);
    for t in tracks {
        for v in [t.incoming.point, t.incoming.direction, t.outgoing.point, t.outgoing.direction] {
            data.extend(v.iter().map(|&c| c as f32));
        }
        data.push(t.time_offset as f32);
    }
    raw::write_f32(path, &data)?;
    Sidecar {
        format: SampleFormat::F32le,
        dims: vec![TRACK_RECORD_LEN, tracks.len()],
        spacing_mm: 0.0,
        origin_mm: vec![],
        units: "in_point_mm[3] in_dir[3] out_point_mm[3] out_dir[3] time_s".into(),
        cumulative_days: None,
        files: None,
        class_map: Default::default(),
    }
    .save(&raw::sidecar_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn straight(position: Vec3, direction: Vec3) -> MuonState {
        MuonState { position, direction: direction.normalize(), momentum: 3000.0, time_offset: 0.0 }
    }

    #[test]
    fn quantization_examples() {
        assert_eq!(quantize_hit(3.1, -533.0, 2.0, 533), Some((268, 4.0)));
        assert_eq!(quantize_hit(-533.0, -533.0, 2.0, 533), Some((0, -532.0)));
        assert_eq!(quantize_hit(4.0, -533.0, 2.0, 533), Some((268, 4.0)));
        assert_eq!(quantize_hit(533.0, -533.0, 2.0, 533), None);
        assert_eq!(quantize_hit(-533.5, -533.0, 2.0, 533), None);
        assert_eq!(quantize_hit(f64::NAN, -533.0, 2.0, 533), None);
    }

    #[test]
    fn spec_layout() {
        let spec = DetectorSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.module_z(), [365.0, 265.0, -265.0, -365.0]);
        assert_eq!(spec.fibers(0), 533);
        assert!(spec.check_clearance(100.0).is_ok());
        assert!(spec.check_clearance(300.0).is_err());
        assert!(DetectorSpec { pitch: 3.0, ..spec.clone() }.validate().is_err());
        assert!(DetectorSpec { efficiency: 0.0, ..spec }.validate().is_err());
    }

    #[test]
    fn vertical_central_muon() {
        let spec = DetectorSpec::default();
        let entry = straight(Vec3::new(0.0, 0.0, 100.0), -Vec3::z());
        let exit = straight(Vec3::new(0.0, 0.0, -100.0), -Vec3::z());
        let Detection::Track(t) = record_and_fit(&entry, Some(&exit), &spec, &mut stream(0, &[])) else {
            panic!("rejected")
        };
        assert_eq!(t.incoming.direction, -Vec3::z());
        assert_eq!(t.outgoing.direction, -Vec3::z());
        assert_eq!(t.incoming.point, Vec3::new(0.0, 0.0, 265.0));
    }

    #[test]
    fn geometric_miss_and_stopped() {
        let spec = DetectorSpec::default();
        let entry = straight(Vec3::new(0.0, 0.0, 100.0), -Vec3::z());
        let exit = straight(Vec3::new(0.0, 0.0, -100.0), Vec3::new(3.0, 0.0, -1.0));
        let d = record_and_fit(&entry, Some(&exit), &spec, &mut stream(0, &[]));
        assert_eq!(d, Detection::Rejected(Rejection::Geometry { module: 3 }));
        assert_eq!(record_and_fit(&entry, None, &spec, &mut stream(0, &[])), Detection::Rejected(Rejection::Stopped));
    }

    #[test]
    fn fit_passes_through_quantized_hits() {
        let spec = DetectorSpec::default();
        let mut rng = stream(4, &[]);
        for _ in 0..1000 {
            let p = Vec3::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0), 100.0);
            let d = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), -1.0);
            let entry = straight(p, d);
            let Detection::Track(t) = record_and_fit(&entry, Some(&entry), &spec, &mut rng) else { continue };
            for (line, z) in [(t.incoming, 365.0), (t.outgoing, -365.0)] {
                let s = (z - line.point.z) / line.direction.z;
                let q = line.at(s);
                for axis in 0..2 {
                    let (_, c) = quantize_hit(q[axis], -533.0, 2.0, 533).unwrap();
                    assert!((c - q[axis]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn partial_efficiency_loses_tracks() {
        let spec = DetectorSpec { efficiency: 0.9, ..Default::default() };
        let entry = straight(Vec3::new(0.0, 0.0, 100.0), -Vec3::z());
        let mut rng = stream(9, &[]);
        let n = 20_000;
        let kept = (0..n).filter(|_| matches!(record_and_fit(&entry, Some(&entry), &spec, &mut rng), Detection::Track(_))).count();
        // eight planes
        let expected = 0.9f64.powi(8);
        let sd = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((kept as f64 / n as f64 - expected).abs() < 5.0 * sd);
    }

    #[test]
    fn angular_resolution() {
        // Quantisation errors of two hits 100 mm apart are independent and
        // uniform, so each fitted slope carries sqrt(2)·(pitch/√12)/100.
        let spec = DetectorSpec::default();
        let mut rng = stream(21, &[]);
        let (mut sum2, mut n) = (0.0, 0usize);
        for _ in 0..100_000 {
            let p = Vec3::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0), 0.0);
            let d = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), -1.0);
            let m = straight(p, d);
            let Detection::Track(t) = record_and_fit(&m, Some(&m), &spec, &mut rng) else { panic!() };
            let fitted = t.incoming.direction.x / -t.incoming.direction.z;
            sum2 += (fitted - d.x).powi(2);
            n += 1;
        }
        let rms = (sum2 / n as f64).sqrt();
        let expected = 2f64.sqrt() * (2.0 / 12f64.sqrt()) / 100.0;
        assert!((rms - expected).abs() / expected < 0.02, "{rms} vs {expected}");
    }

    #[test]
    fn acceptance_monotone_in_zenith() {
        let spec = DetectorSpec::default();
        let mut rng = stream(0, &[]);
        for (x, y, phi) in [(0.0, 0.0, 0.3), (400.0, -200.0, 1.0), (-450.0, 450.0, 4.0)] {
            let mut previous = true;
            for k in 0..900 {
                let theta = k as f64 * 0.1f64.to_radians();
                let d = Vec3::new(theta.sin() * f64::cos(phi), theta.sin() * f64::sin(phi), -theta.cos());
                let m = straight(Vec3::new(x, y, 0.0), d);
                let accepted = matches!(record_and_fit(&m, Some(&m), &spec, &mut rng), Detection::Track(_));
                assert!(previous || !accepted, "accepted at {theta} after a rejection");
                previous = accepted;
            }
        }
    }

    #[test]
    fn track_export() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tracks.raw");
        let m = straight(Vec3::zeros(), -Vec3::z());
        let Detection::Track(t) = record_and_fit(&m, Some(&m), &DetectorSpec::default(), &mut stream(0, &[])) else { panic!() };
        write_tracks(&p, &[t, t]).unwrap();
        let back = raw::read_f32(&p, 2 * TRACK_RECORD_LEN).unwrap();
        assert_eq!(back[2], 265.0);
        assert_eq!(back[5], -1.0);
        assert_eq!(Sidecar::load(&raw::sidecar_path(&p)).unwrap().dims, vec![13, 2]);
    }
}
