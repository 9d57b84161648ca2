//! Stepped multiple-Coulomb-scattering transport through a sample.
//!
//! Each step of at most `step` mm draws two independent Gaussian deflections
//! in the planes orthogonal to the current direction, with width
//! `(15 MeV / p) · sqrt(L / X0)` for the step length `L` and the radiation
//! length `X0` at the step midpoint. Summed over steps the projected angle
//! variance is `(15/p)² · Σ Lᵢ/X0ᵢ`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Scene, Vec3};
use crate::muon_source::MuonState;

/// Scattering constant in MeV.
pub const SCATTERING_CONSTANT_MEV: f64 = 15.0;
pub const MUON_MASS_MEV: f64 = 105.658_375_5;

/// Gaussian-core width of the projected scattering angle (radians) for a
/// muon of momentum `p` (MeV/c, β = 1) crossing `length` mm of material with
/// radiation length `x0` mm.
pub fn scattering_sigma(p: f64, length: f64, x0: f64) -> Result<f64> {
    if !(p > 0.0) || !(length > 0.0) || !(x0 > 0.0) {
        return Err(Error::Domain(format!("scattering_sigma needs p, L, X0 > 0 (p={p}, L={length}, X0={x0})")));
    }
    Ok(sigma_unchecked(p, length, x0))
}

#[inline]
fn sigma_unchecked(p: f64, length: f64, x0: f64) -> f64 {
    SCATTERING_CONSTANT_MEV / p * (length / x0).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailModel {
    /// Gaussian core only.
    #[default]
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransportOptions {
    /// Maximum step length (mm).
    pub step: f64,
    /// Continuous energy loss at `dedx` MeV cm²/g times the local density.
    pub energy_loss: bool,
    pub dedx: f64,
    pub tail_model: TailModel,
    /// Keep every step point in the result.
    pub record_path: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { step: 2.0, energy_loss: false, dedx: 2.0, tail_model: TailModel::Gaussian, record_path: false }
    }
}

impl TransportOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.dedx >= 0.0) {
            return Err(Error::Validation(format!("transport step must be positive and dedx non-negative: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationResult {
    /// State where the muon enters the slab.
    pub entry: MuonState,
    /// State on the face where the muon leaves the slab; `None` if it stopped.
    pub exit: Option<MuonState>,
    pub path: Option<Vec<Vec3>>,
}

/// Orthonormal pair spanning the plane perpendicular to `d`.
#[inline]
fn transverse_basis(d: &Vec3) -> (Vec3, Vec3) {
    let reference = if d.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = reference.cross(d).normalize();
    let v = d.cross(&u);
    (u, v)
}

/// Apply projected deflections `(a, b)` (radians) to a unit direction.
#[inline]
pub fn deflect(d: &Vec3, a: f64, b: f64) -> Vec3 {
    let (u, v) = transverse_basis(d);
    (d + u * a.tan() + v * b.tan()).normalize()
}

/// Propagate a muon through the sample.
///
/// The muon's straight line must intersect the slab; it is moved to the
/// entry point and stepped until it leaves through any face.
pub fn propagate<R: Rng + ?Sized>(
    muon: &MuonState,
    scene: &Scene,
    rng: &mut R,
    options: &TransportOptions,
) -> Result<PropagationResult> {
    let bounds = scene.slab().aabb();
    let (t_in, t_out) = bounds
        .intersect_ray(&muon.position, &muon.direction)
        .filter(|&(t0, t1)| t1 > t0.max(0.0))
        .ok_or_else(|| Error::Precondition("muon does not enter the slab".into()))?;
    let mut state = *muon;
    state.position = muon.position + muon.direction * t_in.max(0.0);
    let entry = state;
    let _ = t_out;

    let mut path = options.record_path.then(|| vec![state.position]);
    let half = scene.slab().half();
    loop {
        let d = state.direction;
        // distance to the face the muon is heading for
        let mut remaining = f64::INFINITY;
        let mut face = (0usize, 0.0f64);
        for i in 0..3 {
            if d[i] != 0.0 {
                let target = half[i].copysign(d[i]);
                let t = (target - state.position[i]) / d[i];
                if t < remaining {
                    remaining = t;
                    face = (i, target);
                }
            }
        }
        let remaining = remaining.max(0.0);
        let last = remaining <= options.step;
        let ds = if last { remaining } else { options.step };

        if ds > 0.0 {
            let midpoint = state.position + d * (0.5 * ds);
            let material = scene.material_unchecked(&midpoint);
            if last {
                state.position += d * ds;
                state.position[face.0] = face.1;
            } else {
                state.position += d * ds;
            }
            if options.energy_loss {
                let de = options.dedx * material.density * ds / 10.0;
                let e = (state.momentum.powi(2) + MUON_MASS_MEV.powi(2)).sqrt() - de;
                if e <= MUON_MASS_MEV {
                    state.momentum = 0.0;
                    if let Some(p) = path.as_mut() {
                        p.push(state.position);
                    }
                    return Ok(PropagationResult { entry, exit: None, path });
                }
                state.momentum = (e * e - MUON_MASS_MEV * MUON_MASS_MEV).sqrt();
            }
            let sigma = sigma_unchecked(state.momentum, ds, material.radiation_length);
            if sigma > 0.0 {
                let a: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                let b: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                state.direction = deflect(&d, a, b);
            }
            if let Some(p) = path.as_mut() {
                p.push(state.position);
            }
        }
        if last {
            return Ok(PropagationResult { entry, exit: Some(state), path });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConcreteSample, Slab};
    use crate::materials::{Material, MaterialRegistry};
    use crate::rng::stream;

    fn homogeneous() -> Scene {
        Scene::new(&ConcreteSample::empty(0, Slab::FULL), &MaterialRegistry::builtin()).unwrap()
    }

    fn vertical(p: f64) -> MuonState {
        MuonState { position: Vec3::new(0.0, 0.0, 365.0), direction: Vec3::new(0.0, 0.0, -1.0), momentum: p, time_offset: 0.0 }
    }

    #[test]
    fn sigma_values() {
        assert!((scattering_sigma(3000.0, 7.0, 7.0).unwrap() - 0.005).abs() < 1e-15);
        let concrete = 0.005 * (200.0f64 / 115.5).sqrt();
        assert!((scattering_sigma(3000.0, 200.0, 115.5).unwrap() - concrete).abs() < 1e-15);
        assert!((concrete - 6.58e-3).abs() < 5e-6);
        let rebar = scattering_sigma(3000.0, 20.0, 18.03).unwrap();
        assert!((rebar - 5.27e-3).abs() < 5e-6, "{rebar}");
        assert!(matches!(scattering_sigma(0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(scattering_sigma(1.0, -1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn vacuum_leaves_direction_untouched() {
        let scene = homogeneous().with_bulk_material(Material::vacuum());
        let mut m = vertical(3000.0);
        m.direction = Vec3::new(0.1, -0.2, -1.0).normalize();
        let r = propagate(&m, &scene, &mut stream(1, &[]), &TransportOptions::default()).unwrap();
        let exit = r.exit.unwrap();
        assert_eq!(exit.direction, m.direction);
        assert_eq!(exit.position.z, -100.0);
    }

    #[test]
    fn non_entering_muon_is_rejected() {
        let scene = homogeneous();
        let m = MuonState { position: Vec3::new(600.0, 0.0, 365.0), ..vertical(3000.0) };
        assert!(matches!(
            propagate(&m, &scene, &mut stream(1, &[]), &TransportOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn direction_stays_unit_and_exits_on_face() {
        let scene = homogeneous();
        let opts = TransportOptions { record_path: true, ..Default::default() };
        for i in 0..200 {
            let mut rng = stream(5, &[i]);
            let m = MuonState { momentum: 300.0, ..vertical(0.0) };
            let r = propagate(&m, &scene, &mut rng, &opts).unwrap();
            let exit = r.exit.unwrap();
            assert!((exit.direction.norm() - 1.0).abs() < 1e-12);
            let h = scene.slab().half();
            assert!((0..3).any(|k| exit.position[k].abs() == h[k]));
            let path = r.path.unwrap();
            assert!(path.windows(2).all(|w| (w[1] - w[0]).norm() <= 2.0 + 1e-9));
        }
    }

    #[test]
    fn energy_loss_reduces_momentum() {
        let scene = homogeneous();
        let opts = TransportOptions { energy_loss: true, ..Default::default() };
        let r = propagate(&vertical(3000.0), &scene, &mut stream(1, &[]), &opts).unwrap();
        let p = r.exit.unwrap().momentum;
        // ~2 MeV cm²/g × 2.3 g/cm³ × 20 cm = 92 MeV
        assert!(p < 3000.0 && p > 2890.0, "{p}");
        let stopped = propagate(&vertical(150.0), &scene, &mut stream(1, &[]), &opts).unwrap();
        assert!(stopped.exit.is_none());
    }
}
