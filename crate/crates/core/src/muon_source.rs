//! Cosmic-muon initial states and exposure bookkeeping.
//!
//! The momentum spectrum is a log-normal stand-in tuned to a 3–4 GeV/c mean;
//! the zenith distribution follows the usual cos²θ law.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::rng::{domain, stream};

pub const MINUTES_PER_DAY: f64 = 1440.0;
pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuonState {
    /// mm
    pub position: Vec3,
    /// Unit vector; downward-going muons have `z < 0`.
    pub direction: Vec3,
    /// MeV/c
    pub momentum: f64,
    /// Seconds since the start of the exposure.
    pub time_offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureSpec {
    /// muons cm⁻² min⁻¹
    pub flux: f64,
    /// mm²
    pub plane_area: f64,
    pub duration_days: f64,
}

/// Number of muons crossing the generation plane during the exposure,
/// `round(flux · area[cm²] · duration[min])`.
pub fn exposure_count(spec: &ExposureSpec) -> Result<u64> {
    if !(spec.flux > 0.0) || !(spec.plane_area > 0.0) || !(spec.duration_days >= 0.0) {
        return Err(Error::Validation(format!("exposure needs positive flux and area and non-negative duration: {spec:?}")));
    }
    let mean = expected_count(spec);
    if !mean.is_finite() || mean >= u64::MAX as f64 {
        return Err(Error::Range(format!("exposure of {} days overflows the muon counter", spec.duration_days)));
    }
    Ok(mean.round() as u64)
}

fn expected_count(spec: &ExposureSpec) -> f64 {
    spec.flux * (spec.plane_area / 100.0) * (spec.duration_days * MINUTES_PER_DAY)
}

/// Poisson-fluctuated count, keyed by `seed`.
pub fn exposure_count_poisson(spec: &ExposureSpec, seed: u64) -> Result<u64> {
    exposure_count(spec)?;
    let mean = expected_count(spec);
    if mean == 0.0 {
        return Ok(0);
    }
    let poisson = Poisson::new(mean).map_err(|e| Error::Range(e.to_string()))?;
    let draw: f64 = poisson.sample(&mut stream(seed, &[domain::EXPOSURE]));
    Ok(draw as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    /// Height of the generation plane (mm). `None` places it on the slab's top face.
    pub plane_z: Option<f64>,
    /// Plane extents (mm), centred on the z axis. `None` uses the slab footprint.
    pub plane_size: Option<[f64; 2]>,
    pub theta_max_deg: f64,
    /// MeV/c
    pub momentum_median: f64,
    pub momentum_sigma_log: f64,
    /// Draws below this are rejected and redrawn (MeV/c).
    pub momentum_min: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            plane_z: None,
            plane_size: None,
            theta_max_deg: 70.0,
            momentum_median: 3000.0,
            momentum_sigma_log: 0.55,
            momentum_min: 100.0,
        }
    }
}

/// A generation plane with concrete bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationPlane {
    pub z: f64,
    pub size: [f64; 2],
}

impl GenerationPlane {
    pub fn area(&self) -> f64 {
        self.size[0] * self.size[1]
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.theta_max_deg > 0.0
            && self.theta_max_deg <= 90.0
            && self.momentum_median > 0.0
            && self.momentum_sigma_log >= 0.0
            && self.momentum_min >= 0.0
            && self.momentum_min < self.momentum_median
            && self.plane_size.is_none_or(|s| s[0] > 0.0 && s[1] > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid generator spec: {self:?}")))
        }
    }

    pub fn plane(&self, slab_size: [f64; 3]) -> GenerationPlane {
        GenerationPlane {
            z: self.plane_z.unwrap_or(slab_size[2] * 0.5),
            size: self.plane_size.unwrap_or([slab_size[0], slab_size[1]]),
        }
    }
}

/// Zenith cosine with density ∝ cos²θ sinθ on `[0, θ_max]`, by inversion:
/// `u = cosθ` has density ∝ u² on `[cos θ_max, 1]`.
fn sample_cos_zenith<R: Rng + ?Sized>(rng: &mut R, theta_max: f64) -> f64 {
    let c3 = theta_max.cos().max(0.0).powi(3);
    let r: f64 = rng.random();
    (c3 + r * (1.0 - c3)).cbrt()
}

fn sample_momentum<R: Rng + ?Sized>(rng: &mut R, spec: &GeneratorSpec) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let p = spec.momentum_median * (spec.momentum_sigma_log * z).exp();
        if p > spec.momentum_min {
            return p;
        }
    }
}

/// Draw one muon on the generation plane. `time_offset` is left at zero.
pub fn sample_muon<R: Rng + ?Sized>(rng: &mut R, spec: &GeneratorSpec, plane: &GenerationPlane) -> MuonState {
    let x = (rng.random::<f64>() - 0.5) * plane.size[0];
    let y = (rng.random::<f64>() - 0.5) * plane.size[1];
    let cos_t = sample_cos_zenith(rng, spec.theta_max_deg.to_radians());
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let phi = TAU * rng.random::<f64>();
    let direction = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), -cos_t);
    MuonState {
        position: Vec3::new(x, y, plane.z),
        direction,
        momentum: sample_momentum(rng, spec),
        time_offset: 0.0,
    }
}
