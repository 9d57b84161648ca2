//! Material registry and radiation-length calculations.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of mass fractions in a mixture.
pub const FRACTION_SUM_TOLERANCE: f64 = 1e-9;

const BUILTIN_REGISTRY: &str = include_str!("../data/materials.toml");

/// Segmentation class of a voxel or material.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum ClassLabel {
    Concrete = 0,
    Rebar = 1,
    TendonDuct = 2,
    AirVoid = 3,
    Unknown = 4,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Concrete,
        ClassLabel::Rebar,
        ClassLabel::TendonDuct,
        ClassLabel::AirVoid,
        ClassLabel::Unknown,
    ];

    /// Object classes; everything except the concrete background.
    pub const FOREGROUND: [ClassLabel; 4] = [
        ClassLabel::Rebar,
        ClassLabel::TendonDuct,
        ClassLabel::AirVoid,
        ClassLabel::Unknown,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: u8) -> Option<Self> {
        Self::ALL.get(index as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Concrete => "concrete",
            ClassLabel::Rebar => "rebar",
            ClassLabel::TendonDuct => "tendon_duct",
            ClassLabel::AirVoid => "air_void",
            ClassLabel::Unknown => "unknown",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// g/cm^3
    pub density: f64,
    /// Radiation length in mm at `density`.
    pub radiation_length: f64,
    pub class_label: ClassLabel,
}

impl Material {
    /// A material that never scatters. Useful for diagnostics.
    pub fn vacuum() -> Self {
        Material {
            name: "vacuum".into(),
            density: f64::MIN_POSITIVE,
            radiation_length: f64::INFINITY,
            class_label: ClassLabel::AirVoid,
        }
    }
}

/// Radiation length in g/cm^2 from the single-element approximation.
pub fn mass_radiation_length_element(z: u32, a: f64) -> Result<f64> {
    if z < 1 || !(a > 0.0) {
        return Err(Error::Domain(format!("element requires Z >= 1 and A > 0 (Z={z}, A={a})")));
    }
    let z = z as f64;
    Ok(716.4 * a / (z * (z + 1.0) * (287.0 / z.sqrt()).ln()))
}

/// Radiation length in mm of a single element at the given density.
pub fn radiation_length_element(z: u32, a: f64, density: f64) -> Result<f64> {
    if !(density > 0.0) {
        return Err(Error::Domain(format!("density must be positive, got {density}")));
    }
    Ok(mass_radiation_length_element(z, a)? / density * 10.0)
}

/// Radiation length in mm of a mixture given `(mass_fraction, X0 [g/cm^2])`
/// pairs, using Bragg additivity.
pub fn radiation_length_mixture(components: &[(f64, f64)], density: f64) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::Validation("mixture has no components".into()));
    }
    if !(density > 0.0) {
        return Err(Error::Domain(format!("density must be positive, got {density}")));
    }
    let sum: f64 = components.iter().map(|&(w, _)| w).sum();
    if (sum - 1.0).abs() > FRACTION_SUM_TOLERANCE {
        return Err(Error::Validation(format!("mass fractions sum to {sum}, expected 1")));
    }
    let mut inverse = 0.0;
    for &(w, x0) in components {
        if !(x0 > 0.0) || w < 0.0 {
            return Err(Error::Validation(format!(
                "component needs w >= 0 and X0 > 0 (w={w}, X0={x0})"
            )));
        }
        inverse += w / x0;
    }
    Ok(1.0 / inverse / density * 10.0)
}

#[derive(Debug, Deserialize)]
struct RegistryFile {
    material: Vec<MaterialEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialEntry {
    name: String,
    density: f64,
    class: ClassLabel,
    element: Option<ElementEntry>,
    composition: Option<Vec<ComponentEntry>>,
    x0_mm: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ElementEntry {
    z: u32,
    a: f64,
}

#[derive(Debug, Deserialize)]
struct ComponentEntry {
    z: u32,
    a: f64,
    w: f64,
}

impl MaterialEntry {
    fn resolve(self) -> Result<Material> {
        if !(self.density > 0.0) {
            return Err(Error::Validation(format!("material `{}`: density must be positive", self.name)));
        }
        let radiation_length = match (self.element, self.composition, self.x0_mm) {
            (Some(e), None, None) => radiation_length_element(e.z, e.a, self.density)?,
            (None, Some(c), None) => {
                let pairs = c
                    .iter()
                    .map(|c| Ok((c.w, mass_radiation_length_element(c.z, c.a)?)))
                    .collect::<Result<Vec<_>>>()?;
                radiation_length_mixture(&pairs, self.density)
                    .map_err(|e| Error::Validation(format!("material `{}`: {e}", self.name)))?
            }
            (None, None, Some(x0)) if x0 > 0.0 => x0,
            _ => {
                return Err(Error::Validation(format!(
                    "material `{}` needs exactly one of element, composition or a positive x0_mm",
                    self.name
                )))
            }
        };
        Ok(Material { name: self.name, density: self.density, radiation_length, class_label: self.class })
    }
}

/// Immutable set of named materials.
#[derive(Clone, Debug)]
pub struct MaterialRegistry {
    materials: Vec<Material>,
    by_name: HashMap<String, usize>,
}

/// Names the geometry and transport code relies on.
pub const REQUIRED_MATERIALS: [&str; 13] = [
    "concrete",
    "rebar_steel",
    "casing_steel",
    "hdpe",
    "hdpp",
    "grout",
    "strand_steel",
    "air",
    "water",
    "aluminium",
    "iron",
    "lead",
    "uranium",
];

impl MaterialRegistry {
    /// The registry shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_REGISTRY).expect("builtin material registry is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: RegistryFile = toml::from_str(text).map_err(|e| Error::parse("<materials>", e))?;
        let materials = file.material.into_iter().map(MaterialEntry::resolve).collect::<Result<Vec<_>>>()?;
        Self::from_materials(materials)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path, message),
            other => other,
        })
    }

    pub fn from_materials(materials: Vec<Material>) -> Result<Self> {
        let mut by_name = HashMap::with_capacity(materials.len());
        for (i, m) in materials.iter().enumerate() {
            if !(m.density > 0.0) || !(m.radiation_length > 0.0) {
                return Err(Error::Validation(format!("material `{}` has non-positive density or X0", m.name)));
            }
            if by_name.insert(m.name.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate material `{}`", m.name)));
            }
        }
        Ok(MaterialRegistry { materials, by_name })
    }

    pub fn lookup(&self, name: &str) -> Result<&Material> {
        self.by_name
            .get(name)
            .map(|&i| &self.materials[i])
            .ok_or_else(|| Error::UnknownMaterial(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    /// Checks that every material the geometry generator may reference exists.
    pub fn check_required(&self) -> Result<()> {
        for name in REQUIRED_MATERIALS {
            self.lookup(name)?;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Material> {
        self.materials.iter()
    }

    pub fn len(&self) -> usize {
        self.materials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.materials.is_empty()
    }
}

impl Default for MaterialRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
