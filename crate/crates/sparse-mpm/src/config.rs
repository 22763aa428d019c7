//! Scenario files: TOML with unit-suffixed field names.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn default_cfl() -> f64 {
    0.4
}

fn default_block_size() -> i32 {
    4
}

fn default_ppc() -> usize {
    2
}

fn default_hash_capacity() -> usize {
    1024
}

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub simulation: SimulationSection,
    pub output: OutputSection,
    pub materials: Vec<MaterialSection>,
    pub bodies: Vec<BodySection>,
    #[serde(default)]
    pub boundaries: Vec<BoundarySection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub h_m: f64,
    pub domain_min_m: [f64; 3],
    pub domain_max_m: [f64; 3],
    pub end_time_s: f64,
    #[serde(default = "default_gravity")]
    pub gravity_m_s2: [f64; 3],
    /// Tilts gravity about the y axis so the slope runs downhill along +x.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incline_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_block_size")]
    pub block_size: i32,
    #[serde(default = "default_ppc")]
    pub particles_per_cell: usize,
    #[serde(default = "default_hash_capacity")]
    pub hash_capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub frames_per_second: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKindName {
    Elastic,
    DruckerPrager,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub name: String,
    pub kind: MaterialKindName,
    pub density_kg_m3: f64,
    pub youngs_modulus_pa: f64,
    pub poisson_ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction_angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohesion_pa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySection {
    pub material: String,
    pub min_m: [f64; 3],
    pub max_m: [f64; 3],
    #[serde(default)]
    pub velocity_m_s: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySection {
    HalfSpace {
        point_m: [f64; 3],
        normal: [f64; 3],
        friction: f64,
    },
    /// ESRI ASCII grid, path relative to the scenario file.
    Heightfield { path: String, friction: f64 },
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn finite3(v: &[f64; 3]) -> bool {
    v.iter().all(|c| c.is_finite())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Checks every invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let s = &self.simulation;
        if !(s.h_m > 0.0 && s.h_m.is_finite()) {
            return Err(invalid("simulation.h_m must be positive"));
        }
        if !finite3(&s.domain_min_m) || !finite3(&s.domain_max_m) {
            return Err(invalid("simulation domain corners must be finite"));
        }
        if (0..3).any(|a| s.domain_max_m[a] <= s.domain_min_m[a]) {
            return Err(invalid("simulation.domain_max_m must exceed domain_min_m on every axis"));
        }
        if !(s.end_time_s > 0.0 && s.end_time_s.is_finite()) {
            return Err(invalid("simulation.end_time_s must be positive"));
        }
        if !finite3(&s.gravity_m_s2) {
            return Err(invalid("simulation.gravity_m_s2 must be finite"));
        }
        if let Some(theta) = s.incline_deg {
            if !(0.0..90.0).contains(&theta) {
                return Err(invalid("simulation.incline_deg must lie in [0, 90)"));
            }
        }
        if let Some(dt) = s.dt_s {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("simulation.dt_s must be positive"));
            }
        }
        if !(s.cfl > 0.0 && s.cfl <= 1.0) {
            return Err(invalid("simulation.cfl must lie in (0, 1]"));
        }
        if !(2..=16).contains(&s.block_size) {
            return Err(invalid("simulation.block_size must lie in [2, 16]"));
        }
        if s.particles_per_cell == 0 {
            return Err(invalid("simulation.particles_per_cell must be at least 1"));
        }
        if !s.hash_capacity.is_power_of_two() {
            return Err(invalid("simulation.hash_capacity must be a power of two"));
        }
        if !(self.output.frames_per_second > 0.0 && self.output.frames_per_second.is_finite()) {
            return Err(invalid("output.frames_per_second must be positive"));
        }
        if self.materials.is_empty() {
            return Err(invalid("at least one material is required"));
        }
        for (i, m) in self.materials.iter().enumerate() {
            if self.materials[..i].iter().any(|o| o.name == m.name) {
                return Err(invalid(format!("material name `{}` is used twice", m.name)));
            }
            let model = m.model().map_err(|e| invalid(format!("material `{}`: {e}", m.name)))?;
            model
                .validate()
                .map_err(|e| invalid(format!("material `{}`: {e}", m.name)))?;
        }
        if self.bodies.is_empty() {
            return Err(invalid("at least one body is required"));
        }
        for (i, b) in self.bodies.iter().enumerate() {
            if self.material_index(&b.material).is_none() {
                return Err(invalid(format!("bodies[{i}] refers to unknown material `{}`", b.material)));
            }
            if !finite3(&b.min_m) || !finite3(&b.max_m) || !finite3(&b.velocity_m_s) {
                return Err(invalid(format!("bodies[{i}] must have finite coordinates")));
            }
            if (0..3).any(|a| b.max_m[a] <= b.min_m[a]) {
                return Err(invalid(format!("bodies[{i}] region is degenerate")));
            }
            if (0..3).any(|a| b.min_m[a] < s.domain_min_m[a] || b.max_m[a] > s.domain_max_m[a]) {
                return Err(invalid(format!("bodies[{i}] region leaves the simulation domain")));
            }
        }
        for (i, b) in self.boundaries.iter().enumerate() {
            let friction = match b {
                BoundarySection::HalfSpace {
                    point_m,
                    normal,
                    friction,
                } => {
                    if !finite3(point_m) || !finite3(normal) {
                        return Err(invalid(format!("boundaries[{i}] must have finite geometry")));
                    }
                    if normal.iter().map(|c| c * c).sum::<f64>() == 0.0 {
                        return Err(invalid(format!("boundaries[{i}].normal must be non-zero")));
                    }
                    *friction
                }
                BoundarySection::Heightfield { path, friction } => {
                    if path.is_empty() {
                        return Err(invalid(format!("boundaries[{i}].path is empty")));
                    }
                    *friction
                }
            };
            if !(friction >= 0.0 && friction.is_finite()) {
                return Err(invalid(format!("boundaries[{i}].friction must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn material_index(&self, name: &str) -> Option<usize> {
        self.materials.iter().position(|m| m.name == name)
    }

    /// Gravity after applying the incline rotation.
    pub fn effective_gravity(&self) -> [f64; 3] {
        let g = self.simulation.gravity_m_s2;
        match self.simulation.incline_deg {
            None => g,
            Some(deg) => {
                let (s, c) = deg.to_radians().sin_cos();
                [g[0] * c - g[2] * s, g[1], g[0] * s + g[2] * c]
            }
        }
    }

    /// SHA-256 of the canonical serialization, ignoring the output directory.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.directory = None;
        hex::encode(Sha256::digest(canonical.to_toml_string().as_bytes()))
    }
}

impl MaterialSection {
    pub fn model(&self) -> std::result::Result<sparse_mpm_core::MaterialModel, String> {
        use sparse_mpm_core::{MaterialKind, MaterialModel};
        let kind = match self.kind {
            MaterialKindName::Elastic => {
                if self.friction_angle_deg.is_some() || self.cohesion_pa.is_some() {
                    return Err("elastic materials take no friction angle or cohesion".into());
                }
                MaterialKind::Elastic
            }
            MaterialKindName::DruckerPrager => MaterialKind::DruckerPrager {
                friction_deg: self
                    .friction_angle_deg
                    .ok_or("drucker_prager requires friction_angle_deg")?,
                cohesion: self.cohesion_pa.unwrap_or(0.0),
            },
        };
        Ok(MaterialModel {
            density: self.density_kg_m3,
            youngs_modulus: self.youngs_modulus_pa,
            poisson_ratio: self.poisson_ratio,
            kind,
        })
    }
}

/// Reads and validates a scenario file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: format!("cannot read scenario: {e}"),
    })?;
    ScenarioConfig::from_toml_str(&text, path)
}

pub fn write_config(config: &ScenarioConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, config.to_toml_string()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
name = "sliding_box"

[simulation]
h_m = 0.05
domain_min_m = [-0.1, 0.0, 0.0]
domain_max_m = [2.0, 0.4, 0.5]
end_time_s = 1.0
incline_deg = 30.0

[output]
frames_per_second = 10

[[materials]]
name = "box"
kind = "elastic"
density_kg_m3 = 1000.0
youngs_modulus_pa = 1e6
poisson_ratio = 0.3

[[bodies]]
material = "box"
min_m = [0.0, 0.05, 0.0]
max_m = [0.3, 0.35, 0.3]

[[boundaries]]
kind = "half_space"
point_m = [0.0, 0.0, 0.0]
normal = [0.0, 0.0, 1.0]
friction = 0.268
"#;

    fn parse(text: &str) -> Result<ScenarioConfig> {
        ScenarioConfig::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_sliding_box() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.simulation.incline_deg, Some(30.0));
        assert!(matches!(c.boundaries[0], BoundarySection::HalfSpace { friction, .. } if friction == 0.268));
        assert_eq!(c.simulation.cfl, 0.4);
        assert_eq!(c.simulation.block_size, 4);
        assert_eq!(c.simulation.particles_per_cell, 2);
        assert_eq!(c.bodies[0].velocity_m_s, [0.0; 3]);
        let g = c.effective_gravity();
        assert!((g[0] - 9.81 * 0.5).abs() < 1e-12);
        assert!((g[2] + 9.81 * 30f64.to_radians().cos()).abs() < 1e-12);
    }

    #[test]
    fn missing_spacing_is_named() {
        let text = MINIMAL.replace("h_m = 0.05\n", "");
        let err = parse(&text).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("h_m"), "{err}");
    }

    #[test]
    fn unknown_material_kind_lists_choices() {
        let text = MINIMAL.replace("kind = \"elastic\"", "kind = \"plasticine\"");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("elastic") && err.contains("drucker_prager"), "{err}");
    }

    #[test]
    fn validation_names_the_invariant() {
        let cases = [
            ("h_m = 0.05", "h_m = -0.05", "h_m"),
            ("frames_per_second = 10", "frames_per_second = 0", "frames_per_second"),
            ("poisson_ratio = 0.3", "poisson_ratio = 0.5", "Poisson"),
            ("max_m = [0.3, 0.35, 0.3]", "max_m = [0.0, 0.35, 0.3]", "degenerate"),
            ("friction = 0.268", "friction = -1.0", "friction"),
            ("material = \"box\"", "material = \"sand\"", "unknown material"),
        ];
        for (from, to, needle) in cases {
            let err = parse(&MINIMAL.replace(from, to)).unwrap_err().to_string();
            assert!(err.contains(needle), "{to}: {err}");
        }
        let dp = MINIMAL.replace("kind = \"elastic\"", "kind = \"drucker_prager\"");
        assert!(parse(&dp).unwrap_err().to_string().contains("friction_angle_deg"));
    }

    #[test]
    fn round_trip_and_hash() {
        let c = parse(MINIMAL).unwrap();
        let again = parse(&c.to_toml_string()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.config_hash(), again.config_hash());
        let mut moved = c.clone();
        moved.output.directory = Some("elsewhere".into());
        assert_eq!(moved.config_hash(), c.config_hash());
        let mut other = c.clone();
        other.simulation.end_time_s = 2.0;
        assert_ne!(other.config_hash(), c.config_hash());
        assert_eq!(c.config_hash().len(), 64);
    }
}
