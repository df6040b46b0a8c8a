//! Scenario configs: a versioned TOML schema describing surfaces, checks,
//! sweeps, and tolerances, plus the canonical content hash that identifies a
//! run. Parse errors are line-anchored; semantic validation happens before
//! any check executes.

use crate::spaceform::Curvature;
use crate::surfaces::{Family, SurfaceSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Error, Debug)]
pub enum ScenarioError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation error: {0}")]
    Invalid(String),
}

/// Curvature key accepted as the integer K in {-1, 0, 1} or as a name.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(transparent)]
pub struct CurvatureKey(pub Curvature);

impl Default for CurvatureKey {
    fn default() -> Self {
        CurvatureKey(Curvature::Flat)
    }
}

impl<'de> Deserialize<'de> for CurvatureKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Name(String),
        }
        let curv = match Raw::deserialize(d)? {
            Raw::Int(k) => Curvature::from_k(k)
                .ok_or_else(|| D::Error::custom(format!("curvature must be -1, 0 or 1, got {k}")))?,
            Raw::Name(s) => match s.as_str() {
                "hyperbolic" => Curvature::Hyperbolic,
                "flat" | "euclidean" => Curvature::Flat,
                "spherical" => Curvature::Spherical,
                other => {
                    return Err(D::Error::custom(format!("unknown curvature name {other:?}")))
                }
            },
        };
        Ok(CurvatureKey(curv))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub name: String,
    pub family: Family,
    #[serde(default)]
    pub curvature: CurvatureKey,
    pub ball_radius: Option<f64>,
    pub contact_angle: Option<f64>,
    pub cap_radius: Option<f64>,
    pub center_offset: Option<f64>,
    pub h_target: Option<f64>,
    pub neck_param: Option<f64>,
    pub amplitude: Option<f64>,
}

impl SurfaceConfig {
    pub fn to_spec(&self) -> SurfaceSpec {
        let mut spec = SurfaceSpec::new(
            self.family,
            self.curvature.0,
            self.ball_radius.unwrap_or(1.0),
        );
        if let Some(v) = self.contact_angle {
            spec.contact_angle = v;
        }
        if let Some(v) = self.cap_radius {
            spec.cap_radius = v;
        }
        if let Some(v) = self.center_offset {
            spec.center_offset = v;
        }
        if let Some(v) = self.h_target {
            spec.h_target = v;
        }
        if let Some(v) = self.neck_param {
            spec.neck_param = v;
        }
        if let Some(v) = self.amplitude {
            spec.amplitude = v;
        }
        spec.name = self.name.clone();
        spec
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Field,
    Minkowski,
    MinkowskiHigher,
    Balance,
    Robin,
    Laplacian,
    Phi,
    AuxPhi,
    BoundaryUmbilic,
    Spectrum,
    Pairing,
    Hkr,
    Volume,
    Radial,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Field => "field",
            CheckKind::Minkowski => "minkowski",
            CheckKind::MinkowskiHigher => "minkowski_higher",
            CheckKind::Balance => "balance",
            CheckKind::Robin => "robin",
            CheckKind::Laplacian => "laplacian",
            CheckKind::Phi => "phi",
            CheckKind::AuxPhi => "aux_phi",
            CheckKind::BoundaryUmbilic => "boundary_umbilic",
            CheckKind::Spectrum => "spectrum",
            CheckKind::Pairing => "pairing",
            CheckKind::Hkr => "hkr",
            CheckKind::Volume => "volume",
            CheckKind::Radial => "radial",
        }
    }

    /// Checks whose result does not depend on a direction vector.
    pub fn directionless(self) -> bool {
        matches!(
            self,
            CheckKind::AuxPhi | CheckKind::Spectrum | CheckKind::Volume | CheckKind::Radial
        )
    }

    /// Default tolerance when neither the check nor the run sets one.
    pub fn default_tol(self) -> f64 {
        match self {
            CheckKind::Field => 1e-8,
            CheckKind::Radial => 1e-9,
            CheckKind::Robin => 1e-7,
            CheckKind::Volume => 1e-5,
            CheckKind::Spectrum => 1e-2,
            CheckKind::Pairing => 0.03,
            _ => 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Directions {
    Named(String),
    Explicit(Vec<Vec<f64>>),
}

impl Default for Directions {
    fn default() -> Self {
        Directions::Named("canonical".into())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub kind: CheckKind,
    pub surface: String,
    #[serde(default)]
    pub directions: Directions,
    /// Laplacian identity name (`eq-x`, `eq-nu`, `eq-phi`, `stab-eq4`, ...).
    pub variant: Option<String>,
    /// Symmetric-function order for `minkowski_higher`.
    pub k: Option<usize>,
    pub tol: Option<f64>,
    pub levels: Option<Vec<usize>>,
    /// Expected outcome label (`stable`, `unstable`, `equality`,
    /// `strict_inequality`, `refused`); checked when present.
    pub expect: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Contact angles applied to every cap-family surface by the `sweep`
    /// subcommand; each angle clones the surface and its checks.
    #[serde(default)]
    pub contact_angles: Vec<f64>,
}

fn default_seed() -> u64 {
    42
}
fn default_levels() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_rule_order() -> usize {
    8
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
    pub tol: Option<f64>,
    #[serde(default = "default_rule_order")]
    pub rule_order: usize,
    #[serde(default)]
    pub surface: Vec<SurfaceConfig>,
    #[serde(default)]
    pub check: Vec<CheckConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let scn: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let mut names = std::collections::HashSet::new();
        for s in &self.surface {
            if s.name.is_empty() {
                return Err(ScenarioError::Invalid("surface with empty name".into()));
            }
            if !names.insert(s.name.as_str()) {
                return Err(ScenarioError::Invalid(format!(
                    "duplicate surface name {:?}",
                    s.name
                )));
            }
        }
        for (i, c) in self.check.iter().enumerate() {
            if !names.contains(c.surface.as_str()) {
                return Err(ScenarioError::Invalid(format!(
                    "check #{i} ({}) references unknown surface {:?}",
                    c.kind.name(),
                    c.surface
                )));
            }
            if c.kind == CheckKind::MinkowskiHigher && c.k.is_none() {
                return Err(ScenarioError::Invalid(format!(
                    "check #{i}: minkowski_higher requires k"
                )));
            }
            if c.kind == CheckKind::Laplacian {
                let v = c.variant.as_deref().ok_or_else(|| {
                    ScenarioError::Invalid(format!("check #{i}: laplacian requires a variant"))
                })?;
                if crate::identities::LaplacianWhich::parse(v).is_none() {
                    return Err(ScenarioError::Invalid(format!(
                        "check #{i}: unknown laplacian variant {v:?}"
                    )));
                }
            }
            if let Directions::Explicit(list) = &c.directions {
                if list.iter().any(|a| a.len() != 3) {
                    return Err(ScenarioError::Invalid(format!(
                        "check #{i}: direction vectors must have 3 components"
                    )));
                }
            } else if let Directions::Named(n) = &c.directions {
                if n != "canonical" {
                    return Err(ScenarioError::Invalid(format!(
                        "check #{i}: unknown direction set {n:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Canonical content hash: SHA-256 of the canonical JSON serialization,
    /// so formatting and comments never change the identity of a run.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Expands the sweep axes: every surface with a contact angle is cloned
    /// per angle, and checks referencing it are replicated.
    pub fn expand_sweep(&self) -> Result<Scenario, ScenarioError> {
        let sweep = self.sweep.clone().unwrap_or_default();
        if sweep.contact_angles.is_empty() {
            return Err(ScenarioError::Invalid(
                "sweep requires [sweep] contact_angles".into(),
            ));
        }
        let sweeps_caps = |f: Family| {
            matches!(
                f,
                Family::SphericalCap | Family::ExteriorCap | Family::PerturbedCap
            )
        };
        let mut out = self.clone();
        out.surface.clear();
        out.check.clear();
        out.sweep = None;
        for s in &self.surface {
            if !sweeps_caps(s.family) {
                out.surface.push(s.clone());
                for c in self.check.iter().filter(|c| c.surface == s.name) {
                    out.check.push(c.clone());
                }
                continue;
            }
            for (j, &theta) in sweep.contact_angles.iter().enumerate() {
                let mut clone = s.clone();
                clone.name = format!("{}@theta{j}", s.name);
                clone.contact_angle = Some(theta);
                for c in self.check.iter().filter(|c| c.surface == s.name) {
                    let mut c = c.clone();
                    c.surface = clone.name.clone();
                    out.check.push(c);
                }
                out.surface.push(clone);
            }
        }
        out.validate()?;
        Ok(out)
    }
}
