use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::deform::RecoveryParams;
use crate::output::{CutPlane, MeshSettings};
use crate::seeding::{Axis, SeedingConfig};

use super::PipelineError;

/// Cut planes for the shell stage: either two planes containing an axis
/// through the base's bounding-box centre, or explicit planes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planes: Option<Vec<CutPlane>>,
}

/// Full pipeline configuration. Relative paths in a loaded file resolve
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub base_mesh: PathBuf,
    pub decorations: Vec<PathBuf>,
    /// Manual seed file; mutually exclusive with `seeding`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<PathBuf>,
    /// Voxels along the smallest decoration's bounding-box diagonal.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Overrides `seeding.rng_seed` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeding: Option<SeedingConfig>,
    #[serde(default)]
    pub recovery: RecoveryParams,
    #[serde(default)]
    pub mesh: MeshSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shell: Option<ShellConfig>,
}

fn default_resolution() -> usize {
    64
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            base_mesh: PathBuf::from("base.obj"),
            decorations: vec![PathBuf::from("decoration.obj")],
            seeds: None,
            resolution: default_resolution(),
            output_dir: default_output_dir(),
            rng_seed: None,
            seeding: Some(SeedingConfig::default()),
            recovery: RecoveryParams::default(),
            mesh: MeshSettings::default(),
            shell: None,
        }
    }
}

impl PipelineConfig {
    /// Reads a TOML file, or JSON when the extension is `.json`, and resolves
    /// relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        let dir = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(dir);
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, PipelineError> {
        toml::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        serde_json::to_string_pretty(self).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Joins every relative path onto `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        join(&mut self.base_mesh);
        self.decorations.iter_mut().for_each(join);
        if let Some(s) = self.seeds.as_mut() {
            join(s);
        }
        join(&mut self.output_dir);
    }

    /// Seeding parameters with the top-level seed override applied.
    pub fn effective_seeding(&self) -> Option<SeedingConfig> {
        self.seeding.clone().map(|mut s| {
            if let Some(seed) = self.rng_seed {
                s.rng_seed = seed;
            }
            s
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.decorations.is_empty() {
            return bad("at least one decoration mesh is required".into());
        }
        match (&self.seeding, &self.seeds) {
            (Some(_), Some(_)) => return bad("give either [seeding] or a seeds file, not both".into()),
            (None, None) => return bad("either [seeding] or a seeds file is required".into()),
            _ => {}
        }
        if let Some(s) = &self.seeding {
            s.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        self.recovery.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.mesh.taubin.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        if let Some(budget) = self.mesh.triangle_budget {
            if budget < 4 {
                return bad(format!("triangle budget must be at least 4, got {budget}"));
            }
        }
        if let Some(shell) = &self.shell {
            match (&shell.axis, &shell.planes) {
                (Some(_), Some(_)) | (None, None) => {
                    return bad("shell needs exactly one of `axis` or `planes`".into());
                }
                (None, Some(planes)) if planes.is_empty() => return bad("shell planes must not be empty".into()),
                _ => {}
            }
        }
        let inputs = std::iter::once(&self.base_mesh)
            .chain(&self.decorations)
            .chain(self.seeds.as_ref());
        for p in inputs {
            if !p.is_file() {
                return bad(format!("input file {} does not exist", p.display()));
            }
        }
        Ok(())
    }
}
