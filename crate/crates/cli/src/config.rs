use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use gunopt_core::geometry::GunConfig;
use gunopt_core::iga::FieldmapGrid;
use gunopt_core::optimize::{ObjectiveSpec, OptimizerConfig};
use gunopt_core::tracker::{BunchSource, TrackingConfig};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

/// Which model a run works on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Case {
    /// benchmark electron gun built from `geometry` (or read from `model_file`)
    #[default]
    Gun,
    /// concentric spheres, inner at the cathode voltage
    SphericalCapacitor { inner: f64, outer: f64 },
    /// cylinder between two plates, bottom at the cathode voltage
    ParallelPlate { radius: f64, gap: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineStudyConfig {
    /// electrode curve degrees visited by repeated elevation from the first
    pub degrees: Vec<usize>,
    /// interval halvings applied after the first degree
    pub halvings: usize,
}

impl Default for RefineStudyConfig {
    fn default() -> Self {
        RefineStudyConfig {
            degrees: vec![7, 8, 9, 10],
            halvings: 3,
        }
    }
}

/// Versioned run configuration. Units are SI. `seed` drives every random stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub output: PathBuf,
    pub case: Case,
    pub geometry: GunConfig,
    /// gun model JSON used instead of building from `geometry`
    pub model_file: Option<PathBuf>,
    pub objective: ObjectiveSpec,
    pub optimizer: OptimizerConfig,
    pub fieldmap: FieldmapGrid,
    pub tracking: TrackingConfig,
    pub source: BunchSource,
    /// laser-spot CSV `x,y` resampled instead of the Gaussian source
    pub spot_file: Option<PathBuf>,
    pub refine_study: RefineStudyConfig,
    /// samples per boundary profile written by `solve`
    pub profile_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 1,
            output: PathBuf::from("run"),
            case: Case::Gun,
            geometry: GunConfig::default(),
            model_file: None,
            objective: ObjectiveSpec::default(),
            optimizer: OptimizerConfig::default(),
            fieldmap: FieldmapGrid::default(),
            tracking: TrackingConfig::default(),
            source: BunchSource::default(),
            spot_file: None,
            refine_study: RefineStudyConfig::default(),
            profile_samples: 400,
        }
    }
}

/// Parses a `--set` value as JSON, falling back to a plain string.
fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Applies `a.b.c=value` to a JSON tree. Every key on the path must exist.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let mut node = tree;
    for key in path.split('.') {
        node = node
            .as_object_mut()
            .and_then(|o| o.get_mut(key))
            .ok_or_else(|| CliError::Config(format!("unknown config key '{path}'")))?;
    }
    *node = parse_value(value);
    Ok(())
}

impl RunConfig {
    /// Reads the config (defaults when `path` is `None`) and applies overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
        let base: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        let mut tree = serde_json::to_value(&base)?;
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let mut cfg: RunConfig = serde_json::from_value(tree).map_err(CliError::config)?;
        cfg.optimizer.isres.seed = cfg.seed;
        cfg.tracking.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.geometry.check()?;
        self.objective.check()?;
        self.optimizer.local.check()?;
        self.fieldmap.check()?;
        self.tracking.check()?;
        if self.spot_file.is_none() {
            self.source.check()?;
        }
        for f in [&self.model_file, &self.spot_file].into_iter().flatten() {
            if !f.exists() {
                return Err(CliError::Config(format!("referenced file {} does not exist", f.display())));
            }
        }
        if self.refine_study.degrees.is_empty() {
            return Err(CliError::config("refinement study needs at least one degree"));
        }
        if self.refine_study.degrees.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::config("refinement study degrees must increase"));
        }
        Ok(())
    }

    /// Short SHA-256 of the resolved config without the output location.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    /// Header fields carried by every output file.
    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.hash(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn header(&self) -> String {
        format!("config_hash={} seed={}", self.config_hash, self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_validate() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = RunConfig::load(None, &["optimizer.local.max_evals=7".into(), "seed=42".into(), "output=\"x/y\"".into()]).unwrap();
        assert_eq!(c.optimizer.local.max_evals, 7);
        assert_eq!((c.seed, c.optimizer.isres.seed, c.tracking.seed), (42, 42, 42));
        assert_eq!(c.output, PathBuf::from("x/y"));
        let c = RunConfig::load(None, &["output=plain".into()]).unwrap();
        assert_eq!(c.output, PathBuf::from("plain"));
    }

    #[test]
    fn bad_overrides_and_versions_are_config_errors() {
        for o in ["nope=1", "optimizer.local.nope=1", "seed", "tracking.dt=-1", "version=2"] {
            assert!(matches!(RunConfig::load(None, &[o.into()]), Err(CliError::Config(_))), "{o}");
        }
    }

    #[test]
    fn hash_ignores_output_and_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
