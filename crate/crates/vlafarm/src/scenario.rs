//! Scenario files: JSON documents deserialized into [`ScenarioScript`], with
//! optional statechart sources resolved relative to the file.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;
use vlafarm_core::control::{ScenarioError, ScenarioScript};
use vlafarm_core::dsl::{has_errors, parse, validate, StatechartSpec};
use vlafarm_core::sim::SimOptions;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("scenario: {0}")]
    Invalid(#[from] ScenarioError),
    #[error("{path}: {reason}")]
    Dsl { path: PathBuf, reason: String },
}

/// A statechart source as read from disk, kept verbatim so run directories
/// can carry an exact copy.
#[derive(Clone, Debug)]
pub struct SpecSource {
    pub path: PathBuf,
    pub text: String,
    pub spec: StatechartSpec,
}

#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub script: ScenarioScript,
    pub worker_spec: Option<SpecSource>,
    pub farmlet_spec: Option<SpecSource>,
}

impl LoadedScenario {
    /// A validated scenario with no statechart overrides.
    pub fn from_script(script: ScenarioScript) -> Result<Self, LoadError> {
        script.validate()?;
        Ok(LoadedScenario {
            script,
            worker_spec: None,
            farmlet_spec: None,
        })
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            worker_spec: self.worker_spec.as_ref().map(|s| s.spec.clone()),
            farmlet_spec: self.farmlet_spec.as_ref().map(|s| s.spec.clone()),
            ..SimOptions::default()
        }
    }

    /// SHA-256 over the canonical script JSON and any statechart sources.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        // serializing a plain data struct cannot fail
        h.update(serde_json::to_vec(&self.script).unwrap_or_default());
        for s in [&self.worker_spec, &self.farmlet_spec].into_iter().flatten() {
            h.update(b"\0");
            h.update(s.text.as_bytes());
        }
        hex::encode(h.finalize())
    }
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads and checks a statechart file: parse errors and validation errors
/// both reject it; warnings do not.
pub fn load_spec(path: &Path) -> Result<SpecSource, LoadError> {
    let text = read(path)?;
    let spec = parse(&text).map_err(|e| LoadError::Dsl {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let diags = validate(&spec);
    if has_errors(&diags) {
        let reason = diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        return Err(LoadError::Dsl {
            path: path.to_path_buf(),
            reason,
        });
    }
    Ok(SpecSource {
        path: path.to_path_buf(),
        text,
        spec,
    })
}

/// Parses scenario JSON. Statechart paths resolve against `base_dir`.
pub fn from_json(text: &str, origin: &Path, base_dir: &Path) -> Result<LoadedScenario, LoadError> {
    let script: ScenarioScript = serde_json::from_str(text).map_err(|source| LoadError::Json {
        path: origin.to_path_buf(),
        source,
    })?;
    script.validate()?;
    let resolve = |p: &Option<String>| p.as_ref().map(|p| load_spec(&base_dir.join(p))).transpose();
    let worker_spec = resolve(&script.dsl.worker)?;
    let farmlet_spec = resolve(&script.dsl.farmlet)?;
    Ok(LoadedScenario {
        script,
        worker_spec,
        farmlet_spec,
    })
}

pub fn load(path: &Path) -> Result<LoadedScenario, LoadError> {
    let text = read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    from_json(&text, path, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default_scenario() {
        let s = from_json("{}", Path::new("mem"), Path::new(".")).unwrap();
        assert_eq!(s.script, ScenarioScript::default());
    }

    #[test]
    fn unknown_field_is_rejected() {
        let err = from_json(r#"{"sede": 3}"#, Path::new("mem"), Path::new(".")).unwrap_err();
        assert!(matches!(err, LoadError::Json { .. }), "{err}");
    }

    #[test]
    fn command_past_duration_is_rejected() {
        let text = r#"{"duration": 5, "commands": [{"t": 6, "cmd": {"kind": "stop"}}]}"#;
        let err = from_json(text, Path::new("mem"), Path::new(".")).unwrap_err();
        assert!(matches!(err, LoadError::Invalid(_)), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = LoadedScenario::from_script(ScenarioScript::default()).unwrap();
        let b = LoadedScenario::from_script(ScenarioScript {
            seed: 9,
            ..ScenarioScript::default()
        })
        .unwrap();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
