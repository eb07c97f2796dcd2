//! File-backed pipeline configuration.
//!
//! A TOML document mirrors every CLI flag. Flags are applied as a second
//! table merged over the file, so anything given on the command line wins.
//!
//! ```toml
//! output = "out.png"
//! airbangs = false
//!
//! [input]
//! image = "a.png"
//! landmarks = "a.landmarks.json"
//! labels = "a.labels.png"
//!
//! [reference]
//! image = "b.png"
//! landmarks = "b.landmarks.json"
//! labels = "b.labels.png"
//!
//! [transfer]
//! alpha = 0.95
//! beta = 30.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Settings, Stage, StageError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacePaths {
    pub image: PathBuf,
    pub landmarks: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: FacePaths,
    pub reference: FacePaths,
    pub output: PathBuf,
    #[serde(default)]
    pub dump_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub settings: Settings,
}

/// Recursively merges `over` into `base`; tables merge, other values replace.
pub fn merge_tables(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge_tables(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        Self::from_toml_with_overrides(Some(text), toml::Table::new())
    }

    /// Parses `base` (if any), merges `overrides` on top and deserializes.
    pub fn from_toml_with_overrides(base: Option<&str>, overrides: toml::Table) -> Result<Self, PipelineError> {
        let config_err = |msg: String| PipelineError::new(Stage::Config, StageError::Config(msg));
        let mut table = match base {
            Some(text) => text.parse::<toml::Table>().map_err(|e| config_err(e.to_string()))?,
            None => toml::Table::new(),
        };
        merge_tables(&mut table, overrides);
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))
    }

    pub fn load(path: &Path, overrides: toml::Table) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            PipelineError::new(Stage::Config, StageError::Config(format!("cannot read {}: {e}", path.display())))
        })?;
        Self::from_toml_with_overrides(Some(&text), overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that every referenced input file exists and parameters are in
    /// range.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let files = [
            ("input image", &self.input.image),
            ("input landmarks", &self.input.landmarks),
            ("input labels", &self.input.labels),
            ("reference image", &self.reference.image),
            ("reference landmarks", &self.reference.landmarks),
            ("reference labels", &self.reference.labels),
        ];
        for (what, path) in files {
            if !path.is_file() {
                return Err(PipelineError::new(
                    Stage::Config,
                    StageError::MissingFile { what, path: path.clone() },
                ));
            }
        }
        self.settings.validate()
    }
}
