//! Run manifests: one TOML file naming a run's inputs and settings, with
//! command-line flags taking precedence.
//!
//! ```toml
//! model = "phone.model"
//! trace = "run1.csv"
//! measure = "run1-meter.csv"
//! scenario = "call.scenario"
//! out = "out/run1"
//! voltage = 3.7
//! readings_per_trigger = 5
//! until = 12.0
//! spike_threshold = 2.5
//! seed = 7
//!
//! [validation]
//! rel_tol = 0.05
//! abs_floor = 0.005
//! guard = 0.06
//! min_violation_run = 3
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use powerval::ValidationConfig;
use serde::Deserialize;

use crate::error::CliError;

pub const OUT_DIR_ENV: &str = "POWERVAL_OUT";
pub const DEFAULT_OUT_DIR: &str = "powerval-out";

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationOverrides {
    pub rel_tol: Option<f64>,
    pub abs_floor: Option<f64>,
    pub guard: Option<f64>,
    pub min_violation_run: Option<usize>,
}

impl ValidationOverrides {
    /// Fields set in `other` win.
    pub fn merge(&mut self, other: &ValidationOverrides) {
        self.rel_tol = other.rel_tol.or(self.rel_tol);
        self.abs_floor = other.abs_floor.or(self.abs_floor);
        self.guard = other.guard.or(self.guard);
        self.min_violation_run = other.min_violation_run.or(self.min_violation_run);
    }

    pub fn resolve(&self) -> ValidationConfig {
        let d = ValidationConfig::default();
        ValidationConfig {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_floor: self.abs_floor.unwrap_or(d.abs_floor),
            guard: self.guard.or(d.guard),
            min_violation_run: self.min_violation_run.unwrap_or(d.min_violation_run),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub model: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub measure: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub voltage: Option<f64>,
    pub readings_per_trigger: Option<usize>,
    /// End of the replayed profile on the trace clock.
    pub until: Option<f64>,
    pub spike_threshold: Option<f64>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub validation: ValidationOverrides,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: RunManifest = toml::from_str(&text).map_err(|e| CliError::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut m.model, &mut m.trace, &mut m.measure, &mut m.scenario, &mut m.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    /// Overlays every field set in `flags`.
    pub fn merge(&mut self, flags: &RunManifest) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if flags.$f.is_some() {
                    self.$f = flags.$f.clone();
                }
            )*};
        }
        take!(model, trace, measure, scenario, out, voltage, readings_per_trigger, until, spike_threshold, seed);
        self.validation.merge(&flags.validation);
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        field
            .as_deref()
            .ok_or_else(|| CliError::usage(format!("missing input: pass --{flag} or set `{flag}` in the manifest")))
    }
}
