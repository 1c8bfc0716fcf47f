//! Versioned run configuration.
//!
//! One file describes a whole experiment; each subcommand reads the
//! sections it needs and ignores the rest. JSON and TOML are both
//! accepted, keyed on the file extension. Every section has defaults,
//! so a minimal config only names the potential.

use crate::flow::CertifySettings;
use crate::forward::{ExperimentConfig, ForwardError, RaySetConfig};
use crate::inversion::{FitMethod, InversionConfig};
use crate::ode::OdeOptions;
use crate::potential::{PotentialError, PotentialExpansion};
use crate::symbols::PairingSettings;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Schema version accepted by this build.
pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("config version {got} is not supported (this build reads version {supported})")]
    UnsupportedVersion { got: u32, supported: u32 },
    #[error("h grid needs 0 < min <= max <= 1 (got [{min}, {max}])")]
    BadHRange { min: f64, max: f64 },
    #[error("h grid needs at least 2 samples (got {0})")]
    TooFewH(usize),
    #[error("unknown fit method {0:?} (expected peeling, joint, or joint-ridge)")]
    BadMethod(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Forward(#[from] ForwardError),
}

/// Log-spaced sampling grid in h.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HGridSection {
    pub count: usize,
    pub min: f64,
    pub max: f64,
}

impl Default for HGridSection {
    fn default() -> Self {
        HGridSection {
            count: 12,
            min: 1e-3,
            max: 1e-1,
        }
    }
}

impl HGridSection {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.min > 0.0 && self.min <= self.max && self.max <= 1.0) {
            return Err(ConfigError::BadHRange {
                min: self.min,
                max: self.max,
            });
        }
        if self.count < 2 {
            return Err(ConfigError::TooFewH(self.count));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        crate::forward::log_h_grid(self.count, self.min, self.max)
    }
}

/// Inverse-pipeline knobs. Energy, dilation exponent, and decay
/// degrees are not repeated here: they come from the experiment and
/// potential sections, which are the single source of truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct InversionSection {
    /// Angular resolution of the recovered profiles.
    pub l_max: usize,
    /// Lattice nodes fitted; 0 grows the plan to the deepest layer.
    pub truncation: usize,
    /// "peeling", "joint", or "joint-ridge".
    pub method: String,
    /// Ridge strength for "joint-ridge" and for the angular solve.
    pub ridge_scale: f64,
    pub transverse_nodes: usize,
    pub chord_nodes: usize,
    pub xray_core_nodes: usize,
    pub xray_tail_nodes: usize,
}

impl Default for InversionSection {
    fn default() -> Self {
        InversionSection {
            l_max: 4,
            truncation: 0,
            method: "joint".into(),
            ridge_scale: 1e-8,
            transverse_nodes: 16,
            chord_nodes: 16,
            xray_core_nodes: 48,
            xray_tail_nodes: 32,
        }
    }
}

impl InversionSection {
    pub fn fit_method(&self) -> Result<FitMethod, ConfigError> {
        let m = FitMethod::parse(&self.method)
            .ok_or_else(|| ConfigError::BadMethod(self.method.clone()))?;
        Ok(match m {
            FitMethod::JointRidge { .. } => FitMethod::JointRidge {
                scale: self.ridge_scale,
            },
            other => other,
        })
    }
}

/// Settings for the trajectory-sample table and the non-trapping
/// certifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowSection {
    /// Signed integration span per sample (each runs both ways).
    pub time: f64,
    /// Shell samples for the trajectory table.
    pub samples: usize,
    pub certify: CertifySettings,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            time: 50.0,
            samples: 16,
            certify: CertifySettings::default(),
        }
    }
}

/// Sample layout for `potential-eval`: radial profiles along a
/// Fibonacci direction set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub directions: usize,
    pub radii: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            directions: 6,
            radii: 16,
            r_min: 0.25,
            r_max: 8.0,
        }
    }
}

/// The whole run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    /// Rayon worker threads; 0 keeps the library default.
    pub workers: usize,
    pub experiment: ExperimentConfig,
    /// Ground truth potential: forward synthesis input, and the
    /// reference for round-trip error reports.
    pub potential: PotentialExpansion,
    pub rays: RaySetConfig,
    pub h_grid: HGridSection,
    pub pairing: PairingSettings,
    pub inversion: InversionSection,
    pub flow: FlowSection,
    pub eval: EvalSection,
    pub ode: OdeOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 42,
            workers: 0,
            experiment: ExperimentConfig::with_defaults(1.0, 2.0),
            potential: PotentialExpansion {
                terms: vec![crate::potential::HomogeneousTerm {
                    rho: 2.0,
                    angular: crate::potential::AngularProfile::Isotropic { value: 1.0 },
                }],
                core_radius: 0.5,
            },
            rays: RaySetConfig::default(),
            h_grid: HGridSection::default(),
            pairing: PairingSettings::default(),
            inversion: InversionSection::default(),
            flow: FlowSection::default(),
            eval: EvalSection::default(),
            ode: OdeOptions::default(),
        }
    }
}

impl RunConfig {
    /// Cross-section validation: every constraint violation names the
    /// constraint in its message.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError::UnsupportedVersion {
                got: self.version,
                supported: CONFIG_VERSION,
            });
        }
        self.experiment.validate()?;
        self.potential.validate()?;
        self.experiment
            .validate_against(self.potential.terms[0].rho)?;
        self.rays.validate()?;
        self.h_grid.validate()?;
        self.inversion.fit_method()?;
        Ok(())
    }

    /// Assembles the inverse-pipeline configuration from the relevant
    /// sections.
    pub fn inversion_config(&self) -> Result<InversionConfig, ConfigError> {
        let inv = &self.inversion;
        Ok(InversionConfig {
            lambda: self.experiment.lambda,
            delta: self.experiment.delta,
            rhos: self.potential.orders(),
            core_radius: self.potential.core_radius,
            l_max: inv.l_max,
            truncation: inv.truncation,
            method: inv.fit_method()?,
            ridge_scale: inv.ridge_scale,
            pairing: self.pairing.clone(),
            transverse_nodes: inv.transverse_nodes,
            chord_nodes: inv.chord_nodes,
            xray_core_nodes: inv.xray_core_nodes,
            xray_tail_nodes: inv.xray_tail_nodes,
        })
    }
}

/// Reads and validates a config file; `.toml` parses as TOML,
/// everything else as JSON.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let is_toml = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let cfg: RunConfig = if is_toml {
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?
    } else {
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{AngularProfile, HomogeneousTerm};

    fn write_temp(name: &str, text: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("semiscat-config-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn default_config_is_valid_and_round_trips_as_json() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.potential, cfg.potential);
        assert_eq!(back.seed, cfg.seed);
    }

    #[test]
    fn toml_and_json_spellings_agree() {
        let json = write_temp(
            "a.json",
            r#"{"seed": 7, "potential": {"terms": [{"rho": 2.0, "angular": {"type": "isotropic", "value": 0.5}}], "core_radius": 0.5}}"#,
        );
        let toml = write_temp(
            "a.toml",
            concat!(
                "seed = 7\n",
                "[potential]\n",
                "core_radius = 0.5\n",
                "[[potential.terms]]\n",
                "rho = 2.0\n",
                "[potential.terms.angular]\n",
                "type = \"isotropic\"\n",
                "value = 0.5\n",
            ),
        );
        let a = load_config(&json).unwrap();
        let b = load_config(&toml).unwrap();
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.potential, b.potential);
        assert_eq!(a.h_grid.count, b.h_grid.count);
    }

    #[test]
    fn delta_constraint_is_reported_by_name() {
        let mut cfg = RunConfig::default();
        cfg.experiment.delta = 0.5;
        cfg.experiment.epsilon = 0.75;
        let err = cfg.validate().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("delta must exceed 1/(rho_1 - 1)"), "{msg}");
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut cfg = RunConfig::default();
        cfg.version = 99;
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::UnsupportedVersion { got: 99, .. })
        ));
    }

    #[test]
    fn bad_method_and_bad_h_grid_are_rejected() {
        let mut cfg = RunConfig::default();
        cfg.inversion.method = "magic".into();
        assert!(matches!(cfg.validate(), Err(ConfigError::BadMethod(_))));

        let mut cfg = RunConfig::default();
        cfg.h_grid.min = 0.2;
        cfg.h_grid.max = 0.1;
        assert!(matches!(cfg.validate(), Err(ConfigError::BadHRange { .. })));
    }

    #[test]
    fn inversion_config_inherits_experiment_and_potential() {
        let mut cfg = RunConfig::default();
        cfg.potential = PotentialExpansion {
            terms: vec![
                HomogeneousTerm {
                    rho: 2.0,
                    angular: AngularProfile::Isotropic { value: 1.0 },
                },
                HomogeneousTerm {
                    rho: 3.0,
                    angular: AngularProfile::Harmonics {
                        degree: 1,
                        coeffs: vec![0.0, 0.0, 0.3, 0.0],
                    },
                },
            ],
            core_radius: 0.5,
        };
        let inv = cfg.inversion_config().unwrap();
        let rhos: [f64; 2] = [2.0, 3.0];
        assert_eq!(inv.rhos, rhos);
        assert_eq!(inv.lambda, cfg.experiment.lambda);
        assert_eq!(inv.delta, cfg.experiment.delta);
        assert!(matches!(inv.method, FitMethod::Joint));
    }
}
