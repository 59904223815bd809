//! Scenario configuration: TOML schema, validation, and command-line
//! overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

/// Parsed scenario file. Each runner picks the section it needs; a missing
/// section is a configuration error at dispatch time.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Label carried into the summary; defaults to the file stem or the
    /// preset name.
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub surface: Option<SurfaceConfig>,
    #[serde(default)]
    pub class: Option<ClassConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub model: SurfaceName,
    pub modes: usize,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub dt: DtPolicy,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_green_check_every")]
    pub green_check_every: usize,
    pub initial: InitialData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceName {
    Sphere,
    Torus,
}

/// Step-size policy for the surface flow.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtPolicy {
    pub init: f64,
    /// Factor on the stability cap `min(F) / lambda_max`.
    pub safety: f64,
    pub growth: f64,
    pub min: f64,
}

impl Default for DtPolicy {
    fn default() -> Self {
        Self { init: 1e-3, safety: 1.0, growth: 1.25, min: 1e-12 }
    }
}

/// Acceptance and termination thresholds for the surface flow.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub density_floor: f64,
    pub calabi_slack: f64,
    pub calabi_floor: f64,
    pub volume_slack: f64,
    pub blowup_sup: f64,
    /// Early-out threshold on the curvature deviation; zero runs to t_end.
    pub convergence_sup: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            density_floor: 1e-6,
            calabi_slack: 1e-10,
            calabi_floor: 1e-20,
            volume_slack: 1e-8,
            blowup_sup: 1e4,
            convergence_sup: 0.0,
        }
    }
}

/// Initial potential: either a seeded random draw or an explicit mode list.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Random {
        seed: u64,
        /// Target sup norm of the initial curvature deviation.
        amplitude: f64,
    },
    Modes {
        entries: Vec<ModeEntry>,
        /// Rescale the listed coefficients so the density stays at or above
        /// this floor; omit to use the coefficients verbatim.
        #[serde(default)]
        rescale_min_density: Option<f64>,
    },
}

/// One spectral coefficient: `degree` on the sphere, `p`/`q` on the torus.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeEntry {
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub p: Option<i32>,
    #[serde(default)]
    pub q: Option<i32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    /// Built-in lattice name, or a name defined in `lattice_file`.
    pub lattice: String,
    /// Optional JSON catalog with extra lattices.
    #[serde(default)]
    pub lattice_file: Option<PathBuf>,
    /// Start class; omit to draw a random positive divisor combination.
    #[serde(default)]
    pub omega: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_class_t_end")]
    pub t_end: f64,
    #[serde(default = "default_class_dt")]
    pub dt: f64,
    #[serde(default = "default_class_record_every")]
    pub record_every: usize,
    /// Scale the start onto the volume-one slice before integrating.
    #[serde(default = "default_true")]
    pub normalize: bool,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub prefix: Option<String>,
}

fn default_t_end() -> f64 {
    1.0
}

fn default_record_every() -> usize {
    16
}

fn default_green_check_every() -> usize {
    8
}

fn default_class_t_end() -> f64 {
    5.0
}

fn default_class_dt() -> f64 {
    1e-3
}

fn default_class_record_every() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// Snapshot of every config default, kept next to the default functions so
/// the catalog listing cannot drift from the parser.
pub fn defaults_json() -> serde_json::Value {
    let dt = DtPolicy::default();
    let tol = Tolerances::default();
    serde_json::json!({
        "surface": {
            "t_end": default_t_end(),
            "record_every": default_record_every(),
            "green_check_every": default_green_check_every(),
            "dt": { "init": dt.init, "safety": dt.safety, "growth": dt.growth, "min": dt.min },
            "tolerances": {
                "density_floor": tol.density_floor,
                "calabi_slack": tol.calabi_slack,
                "calabi_floor": tol.calabi_floor,
                "volume_slack": tol.volume_slack,
                "blowup_sup": tol.blowup_sup,
                "convergence_sup": tol.convergence_sup,
            },
        },
        "class": {
            "t_end": default_class_t_end(),
            "dt": default_class_dt(),
            "record_every": default_class_record_every(),
            "normalize": default_true(),
        },
    })
}

/// Command-line overrides applied after the file is parsed.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub t_end: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ConfigFile = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("cannot parse {}: {e}", path.display())))?;
        if cfg.scenario.is_none() {
            cfg.scenario = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned());
        }
        Ok(cfg)
    }

    /// Fold `--out`, `--seed` and `--t-end` into the parsed file. The seed
    /// only applies to random initial data.
    pub fn apply(&mut self, ov: &Overrides) {
        if let Some(dir) = &ov.out {
            self.output.dir = Some(dir.clone());
        }
        if let Some(t) = ov.t_end {
            if let Some(s) = &mut self.surface {
                s.t_end = t;
            }
            if let Some(c) = &mut self.class {
                c.t_end = t;
            }
        }
        if let Some(seed) = ov.seed {
            if let Some(s) = &mut self.surface {
                if let InitialData::Random { seed: old, .. } = &mut s.initial {
                    *old = seed;
                }
            }
            if let Some(c) = &mut self.class {
                c.seed = Some(seed);
            }
        }
    }

    pub fn surface(&self) -> Result<&SurfaceConfig, CliError> {
        self.surface
            .as_ref()
            .ok_or_else(|| CliError::config("config has no [surface] section"))
    }

    pub fn class(&self) -> Result<&ClassConfig, CliError> {
        self.class
            .as_ref()
            .ok_or_else(|| CliError::config("config has no [class] section"))
    }

    pub fn scenario_name(&self) -> &str {
        self.scenario.as_deref().unwrap_or("unnamed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn surface_round_trip_with_defaults() {
        let text = r#"
            scenario = "demo"
            [surface]
            model = "torus"
            modes = 64
            t_end = 2.0
            [surface.initial]
            kind = "random"
            seed = 7
            amplitude = 0.05
        "#;
        let cfg: ConfigFile = toml::from_str(text).unwrap();
        let s = cfg.surface().unwrap();
        assert_eq!(s.model, SurfaceName::Torus);
        assert_eq!(s.modes, 64);
        assert_eq!(s.dt.safety, 1.0);
        assert_eq!(s.tolerances.blowup_sup, 1e4);
        assert!(matches!(s.initial, InitialData::Random { seed: 7, .. }));
    }

    #[test]
    fn mode_entries_parse() {
        let text = r#"
            [surface]
            model = "sphere"
            modes = 32
            [surface.initial]
            kind = "modes"
            rescale_min_density = 0.5
            entries = [{ degree = 2, coeff = 0.1 }]
        "#;
        let cfg: ConfigFile = toml::from_str(text).unwrap();
        match &cfg.surface().unwrap().initial {
            InitialData::Modes { entries, rescale_min_density } => {
                assert_eq!(entries.len(), 1);
                assert_eq!(entries[0].degree, Some(2));
                assert_eq!(*rescale_min_density, Some(0.5));
            }
            other => panic!("unexpected initial {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
            [surface]
            model = "torus"
            modes = 16
            warp_factor = 9
            [surface.initial]
            kind = "random"
            seed = 1
            amplitude = 0.1
        "#;
        assert!(toml::from_str::<ConfigFile>(text).is_err());
    }

    #[test]
    fn overrides_apply_where_they_should() {
        let text = r#"
            [class]
            lattice = "CP2"
            omega = [1.4142135623730951]
        "#;
        let mut cfg: ConfigFile = toml::from_str(text).unwrap();
        cfg.apply(&Overrides {
            out: Some(PathBuf::from("/tmp/x")),
            seed: Some(9),
            t_end: Some(0.5),
        });
        assert_eq!(cfg.output.dir.as_deref(), Some(Path::new("/tmp/x")));
        let c = cfg.class().unwrap();
        assert_eq!(c.t_end, 0.5);
        assert_eq!(c.seed, Some(9));
    }
}
