//! Bundled scenario presets.

use crate::config::{
    ClassConfig, ConfigFile, DtPolicy, InitialData, ModeEntry, OutputConfig, SurfaceConfig,
    SurfaceName, Tolerances,
};

/// The presets shipped with the binary, in stable order.
///
/// Each comes back as a complete parsed config; the caller may still apply
/// command-line overrides on top.
pub fn builtin_scenarios() -> Vec<(&'static str, &'static str, ConfigFile)> {
    vec![
        (
            "torus_relax",
            "flat torus, two cosine modes rescaled to density one half, run to t = 2",
            torus_relax(),
        ),
        (
            "sphere_relax",
            "round sphere, random degree 2..16 start at curvature amplitude 0.05, run to t = 2",
            sphere_relax(),
        ),
        (
            "class_blowup_attractor",
            "one-point blow-up lattice, interior start falling into the critical class",
            class_blowup_attractor(),
        ),
        (
            "class_flat_chern",
            "flat-Chern lattice, stationary trajectory over t in [0, 10]",
            class_flat_chern(),
        ),
    ]
}

pub fn find(name: &str) -> Option<ConfigFile> {
    builtin_scenarios()
        .into_iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, _, cfg)| cfg)
}

fn torus_relax() -> ConfigFile {
    ConfigFile {
        scenario: Some("torus_relax".into()),
        surface: Some(SurfaceConfig {
            model: SurfaceName::Torus,
            modes: 64,
            t_end: 2.0,
            dt: DtPolicy { safety: 4.5, ..DtPolicy::default() },
            tolerances: Tolerances { convergence_sup: 1e-10, ..Tolerances::default() },
            record_every: 16,
            green_check_every: 8,
            initial: InitialData::Modes {
                entries: vec![
                    ModeEntry { degree: None, p: Some(1), q: Some(0), coeff: 0.1 },
                    ModeEntry { degree: None, p: Some(0), q: Some(1), coeff: 0.05 },
                ],
                rescale_min_density: Some(0.5),
            },
        }),
        class: None,
        output: OutputConfig::default(),
    }
}

fn sphere_relax() -> ConfigFile {
    ConfigFile {
        scenario: Some("sphere_relax".into()),
        surface: Some(SurfaceConfig {
            model: SurfaceName::Sphere,
            modes: 64,
            t_end: 2.0,
            dt: DtPolicy::default(),
            tolerances: Tolerances { convergence_sup: 1e-10, ..Tolerances::default() },
            record_every: 16,
            green_check_every: 8,
            initial: InitialData::Random { seed: 7, amplitude: 0.05 },
        }),
        class: None,
        output: OutputConfig::default(),
    }
}

fn class_blowup_attractor() -> ConfigFile {
    ConfigFile {
        scenario: Some("class_blowup_attractor".into()),
        surface: None,
        class: Some(ClassConfig {
            lattice: "CP2_blowup1".into(),
            lattice_file: None,
            omega: Some(vec![2.0, -0.8]),
            seed: None,
            t_end: 5.0,
            dt: 1e-3,
            record_every: 50,
            normalize: true,
        }),
        output: OutputConfig::default(),
    }
}

fn class_flat_chern() -> ConfigFile {
    ConfigFile {
        scenario: Some("class_flat_chern".into()),
        surface: None,
        class: Some(ClassConfig {
            lattice: "K3_rank3".into(),
            lattice_file: None,
            omega: Some(vec![1.3, 2.0 / 2.6, 0.0]),
            seed: None,
            t_end: 10.0,
            dt: 1e-3,
            record_every: 1000,
            normalize: true,
        }),
        output: OutputConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve_and_carry_their_sections() {
        for (name, _, cfg) in builtin_scenarios() {
            assert_eq!(cfg.scenario.as_deref(), Some(name));
            assert!(cfg.surface.is_some() || cfg.class.is_some());
        }
        assert!(find("torus_relax").unwrap().surface.is_some());
        assert!(find("class_flat_chern").unwrap().class.is_some());
        assert!(find("missing").is_none());
    }
}
