//! Bundled model listing and loadable lattice catalogs.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::json;

use kflow_core::classflow::{Divisor, IntersectionLattice};

use crate::scenario;
use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LatticeSpec {
    name: String,
    rank: usize,
    /// Row-major symmetric pairing matrix.
    pairing: Vec<f64>,
    c1: Vec<f64>,
    #[serde(default)]
    divisors: Vec<DivisorSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DivisorSpec {
    name: String,
    coeffs: Vec<f64>,
}

/// Parse a JSON array of lattice definitions.
pub fn load_lattices(path: &Path) -> Result<Vec<IntersectionLattice>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let specs: Vec<LatticeSpec> = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("cannot parse {}: {e}", path.display())))?;
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let divisors = spec
            .divisors
            .into_iter()
            .map(|d| Divisor { name: d.name, coeffs: d.coeffs })
            .collect();
        let lat =
            IntersectionLattice::new(&spec.name, spec.rank, spec.pairing, spec.c1, divisors)
                .map_err(|e| {
                    CliError::config(format!("invalid lattice in {}: {e}", path.display()))
                })?;
        out.push(lat);
    }
    Ok(out)
}

/// Find a lattice by name, searching a custom catalog first, then the
/// built-ins.
pub fn resolve_lattice(
    name: &str,
    custom: Option<&Path>,
) -> Result<IntersectionLattice, CliError> {
    let mut known = Vec::new();
    if let Some(path) = custom {
        for lat in load_lattices(path)? {
            if lat.name() == name {
                return Ok(lat);
            }
            known.push(lat.name().to_string());
        }
    }
    for lat in IntersectionLattice::builtin() {
        if lat.name() == name {
            return Ok(lat);
        }
        known.push(lat.name().to_string());
    }
    Err(CliError::config(format!(
        "unknown lattice \"{name}\" (known: {})",
        known.join(", ")
    )))
}

/// Deterministic listing of bundled surface models, lattices (built-ins plus
/// an optional custom catalog), scenario presets, and initial-data kinds.
pub fn catalog_json(custom: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let mut lattices = Vec::new();
    if let Some(path) = custom {
        lattices.extend(load_lattices(path)?);
    }
    lattices.extend(IntersectionLattice::builtin());
    let lattice_entries: Vec<_> = lattices
        .iter()
        .map(|lat| {
            json!({
                "name": lat.name(),
                "rank": lat.rank(),
                "c1": lat.c1(),
                "c1_sq": lat.c1_sq(),
                "divisors": lat.divisors().iter().map(|d| d.name.as_str()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let scenario_entries: Vec<_> = scenario::builtin_scenarios()
        .iter()
        .map(|(name, desc, _)| json!({ "name": name, "description": desc }))
        .collect();
    Ok(json!({
        "models": [
            { "name": "AxisymSphere", "modes": { "min": 2, "max": 512 },
              "background_scalar": 2.0 },
            { "name": "FlatTorus", "modes": { "min": 4, "max": 1024 },
              "background_scalar": 0.0 },
        ],
        "lattices": lattice_entries,
        "scenarios": scenario_entries,
        "initial_kinds": ["random", "modes"],
        "defaults": crate::config::defaults_json(),
    }))
}
