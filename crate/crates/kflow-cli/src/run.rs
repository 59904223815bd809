//! Subcommand runners: wire a parsed configuration into the core library and
//! write the artifacts.
//!
//! Configuration problems surface as `CliError::Config` before any file is
//! touched. Once a run starts, its summary is written even when the flow
//! stops on a failure signal; those runs exit with code 3.

use std::path::PathBuf;
use std::time::Instant;

use serde_json::{json, Value};

use kflow_core::classflow::{self, ClassFlowParams, IntersectionLattice};
use kflow_core::flow::{self, FlowParams, Termination};
use kflow_core::holomorphy::{self, Projector};
use kflow_core::initial;
use kflow_core::math::SplitMix64;
use kflow_core::metric::ConformalMetric;
use kflow_core::surface::{SurfaceKind, SurfaceModel};

use crate::catalog;
use crate::config::{ClassConfig, ConfigFile, InitialData, SurfaceConfig, SurfaceName};
use crate::output::{self, Summary};
use crate::CliError;

/// What a runner hands back to `main`.
pub struct RunOutcome {
    pub exit_code: i32,
}

fn out_dir(cfg: &ConfigFile) -> PathBuf {
    cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn prefix(cfg: &ConfigFile) -> String {
    cfg.output.prefix.clone().unwrap_or_else(|| cfg.scenario_name().to_string())
}

pub fn build_model(sc: &SurfaceConfig) -> Result<SurfaceModel, CliError> {
    let built = match sc.model {
        SurfaceName::Sphere => SurfaceModel::sphere(sc.modes),
        SurfaceName::Torus => SurfaceModel::torus(sc.modes),
    };
    built.map_err(|e| CliError::config(e.to_string()))
}

/// Assemble the initial potential described by the config.
pub fn build_initial(model: &SurfaceModel, sc: &SurfaceConfig) -> Result<Vec<f64>, CliError> {
    match &sc.initial {
        InitialData::Random { seed, amplitude } => {
            initial::random_potential(model, *amplitude, *seed)
                .map_err(|e| CliError::config(format!("random initial data failed: {e}")))
        }
        InitialData::Modes { entries, rescale_min_density } => {
            let mut phi = vec![0.0; model.dim()];
            for (n, e) in entries.iter().enumerate() {
                match model.kind() {
                    SurfaceKind::Sphere => {
                        if e.p.is_some() || e.q.is_some() {
                            return Err(CliError::config(format!(
                                "initial mode {n}: p/q indices only apply to the torus"
                            )));
                        }
                        let Some(d) = e.degree else {
                            return Err(CliError::config(format!(
                                "initial mode {n}: sphere entries need a degree"
                            )));
                        };
                        if d >= model.dim() {
                            return Err(CliError::config(format!(
                                "initial mode {n}: degree {d} exceeds the cutoff {}",
                                model.dim() - 1
                            )));
                        }
                        phi[d] += e.coeff;
                    }
                    SurfaceKind::Torus => {
                        if e.degree.is_some() {
                            return Err(CliError::config(format!(
                                "initial mode {n}: a degree only applies to the sphere"
                            )));
                        }
                        let (Some(p), Some(q)) = (e.p, e.q) else {
                            return Err(CliError::config(format!(
                                "initial mode {n}: torus entries need p and q"
                            )));
                        };
                        let band = model.band();
                        if (p as i64).abs() > band || (q as i64).abs() > band {
                            return Err(CliError::config(format!(
                                "initial mode {n}: frequency ({p}, {q}) exceeds the band {band}"
                            )));
                        }
                        phi[model.torus_index(p as i64, q as i64)] += e.coeff;
                    }
                }
            }
            if let Some(target) = rescale_min_density {
                if !(*target > 0.0 && *target < 1.0) {
                    return Err(CliError::config(format!(
                        "rescale_min_density must lie in (0, 1), got {target}"
                    )));
                }
                // The area density is one minus half the flat Laplacian of
                // the potential, so its minimum is controlled by the peak of
                // that deviation. Shrink the coefficients when they would
                // push the density below the requested floor; mild data is
                // left alone.
                let dim = model.dim();
                let mut dev_coeffs = vec![0.0; dim];
                model.laplacian0_apply(&phi, &mut dev_coeffs);
                for v in &mut dev_coeffs {
                    *v *= 0.5;
                }
                let mut dev = vec![0.0; model.node_count()];
                let mut work = model.work_buffers();
                model.synthesize(&dev_coeffs, &mut dev, &mut work);
                let peak = dev.iter().fold(0.0f64, |m, &v| m.max(v));
                if peak > 1.0 - target {
                    let scale = (1.0 - target) / peak;
                    for v in &mut phi {
                        *v *= scale;
                    }
                }
            }
            Ok(phi)
        }
    }
}

fn surface_params(sc: &SurfaceConfig) -> Result<FlowParams, CliError> {
    if sc.t_end < 0.0 {
        return Err(CliError::config(format!("t_end must be nonnegative, got {}", sc.t_end)));
    }
    if !(sc.dt.init > 0.0 && sc.dt.min > 0.0 && sc.dt.safety > 0.0 && sc.dt.growth >= 1.0) {
        return Err(CliError::config(
            "dt policy needs init > 0, min > 0, safety > 0 and growth >= 1",
        ));
    }
    if sc.record_every == 0 || sc.green_check_every == 0 {
        return Err(CliError::config("record_every and green_check_every must be >= 1"));
    }
    Ok(FlowParams {
        t_end: sc.t_end,
        dt_init: sc.dt.init,
        dt_safety: sc.dt.safety,
        dt_growth: sc.dt.growth,
        dt_min: sc.dt.min,
        blowup_sup: sc.tolerances.blowup_sup,
        density_floor: sc.tolerances.density_floor,
        calabi_slack: sc.tolerances.calabi_slack,
        calabi_floor: sc.tolerances.calabi_floor,
        volume_slack: sc.tolerances.volume_slack,
        convergence_sup: sc.tolerances.convergence_sup,
        record_every: sc.record_every,
        green_check_every: sc.green_check_every,
        ..FlowParams::default()
    })
}

pub fn run_surface(cfg: &ConfigFile, quiet: bool) -> Result<RunOutcome, CliError> {
    let sc = cfg.surface()?;
    let params = surface_params(sc)?;
    let model = build_model(sc)?;
    let phi0 = build_initial(&model, sc)?;

    let dir = out_dir(cfg);
    output::ensure_dir(&dir)?;
    let pfx = prefix(cfg);
    let csv_path = dir.join(format!("{pfx}_series.csv"));
    let summary_path = dir.join(format!("{pfx}_summary.json"));

    let t0 = Instant::now();
    let outcome = flow::run_flow(&model, &phi0, &params);
    let wall = t0.elapsed().as_secs_f64();

    match outcome {
        Ok(res) => {
            output::write_surface_csv(&csv_path, &res.records)?;
            let mut final_diag =
                res.records.last().map(output::surface_record_json).unwrap_or(Value::Null);
            if let Value::Object(map) = &mut final_diag {
                map.insert("steps_accepted".into(), json!(res.steps_accepted));
                map.insert("steps_rejected".into(), json!(res.steps_rejected));
                map.insert("t_final".into(), json!(res.t_final));
            }
            let summary = Summary {
                scenario: cfg.scenario_name().to_string(),
                termination: format!("{:?}", res.termination),
                error: None,
                final_diagnostics: final_diag,
                wall_time: wall,
            };
            output::write_summary(&summary_path, &summary)?;
            let clean =
                matches!(res.termination, Termination::Converged | Termination::TimeLimit);
            if !quiet {
                println!(
                    "{}: {:?} at t = {:.6}, {} steps ({} rejected), wall {:.3}s",
                    cfg.scenario_name(),
                    res.termination,
                    res.t_final,
                    res.steps_accepted,
                    res.steps_rejected,
                    wall
                );
                println!("wrote {}", csv_path.display());
                println!("wrote {}", summary_path.display());
            }
            Ok(RunOutcome { exit_code: if clean { 0 } else { 3 } })
        }
        Err(e) => {
            let summary = Summary {
                scenario: cfg.scenario_name().to_string(),
                termination: "Error".to_string(),
                error: Some(e.to_string()),
                final_diagnostics: Value::Null,
                wall_time: wall,
            };
            output::write_summary(&summary_path, &summary)?;
            eprintln!("kflow: {e}");
            Ok(RunOutcome { exit_code: 3 })
        }
    }
}

/// Pick the start class: an explicit one (normalized onto the volume-one
/// slice unless told otherwise) or a seeded positive combination of the
/// lattice's divisors.
fn start_class(lattice: &IntersectionLattice, cc: &ClassConfig) -> Result<Vec<f64>, CliError> {
    if let Some(v) = &cc.omega {
        if v.len() != lattice.rank() {
            return Err(CliError::config(format!(
                "omega has {} entries but lattice {} has rank {}",
                v.len(),
                lattice.name(),
                lattice.rank()
            )));
        }
        let osq = lattice.pair(v, v);
        if cc.normalize {
            if osq <= 0.0 {
                return Err(CliError::config(format!(
                    "start class has nonpositive self-intersection {osq}"
                )));
            }
            let lam = (2.0 / osq).sqrt();
            Ok(v.iter().map(|&x| lam * x).collect())
        } else {
            if (osq - 2.0).abs() > 1e-9 {
                return Err(CliError::config(format!(
                    "unnormalized start has omega^2 = {osq}; rescale or set normalize = true"
                )));
            }
            Ok(v.clone())
        }
    } else {
        let Some(seed) = cc.seed else {
            return Err(CliError::config("a random start needs a seed"));
        };
        if lattice.divisors().is_empty() {
            return Err(CliError::config(format!(
                "lattice {} lists no divisors to combine; give omega explicitly",
                lattice.name()
            )));
        }
        let mut rng = SplitMix64::new(seed);
        for _ in 0..64 {
            let mut omega = vec![0.0; lattice.rank()];
            for d in lattice.divisors() {
                let u = 0.1 + 0.9 * rng.next_f64();
                for (o, &c) in omega.iter_mut().zip(&d.coeffs) {
                    *o += u * c;
                }
            }
            let osq = lattice.pair(&omega, &omega);
            if osq > 1e-9 {
                let lam = (2.0 / osq).sqrt();
                for o in &mut omega {
                    *o *= lam;
                }
                return Ok(omega);
            }
        }
        Err(CliError::config(format!(
            "no random divisor combination of {} had positive self-intersection after 64 draws",
            lattice.name()
        )))
    }
}

pub fn run_class(cfg: &ConfigFile, quiet: bool) -> Result<RunOutcome, CliError> {
    let cc = cfg.class()?;
    if cc.dt <= 0.0 {
        return Err(CliError::config(format!("dt must be positive, got {}", cc.dt)));
    }
    if cc.t_end < 0.0 {
        return Err(CliError::config(format!("t_end must be nonnegative, got {}", cc.t_end)));
    }
    if cc.record_every == 0 {
        return Err(CliError::config("record_every must be >= 1"));
    }
    let lattice = catalog::resolve_lattice(&cc.lattice, cc.lattice_file.as_deref())?;
    let omega0 = start_class(&lattice, cc)?;

    let dir = out_dir(cfg);
    output::ensure_dir(&dir)?;
    let pfx = prefix(cfg);
    let csv_path = dir.join(format!("{pfx}_series.csv"));
    let summary_path = dir.join(format!("{pfx}_summary.json"));

    let params =
        ClassFlowParams { t_end: cc.t_end, dt: cc.dt, record_every: cc.record_every };
    let t0 = Instant::now();
    let outcome = classflow::class_integrate(&lattice, &omega0, &params);
    let wall = t0.elapsed().as_secs_f64();

    match outcome {
        Ok(traj) => {
            output::write_class_csv(&csv_path, lattice.rank(), &traj.records)?;
            let speed = classflow::class_rhs(&lattice, &traj.final_class)
                .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
                .unwrap_or(f64::INFINITY);
            let termination = if speed < 1e-10 { "Converged" } else { "TimeLimit" };
            let mut final_diag =
                traj.records.last().map(output::class_record_json).unwrap_or(Value::Null);
            if let Value::Object(map) = &mut final_diag {
                map.insert("steps".into(), json!(traj.steps));
                map.insert("rhs_sup".into(), json!(speed));
            }
            let summary = Summary {
                scenario: cfg.scenario_name().to_string(),
                termination: termination.to_string(),
                error: None,
                final_diagnostics: final_diag,
                wall_time: wall,
            };
            output::write_summary(&summary_path, &summary)?;
            if !quiet {
                println!(
                    "{}: {} after {} steps, wall {:.3}s",
                    cfg.scenario_name(),
                    termination,
                    traj.steps,
                    wall
                );
                println!("wrote {}", csv_path.display());
                println!("wrote {}", summary_path.display());
            }
            Ok(RunOutcome { exit_code: 0 })
        }
        Err(e) => {
            let summary = Summary {
                scenario: cfg.scenario_name().to_string(),
                termination: "Error".to_string(),
                error: Some(e.to_string()),
                final_diagnostics: Value::Null,
                wall_time: wall,
            };
            output::write_summary(&summary_path, &summary)?;
            eprintln!("kflow: {e}");
            Ok(RunOutcome { exit_code: 3 })
        }
    }
}

pub fn run_critical(cfg: &ConfigFile, quiet: bool) -> Result<RunOutcome, CliError> {
    let cc = cfg.class()?;
    let lattice = catalog::resolve_lattice(&cc.lattice, cc.lattice_file.as_deref())?;
    let crit = classflow::find_critical_classes(&lattice);
    let isolated: Vec<Value> = crit
        .isolated
        .iter()
        .map(|cls| {
            let scalar = classflow::class_scalar(&lattice, cls).unwrap_or(f64::NAN);
            let cone = classflow::cone_membership(&lattice, cls);
            json!({
                "class": cls,
                "scalar": scalar,
                "in_cone": cone.inside,
                "divisor_pairings": cone.pairings,
            })
        })
        .collect();
    let doc = json!({
        "lattice": lattice.name(),
        "rank": lattice.rank(),
        "c1": lattice.c1(),
        "c1_sq": lattice.c1_sq(),
        "isolated": isolated,
        "null_branch": crit.null_branch,
        "all_classes_stationary": crit.all_classes,
    });

    let dir = out_dir(cfg);
    output::ensure_dir(&dir)?;
    let path = dir.join(format!("{}_critical.json", prefix(cfg)));
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::runtime(format!("cannot encode report: {e}")))?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    if !quiet {
        println!("wrote {}", path.display());
    }
    Ok(RunOutcome { exit_code: 0 })
}

pub fn run_diagnostics(cfg: &ConfigFile, quiet: bool) -> Result<RunOutcome, CliError> {
    let sc = cfg.surface()?;
    let model = build_model(sc)?;
    let phi = build_initial(&model, sc)?;

    let dir = out_dir(cfg);
    output::ensure_dir(&dir)?;
    let path = dir.join(format!("{}_diagnostics.json", prefix(cfg)));

    let mut work = model.work_buffers();
    let doc = match diagnostics_doc(&model, &phi, &mut work) {
        Ok(mut doc) => {
            doc["scenario"] = json!(cfg.scenario_name());
            doc
        }
        Err(e) => {
            let doc = json!({ "scenario": cfg.scenario_name(), "error": e.to_string() });
            let text = serde_json::to_string_pretty(&doc).expect("report serializes");
            std::fs::write(&path, text + "\n")
                .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
            eprintln!("kflow: {e}");
            return Ok(RunOutcome { exit_code: 3 });
        }
    };
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
    if !quiet {
        println!("wrote {}", path.display());
    }
    Ok(RunOutcome { exit_code: 0 })
}

fn diagnostics_doc(
    model: &SurfaceModel,
    phi: &[f64],
    work: &mut kflow_core::surface::WorkBuffers,
) -> Result<Value, kflow_core::CoreError> {
    let metric = ConformalMetric::new(model, phi, work)?;
    let s = metric.scalar_values();
    let nodes = model.node_count();

    let proj = Projector::current(model, &metric)?;
    let mut pis = vec![0.0; nodes];
    proj.apply(s, &mut pis);
    let (pis_min, pis_max) = pis
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let sup_abs_s = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // Collocation quality of the Green solve on the momentum-free part of
    // the curvature.
    let mut r = s.to_vec();
    proj.remove(&mut r);
    let mut sol = vec![0.0; model.dim()];
    let green = metric.green_g(model, &r, &mut sol, work)?;

    let scalar_residual = flow::scalar_evolution_residual(model, phi, 1e-5, work)?;
    let momentum_residual = match model.kind() {
        SurfaceKind::Sphere => Some(holomorphy::lichnerowicz_of_momentum(model, &metric, work)),
        SurfaceKind::Torus => None,
    };

    Ok(json!({
        "model": match model.kind() {
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::Torus => "torus",
        },
        "dim": model.dim(),
        "nodes": nodes,
        "volume": metric.volume(),
        "background_scalar": model.background_scalar(),
        "min_density": metric.min_density(),
        "max_density": metric.max_density(),
        "scalar_integral": metric.scalar_integral(model),
        "calabi_energy": metric.calabi_energy(model),
        "futaki": holomorphy::futaki_rotation(model, &metric),
        "pis_min": pis_min,
        "pis_max": pis_max,
        "sup_abs_s": sup_abs_s,
        "projector_rank": proj.rank(),
        "momentum_lichnerowicz_residual": momentum_residual,
        "green_residual": green.residual,
        "green_iterations": green.iterations,
        "scalar_residual": scalar_residual,
    }))
}
