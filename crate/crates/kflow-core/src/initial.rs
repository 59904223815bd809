//! Seeded admissible initial potentials.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::math::{self, SplitMix64};
use crate::metric::ConformalMetric;
use crate::surface::{SurfaceKind, SurfaceModel};

/// Smallest admissible density the generator will hand out.
pub const DENSITY_MARGIN: f64 = 0.5;

/// Draw a smooth random potential, scaled so the curvature deviation has sup
/// norm `amplitude`, then shrunk if needed until the density stays above
/// [`DENSITY_MARGIN`].
///
/// Low modes dominate: coefficients fall off with the cube of the eigenvalue
/// on the sphere and the square on the torus, and only the bottom few modes
/// are populated at all. Same model, amplitude and seed always reproduce the
/// same potential bit for bit. Degree one is left empty on the sphere; it
/// parametrizes conformal moves that carry no curvature signal.
pub fn random_potential(
    model: &SurfaceModel,
    amplitude: f64,
    seed: u64,
) -> Result<Vec<f64>, CoreError> {
    assert!(amplitude > 0.0);
    let mut rng = SplitMix64::new(seed);
    let dim = model.dim();
    let eigs = model.eigenvalues();
    let mut phi = vec![0.0; dim];
    match model.kind() {
        SurfaceKind::Sphere => {
            let lmax = 16.min(dim - 1);
            for l in 2..=lmax {
                let lam = eigs[l];
                phi[l] = rng.next_symmetric() / (lam * lam * lam);
            }
        }
        SurfaceKind::Torus => {
            let b = model.band().min(5);
            for p in -b..=b {
                for q in -b..=b {
                    if p == 0 && q == 0 {
                        continue;
                    }
                    let i = model.torus_index(p, q);
                    let lam = eigs[i];
                    phi[i] = rng.next_symmetric() / (lam * lam);
                }
            }
        }
    }

    // Bring the density deviation to a safe size before the first build.
    let mut work = model.work_buffers();
    let mut dev = vec![0.0; dim];
    for i in 0..dim {
        dev[i] = 0.5 * eigs[i] * phi[i];
    }
    let mut vals = vec![0.0; model.node_count()];
    model.synthesize(&dev, &mut vals, &mut work);
    let sup = vals.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    let mut scale = 0.2 / sup;
    let mut scaled = vec![0.0; dim];
    let rescale = |scale: f64, scaled: &mut [f64]| {
        for i in 0..dim {
            scaled[i] = scale * phi[i];
        }
    };
    rescale(scale, &mut scaled);
    let mut metric = ConformalMetric::new(model, &scaled, &mut work)?;

    // Fixed-point passes on the curvature sup norm; the map is close to
    // linear at these sizes, so three passes land well inside a percent.
    let s_bg = model.background_scalar();
    for _ in 0..3 {
        let dev_sup = metric
            .scalar_values()
            .iter()
            .fold(0.0f64, |m, v| m.max(math::abs(v - s_bg)));
        scale *= amplitude / dev_sup;
        rescale(scale, &mut scaled);
        while match metric.rebuild(model, &scaled, &mut work) {
            Err(CoreError::PositivityViolation { .. }) => true,
            Err(e) => return Err(e),
            Ok(()) => metric.min_density() < DENSITY_MARGIN,
        } {
            scale *= 0.75;
            rescale(scale, &mut scaled);
        }
    }
    Ok(scaled)
}
