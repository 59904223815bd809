//! Holomorphy potentials, the projector onto them, and the associated
//! obstructions to constant curvature.
//!
//! On the axisymmetric sphere the rotation field is Hamiltonian; its
//! momentum for a conformal metric is the z-antiderivative of the density,
//! and the holomorphy potentials are spanned by the constants together with
//! that momentum. On the torus the translations carry no momentum, so only
//! the constants remain.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::math;
use crate::metric::{ConformalMetric, GreenReport};
use crate::surface::{SurfaceKind, SurfaceModel, WorkBuffers};

/// Orthogonal projector onto holomorphy potentials, as node values, with
/// respect to a fixed measure.
#[derive(Debug, Clone)]
pub struct Projector {
    basis: Vec<Vec<f64>>,
    mass: Vec<f64>,
}

impl Projector {
    /// Projector in the curved inner product of `metric`.
    pub fn current(model: &SurfaceModel, metric: &ConformalMetric) -> Result<Self, CoreError> {
        let w = model.quad_weights();
        let f = metric.density_values();
        let mass: Vec<f64> = (0..w.len()).map(|j| w[j] * f[j]).collect();
        Self::build(model, Some(metric), mass)
    }

    /// Projector in the background inner product.
    pub fn background(model: &SurfaceModel) -> Result<Self, CoreError> {
        Self::build(model, None, model.quad_weights().to_vec())
    }

    fn build(
        model: &SurfaceModel,
        metric: Option<&ConformalMetric>,
        mass: Vec<f64>,
    ) -> Result<Self, CoreError> {
        let n = model.node_count();
        let mut raw: Vec<Vec<f64>> = vec![vec![1.0; n]];
        if model.kind() == SurfaceKind::Sphere {
            match metric {
                Some(m) => raw.push(momentum_values(model, m)),
                None => raw.push(model.nodes_z().to_vec()),
            }
        }
        // Modified Gram-Schmidt with a growth-based conditioning estimate.
        let dot = |a: &[f64], b: &[f64]| -> f64 {
            let mut acc = 0.0;
            for j in 0..n {
                acc += mass[j] * a[j] * b[j];
            }
            acc
        };
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(raw.len());
        for mut v in raw {
            let before = dot(&v, &v);
            for e in &basis {
                let c = dot(&v, e);
                for j in 0..n {
                    v[j] -= c * e[j];
                }
            }
            let after = dot(&v, &v);
            // Negated form so a NaN norm is rejected rather than kept.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(after > before / 1e16) {
                return Err(CoreError::DegenerateGram { condition: before / after.max(1e-300) });
            }
            let inv = 1.0 / math::sqrt(after);
            for x in &mut v {
                *x *= inv;
            }
            basis.push(v);
        }
        Ok(Self { basis, mass })
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Write the projection of `values` into `out`.
    pub fn apply(&self, values: &[f64], out: &mut [f64]) {
        assert_eq!(values.len(), self.mass.len());
        assert_eq!(out.len(), self.mass.len());
        out.fill(0.0);
        for e in &self.basis {
            let mut c = 0.0;
            for j in 0..values.len() {
                c += self.mass[j] * values[j] * e[j];
            }
            for j in 0..values.len() {
                out[j] += c * e[j];
            }
        }
    }

    /// Subtract the projection in place.
    pub fn remove(&self, values: &mut [f64]) {
        for e in &self.basis {
            let mut c = 0.0;
            for j in 0..values.len() {
                c += self.mass[j] * values[j] * e[j];
            }
            for j in 0..values.len() {
                values[j] -= c * e[j];
            }
        }
    }
}

/// Momentum of the rotation field for a conformal sphere metric: the
/// z-antiderivative of the density, shifted to curved mean zero. Its
/// z-derivative reproduces the density values exactly.
pub fn momentum_values(model: &SurfaceModel, metric: &ConformalMetric) -> Vec<f64> {
    assert_eq!(model.kind(), SurfaceKind::Sphere);
    let dim = model.dim();
    let nodes = model.node_count();
    let fc = metric.density_coeffs();
    // Antiderivative in the Legendre basis: int P_l = (P_{l+1} - P_{l-1}) / (2l+1).
    let mut anti = vec![0.0; dim + 2];
    anti[1] += fc[0];
    for l in 1..dim {
        let k = 1.0 / (2.0 * l as f64 + 1.0);
        anti[l + 1] += fc[l] * k;
        anti[l - 1] -= fc[l] * k;
    }
    let ptab = model.legendre_values();
    let mut p = vec![0.0; nodes];
    for (l, &c) in anti.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let row = &ptab[l * nodes..(l + 1) * nodes];
        for (v, &t) in p.iter_mut().zip(row) {
            *v += c * t;
        }
    }
    let mean = metric.mean_g(model, &p);
    for v in &mut p {
        *v -= mean;
    }
    p
}

/// Obstruction pairing of the rotation field with the scalar curvature
/// deviation. Identically zero on the torus, which has no Hamiltonian
/// holomorphic fields.
pub fn futaki_rotation(model: &SurfaceModel, metric: &ConformalMetric) -> f64 {
    match model.kind() {
        SurfaceKind::Torus => 0.0,
        SurfaceKind::Sphere => {
            let p = momentum_values(model, metric);
            let s = metric.scalar_values();
            let s_bg = model.background_scalar();
            let w = model.quad_weights();
            let f = metric.density_values();
            let mut acc = 0.0;
            for j in 0..p.len() {
                acc += w[j] * f[j] * p[j] * (s[j] - s_bg);
            }
            acc
        }
    }
}

/// Squared curved L2 norm of the (0,1)-derivative of the gradient field of
/// `f`: zero exactly on holomorphy potentials, positive otherwise.
pub fn lichnerowicz_residual(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    f_coeffs: &[f64],
    work: &mut WorkBuffers,
) -> f64 {
    assert_eq!(f_coeffs.len(), model.dim());
    match model.kind() {
        SurfaceKind::Sphere => {
            let mut deriv = vec![0.0; model.node_count()];
            model.sphere_deriv_values(f_coeffs, &mut deriv);
            sphere_residual_from_deriv(model, metric, &deriv, work)
        }
        SurfaceKind::Torus => torus_residual(model, metric, f_coeffs, work),
    }
}

/// Residual of the rotation momentum itself. Its z-derivative equals the
/// density pointwise, so the quotient entering the residual is the constant
/// one and the result sits at rounding level.
pub fn lichnerowicz_of_momentum(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    work: &mut WorkBuffers,
) -> f64 {
    assert_eq!(model.kind(), SurfaceKind::Sphere);
    sphere_residual_from_deriv(model, metric, metric.density_values(), work)
}

fn sphere_residual_from_deriv(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    deriv: &[f64],
    work: &mut WorkBuffers,
) -> f64 {
    let nodes = model.node_count();
    let fvals = metric.density_values();
    let mut h = vec![0.0; nodes];
    for j in 0..nodes {
        h[j] = deriv[j] / fvals[j];
    }
    let mut hc = vec![0.0; model.dim()];
    model.analyze(&h, &mut hc, work);
    let mut hd = vec![0.0; nodes];
    model.sphere_deriv_values(&hc, &mut hd);
    let w = model.quad_weights();
    let z = model.nodes_z();
    let mut acc = 0.0;
    for j in 0..nodes {
        let a = 1.0 - z[j] * z[j];
        acc += w[j] * fvals[j] * a * a * hd[j] * hd[j];
    }
    0.25 * acc
}

fn torus_residual(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    f_coeffs: &[f64],
    work: &mut WorkBuffers,
) -> f64 {
    let dim = model.dim();
    let nodes = model.node_count();
    let fvals = metric.density_values();
    let mut cx = vec![0.0; dim];
    let mut cy = vec![0.0; dim];
    model.torus_partial(f_coeffs, 0, &mut cx);
    model.torus_partial(f_coeffs, 1, &mut cy);
    let mut vx = vec![0.0; nodes];
    let mut vy = vec![0.0; nodes];
    model.synthesize(&cx, &mut vx, work);
    model.synthesize(&cy, &mut vy, work);
    // Gradient component over the density, as a complex field A + iB.
    for j in 0..nodes {
        vx[j] /= fvals[j];
        vy[j] /= fvals[j];
    }
    let mut ca = vec![0.0; dim];
    let mut cb = vec![0.0; dim];
    model.analyze(&vx, &mut ca, work);
    model.analyze(&vy, &mut cb, work);
    let mut dax = vec![0.0; dim];
    let mut day = vec![0.0; dim];
    let mut dbx = vec![0.0; dim];
    let mut dby = vec![0.0; dim];
    model.torus_partial(&ca, 0, &mut dax);
    model.torus_partial(&ca, 1, &mut day);
    model.torus_partial(&cb, 0, &mut dbx);
    model.torus_partial(&cb, 1, &mut dby);
    let mut re = vec![0.0; nodes];
    let mut im = vec![0.0; nodes];
    let mut tmp = vec![0.0; nodes];
    model.synthesize(&dax, &mut re, work);
    model.synthesize(&dby, &mut tmp, work);
    for j in 0..nodes {
        re[j] -= tmp[j];
    }
    model.synthesize(&day, &mut im, work);
    model.synthesize(&dbx, &mut tmp, work);
    for j in 0..nodes {
        im[j] += tmp[j];
    }
    let w = model.quad_weights();
    let mut acc = 0.0;
    for j in 0..nodes {
        acc += w[j] * fvals[j] * 0.25 * (re[j] * re[j] + im[j] * im[j]);
    }
    acc
}

/// A real (1,1)-form written as its half-trace multiple of the curved area
/// form: `eta = h omega`, with metric trace `2h`.
#[derive(Debug, Clone)]
pub struct OneOneForm {
    pub trace_half: Vec<f64>,
}

/// Ricci form of a conformal metric.
pub fn ricci_form(metric: &ConformalMetric) -> OneOneForm {
    OneOneForm { trace_half: metric.scalar_values().iter().map(|s| 0.5 * s).collect() }
}

/// Result of projecting a (1,1)-form onto the holomorphy-potential block.
#[derive(Debug, Clone)]
pub struct FormProjection {
    /// Half-trace of the projected form.
    pub trace_half: Vec<f64>,
    /// Coefficients of the correction potential f with `lap_g f` equal to
    /// four times the removed trace part.
    pub potential: Vec<f64>,
    pub report: GreenReport,
}

/// Project a (1,1)-form onto the span of forms with holomorphy-potential
/// half-traces, through the potential equation for the removed part.
pub fn project_form(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    proj: &Projector,
    form: &OneOneForm,
    work: &mut WorkBuffers,
) -> Result<FormProjection, CoreError> {
    let nodes = model.node_count();
    assert_eq!(form.trace_half.len(), nodes);
    let mut rest = form.trace_half.clone();
    proj.remove(&mut rest);
    for v in &mut rest {
        *v *= 4.0;
    }
    let mut potential = vec![0.0; model.dim()];
    let report = metric.green_g(model, &rest, &mut potential, work)?;
    let mut lap = vec![0.0; nodes];
    metric.laplacian_g_values(model, &potential, &mut lap, work);
    let mut trace_half = vec![0.0; nodes];
    for j in 0..nodes {
        trace_half[j] = form.trace_half[j] - 0.25 * lap[j];
    }
    Ok(FormProjection { trace_half, potential, report })
}
