//! Conformal metrics on a model surface and their elliptic operators.
//!
//! A metric is described by a potential phi through the density
//! F = 1 - (1/2) lap0 phi, so the curved area form is F times the background
//! one. All curved-metric quantities reduce to background quadrature against
//! F, which keeps several conservation laws exact at the discrete level:
//! the area because lap0 phi has no constant component, and the total scalar
//! curvature because the curved scalar is synthesized from the projected
//! log-density, whose Laplacian also has none.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::math;
use crate::surface::{SurfaceModel, WorkBuffers};

/// Convergence record of an iterative Green solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenReport {
    /// Relative collocation residual at exit.
    pub residual: f64,
    /// Richardson refinement passes taken after the preconditioner.
    pub iterations: usize,
}

/// Conformal metric data derived from a potential.
#[derive(Debug, Clone)]
pub struct ConformalMetric {
    phi: Vec<f64>,
    density_coeffs: Vec<f64>,
    u_coeffs: Vec<f64>,
    tmp_coeffs: Vec<f64>,
    density: Vec<f64>,
    scalar: Vec<f64>,
    min_density: f64,
    max_density: f64,
    volume: f64,
}

impl ConformalMetric {
    pub fn new(model: &SurfaceModel, phi: &[f64], work: &mut WorkBuffers) -> Result<Self, CoreError> {
        let mut m = Self {
            phi: vec![0.0; model.dim()],
            density_coeffs: vec![0.0; model.dim()],
            u_coeffs: vec![0.0; model.dim()],
            tmp_coeffs: vec![0.0; model.dim()],
            density: vec![0.0; model.node_count()],
            scalar: vec![0.0; model.node_count()],
            min_density: 0.0,
            max_density: 0.0,
            volume: 0.0,
        };
        m.rebuild(model, phi, work)?;
        Ok(m)
    }

    /// Recompute every derived quantity for a new potential, reusing storage.
    /// On error the contents are unspecified; rebuild again before use.
    pub fn rebuild(
        &mut self,
        model: &SurfaceModel,
        phi: &[f64],
        work: &mut WorkBuffers,
    ) -> Result<(), CoreError> {
        assert_eq!(phi.len(), model.dim());
        self.phi.copy_from_slice(phi);
        let eigs = model.eigenvalues();
        let c0 = model.const_index();
        for i in 0..phi.len() {
            self.density_coeffs[i] = -0.5 * eigs[i] * phi[i];
        }
        self.density_coeffs[c0] += 1.0;
        model.synthesize(&self.density_coeffs, &mut self.density, work);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &f in &self.density {
            lo = lo.min(f);
            hi = hi.max(f);
        }
        self.min_density = lo;
        self.max_density = hi;
        // Negated form so a NaN density also trips the violation.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(lo > 0.0) {
            return Err(CoreError::PositivityViolation { min_factor: lo });
        }
        // u = (1/2) ln F, projected onto the basis.
        math::ln_slice(&self.density, &mut self.scalar);
        for v in &mut self.scalar {
            *v *= 0.5;
        }
        model.analyze(&self.scalar, &mut self.u_coeffs, work);
        // Curved scalar curvature at the nodes from the projected log-density.
        model.laplacian0_apply(&self.u_coeffs, &mut self.tmp_coeffs);
        model.synthesize(&self.tmp_coeffs, &mut self.scalar, work);
        let s_bg = model.background_scalar();
        for (s, &f) in self.scalar.iter_mut().zip(&self.density) {
            *s = (s_bg + 2.0 * *s) / f;
        }
        self.volume = model.integrate0(&self.density);
        Ok(())
    }

    pub fn potential(&self) -> &[f64] {
        &self.phi
    }

    /// Node values of the conformal density F.
    pub fn density_values(&self) -> &[f64] {
        &self.density
    }

    /// Coefficients of F.
    pub fn density_coeffs(&self) -> &[f64] {
        &self.density_coeffs
    }

    /// Coefficients of the projected half log-density u.
    pub fn u_coeffs(&self) -> &[f64] {
        &self.u_coeffs
    }

    /// Node values of the scalar curvature.
    pub fn scalar_values(&self) -> &[f64] {
        &self.scalar
    }

    pub fn min_density(&self) -> f64 {
        self.min_density
    }

    pub fn max_density(&self) -> f64 {
        self.max_density
    }

    /// Curved area, by quadrature. Agrees with the background area to
    /// rounding because the density deviation has no constant component.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Integrate node values against the curved measure.
    pub fn integrate_g(&self, model: &SurfaceModel, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.density.len());
        let w = model.quad_weights();
        let mut acc = 0.0;
        for j in 0..values.len() {
            acc += w[j] * self.density[j] * values[j];
        }
        acc
    }

    pub fn mean_g(&self, model: &SurfaceModel, values: &[f64]) -> f64 {
        self.integrate_g(model, values) / self.volume
    }

    /// Total scalar curvature by honest quadrature; a Gauss-Bonnet check.
    pub fn scalar_integral(&self, model: &SurfaceModel) -> f64 {
        self.integrate_g(model, &self.scalar)
    }

    /// Integral of the squared scalar curvature.
    pub fn calabi_energy(&self, model: &SurfaceModel) -> f64 {
        let w = model.quad_weights();
        let mut acc = 0.0;
        for j in 0..self.scalar.len() {
            let s = self.scalar[j];
            acc += w[j] * self.density[j] * s * s;
        }
        acc
    }

    /// Coefficients of the scalar curvature (its band projection).
    pub fn scalar_coeffs(&self, model: &SurfaceModel, work: &mut WorkBuffers) -> Vec<f64> {
        let mut c = vec![0.0; model.dim()];
        model.analyze(&self.scalar, &mut c, work);
        c
    }

    /// Curved Laplacian of a coefficient field, evaluated at the nodes:
    /// density^{-1} times the background Laplacian.
    pub fn laplacian_g_values(
        &self,
        model: &SurfaceModel,
        coeffs: &[f64],
        out: &mut [f64],
        work: &mut WorkBuffers,
    ) {
        assert_eq!(coeffs.len(), model.dim());
        let mut lap = vec![0.0; model.dim()];
        model.laplacian0_apply(coeffs, &mut lap);
        model.synthesize(&lap, out, work);
        for (v, &f) in out.iter_mut().zip(&self.density) {
            *v /= f;
        }
    }

    /// Band projection of the curved Laplacian.
    pub fn laplacian_g(
        &self,
        model: &SurfaceModel,
        coeffs: &[f64],
        out: &mut [f64],
        work: &mut WorkBuffers,
    ) {
        let mut vals = vec![0.0; model.node_count()];
        self.laplacian_g_values(model, coeffs, &mut vals, work);
        model.analyze(&vals, out, work);
    }

    /// Solve the curved Poisson equation `lap_g u = r - mean_g r` for a
    /// mean-zero band potential u.
    ///
    /// The first pass inverts the background Laplacian against the analyzed
    /// product of r with the density, which already solves the band-projected
    /// equation; Richardson passes against the collocation residual then
    /// polish whatever off-band content the data carries. The report's
    /// residual is the final collocation defect relative to the data norm.
    pub fn green_g(
        &self,
        model: &SurfaceModel,
        rhs_values: &[f64],
        out: &mut [f64],
        work: &mut WorkBuffers,
    ) -> Result<GreenReport, CoreError> {
        assert_eq!(rhs_values.len(), model.node_count());
        assert_eq!(out.len(), model.dim());
        let nodes = model.node_count();
        let dim = model.dim();
        let c0 = model.const_index();
        let mean = self.mean_g(model, rhs_values);
        let mut r = vec![0.0; nodes];
        for j in 0..nodes {
            r[j] = rhs_values[j] - mean;
        }
        let rhs_norm = math::sqrt(self.integrate_g(model, &sq(&r)));
        if rhs_norm == 0.0 {
            out.fill(0.0);
            return Ok(GreenReport { residual: 0.0, iterations: 0 });
        }

        let mut b = vec![0.0; dim];
        let mut weighted = vec![0.0; nodes];
        for j in 0..nodes {
            weighted[j] = self.density[j] * r[j];
        }
        model.analyze(&weighted, &mut b, work);
        b[c0] = 0.0;
        model.green0(&b, out)?;

        let mut resid = vec![0.0; nodes];
        let mut delta = vec![0.0; dim];
        let mut prev = f64::INFINITY;
        let mut rises = 0usize;
        for iter in 0..500 {
            self.laplacian_g_values(model, out, &mut resid, work);
            for j in 0..nodes {
                resid[j] = r[j] - resid[j];
            }
            let rel = math::sqrt(self.integrate_g(model, &sq(&resid))) / rhs_norm;
            if rel <= 1e-12 {
                return Ok(GreenReport { residual: rel, iterations: iter });
            }
            if rel > prev {
                rises += 1;
                if rises >= 3 {
                    return Err(CoreError::GreenDiverged { residual: rel, iterations: iter });
                }
            } else {
                rises = 0;
            }
            if rel > 0.999 * prev {
                // Stalled at the attainable band-limited defect.
                return Ok(GreenReport { residual: rel, iterations: iter });
            }
            prev = rel;
            for j in 0..nodes {
                weighted[j] = self.density[j] * resid[j];
            }
            model.analyze(&weighted, &mut delta, work);
            delta[c0] = 0.0;
            let mut corr = vec![0.0; dim];
            model.green0(&delta, &mut corr)?;
            for i in 0..dim {
                out[i] += corr[i];
            }
        }
        self.laplacian_g_values(model, out, &mut resid, work);
        for j in 0..nodes {
            resid[j] = r[j] - resid[j];
        }
        let rel = math::sqrt(self.integrate_g(model, &sq(&resid))) / rhs_norm;
        Ok(GreenReport { residual: rel, iterations: 500 })
    }
}

fn sq(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x * x).collect()
}
