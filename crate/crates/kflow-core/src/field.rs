//! Coefficient vectors tagged with the surface they live on.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::surface::{SurfaceKind, SurfaceModel};

/// A real field stored as coefficients in the model basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    kind: SurfaceKind,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(model: &SurfaceModel) -> Self {
        Self { kind: model.kind(), coeffs: vec![0.0; model.dim()] }
    }

    pub fn constant(model: &SurfaceModel, value: f64) -> Self {
        let mut f = Self::zeros(model);
        f.coeffs[model.const_index()] = value;
        f
    }

    pub fn from_coeffs(model: &SurfaceModel, coeffs: Vec<f64>) -> Result<Self, CoreError> {
        if coeffs.len() != model.dim() {
            return Err(CoreError::RankMismatch { expected: model.dim(), got: coeffs.len() });
        }
        Ok(Self { kind: model.kind(), coeffs })
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Confirm the field belongs to `model`.
    pub fn check_model(&self, model: &SurfaceModel) -> Result<(), CoreError> {
        if self.kind != model.kind() || self.coeffs.len() != model.dim() {
            return Err(CoreError::ModelMismatch);
        }
        Ok(())
    }

    /// Background mean of the field.
    pub fn mean0(&self, model: &SurfaceModel) -> f64 {
        self.coeffs[model.const_index()]
    }

    /// Squared background L2 norm, by Parseval.
    pub fn norm0_sq(&self, model: &SurfaceModel) -> f64 {
        let norms = model.basis_norms();
        let mut acc = 0.0;
        for i in 0..self.coeffs.len() {
            acc += self.coeffs[i] * self.coeffs[i] * norms[i];
        }
        acc
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        debug_assert_eq!(self.kind, other.kind);
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::SplitMix64;

    #[test]
    fn from_coeffs_checks_length() {
        let m = SurfaceModel::sphere(8).unwrap();
        assert!(SpectralField::from_coeffs(&m, vec![0.0; 7]).is_err());
        assert!(SpectralField::from_coeffs(&m, vec![0.0; 8]).is_ok());
    }

    #[test]
    fn check_model_rejects_cross_surface_use() {
        let s = SurfaceModel::sphere(8).unwrap();
        let t = SurfaceModel::torus(8).unwrap();
        let f = SpectralField::zeros(&s);
        assert!(f.check_model(&s).is_ok());
        assert_eq!(f.check_model(&t), Err(CoreError::ModelMismatch));
    }

    #[test]
    fn parseval_norm_matches_quadrature() {
        for model in [SurfaceModel::sphere(12).unwrap(), SurfaceModel::torus(10).unwrap()] {
            let mut rng = SplitMix64::new(21);
            let mut f = SpectralField::zeros(&model);
            for c in f.coeffs_mut() {
                *c = rng.next_symmetric();
            }
            let mut work = model.work_buffers();
            let mut v = vec![0.0; model.node_count()];
            model.synthesize(f.coeffs(), &mut v, &mut work);
            let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
            let by_quad = model.integrate0(&sq);
            let by_parseval = f.norm0_sq(&model);
            assert!(
                (by_quad - by_parseval).abs() < 1e-11 * (1.0 + by_quad),
                "{:?}: {by_quad} vs {by_parseval}",
                model.kind()
            );
        }
    }

    #[test]
    fn arithmetic_helpers() {
        let m = SurfaceModel::sphere(4).unwrap();
        let mut a = SpectralField::constant(&m, 2.0);
        let mut b = SpectralField::zeros(&m);
        b.coeffs_mut()[2] = 3.0;
        a.add_scaled(&b, -2.0);
        a.scale(0.5);
        assert_eq!(a.coeffs(), &[1.0, 0.0, -3.0, 0.0]);
        assert_eq!(a.mean0(&m), 1.0);
        b.scale(0.0);
        assert_eq!(b.norm0_sq(&m), 0.0);
    }
}
