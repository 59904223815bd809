//! Background geometry of the two model surfaces.
//!
//! Both models expose the same interface: a finite orthogonal basis of real
//! eigenfunctions of the background Laplacian, a quadrature rule that is
//! exact on products of basis elements, and transforms between coefficient
//! and node-value space.
//!
//! * Round sphere, axisymmetric fields: basis P_l(z) for l < modes, with
//!   eigenvalues l(l+1), measure 2 pi dz on [-1, 1], and a Gauss-Legendre
//!   rule with ceil(3 modes / 2) points so triple products integrate exactly.
//! * Square flat torus: cosine and sine modes with both frequencies bounded
//!   by band = (grid - 1) / 3, eigenvalues 4 pi^2 (p^2 + q^2), uniform grid
//!   quadrature. The band bound keeps pointwise products of two retained
//!   modes alias-free on the grid, so analysis after a product is the exact
//!   orthogonal projection.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::fft::FftPlan;
use crate::legendre;

const TAU: f64 = 2.0 * core::f64::consts::PI;

/// Which model surface a set of coefficients belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Sphere,
    Torus,
}

/// Reusable transform scratch, created once per worker via
/// [`SurfaceModel::work_buffers`].
#[derive(Debug, Clone)]
pub struct WorkBuffers {
    line: Vec<f64>,
    half: Vec<f64>,
}

/// Discretized background surface: basis, spectrum, quadrature, transforms.
#[derive(Debug, Clone)]
pub struct SurfaceModel {
    kind: SurfaceKind,
    dim: usize,
    nodes: usize,
    vol: f64,
    s_bg: f64,
    euler: f64,
    eigs: Vec<f64>,
    norms: Vec<f64>,
    weights: Vec<f64>,
    // Sphere tables (empty for the torus).
    z: Vec<f64>,
    ptab: Vec<f64>,
    dptab: Vec<f64>,
    // Torus data (grid = 0 for the sphere).
    grid: usize,
    band: i64,
    plan: FftPlan,
}

impl SurfaceModel {
    /// Axisymmetric round sphere of radius one with `modes` Legendre
    /// coefficients P_0 .. P_{modes-1}.
    pub fn sphere(modes: usize) -> Result<Self, CoreError> {
        if !(2..=512).contains(&modes) {
            return Err(CoreError::ModesOutOfRange { requested: modes, min: 2, max: 512 });
        }
        let m = (3 * modes).div_ceil(2);
        let (z, wq) = legendre::gauss_rule(m);
        let weights: Vec<f64> = wq.iter().map(|w| TAU * w).collect();
        // Two spare rows: antiderivatives of basis elements reach one degree
        // higher than the basis itself.
        let ptab = legendre::value_table(modes + 2, &z);
        let dptab = legendre::deriv_table(modes + 2, &z);
        let eigs: Vec<f64> = (0..modes).map(|l| (l * (l + 1)) as f64).collect();
        let norms: Vec<f64> = (0..modes).map(|l| 2.0 * TAU / (2.0 * l as f64 + 1.0)).collect();
        Ok(Self {
            kind: SurfaceKind::Sphere,
            dim: modes,
            nodes: m,
            vol: 2.0 * TAU,
            s_bg: 2.0,
            euler: 2.0,
            eigs,
            norms,
            weights,
            z,
            ptab,
            dptab,
            grid: 0,
            band: 0,
            plan: FftPlan::new(1),
        })
    }

    /// Unit-area flat square torus sampled on a `grid` x `grid` lattice,
    /// keeping frequencies with |p|, |q| <= (grid - 1) / 3.
    pub fn torus(grid: usize) -> Result<Self, CoreError> {
        if !(4..=1024).contains(&grid) {
            return Err(CoreError::ModesOutOfRange { requested: grid, min: 4, max: 1024 });
        }
        let band = ((grid - 1) / 3) as i64;
        let width = (2 * band + 1) as usize;
        let dim = width * width;
        let mut eigs = vec![0.0; dim];
        let mut norms = vec![0.0; dim];
        for p in -band..=band {
            for q in -band..=band {
                let i = torus_index(band, p, q);
                eigs[i] = TAU * TAU * ((p * p + q * q) as f64);
                norms[i] = if p == 0 && q == 0 { 1.0 } else { 0.5 };
            }
        }
        let nodes = grid * grid;
        Ok(Self {
            kind: SurfaceKind::Torus,
            dim,
            nodes,
            vol: 1.0,
            s_bg: 0.0,
            euler: 0.0,
            eigs,
            norms,
            weights: vec![1.0 / nodes as f64; nodes],
            z: Vec::new(),
            ptab: Vec::new(),
            dptab: Vec::new(),
            grid,
            band,
            plan: FftPlan::new(grid),
        })
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    /// Number of basis coefficients.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of quadrature nodes.
    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Background area.
    pub fn volume(&self) -> f64 {
        self.vol
    }

    /// Scalar curvature of the background metric.
    pub fn background_scalar(&self) -> f64 {
        self.s_bg
    }

    pub fn euler_characteristic(&self) -> f64 {
        self.euler
    }

    /// Background Laplacian eigenvalue of each basis element (positive sign
    /// convention, so the constant has eigenvalue zero).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigs
    }

    /// Squared background L2 norm of each basis element.
    pub fn basis_norms(&self) -> &[f64] {
        &self.norms
    }

    /// Quadrature weights including the measure factor; they sum to the area.
    pub fn quad_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the constant basis element.
    pub fn const_index(&self) -> usize {
        match self.kind {
            SurfaceKind::Sphere => 0,
            SurfaceKind::Torus => torus_index(self.band, 0, 0),
        }
    }

    /// Sphere quadrature nodes in the height coordinate.
    pub fn nodes_z(&self) -> &[f64] {
        &self.z
    }

    /// Tabulated Legendre values, row l holding P_l at every node, with
    /// `dim() + 2` rows so degree-raising operations stay in table range.
    pub fn legendre_values(&self) -> &[f64] {
        &self.ptab
    }

    /// Tabulated Legendre derivatives, laid out like [`Self::legendre_values`].
    pub fn legendre_derivs(&self) -> &[f64] {
        &self.dptab
    }

    /// Torus grid size per axis (zero on the sphere).
    pub fn grid_size(&self) -> usize {
        self.grid
    }

    /// Torus frequency cutoff per axis.
    pub fn band(&self) -> i64 {
        self.band
    }

    /// Coefficient index of the torus mode (p, q).
    pub fn torus_index(&self, p: i64, q: i64) -> usize {
        debug_assert!(p.abs() <= self.band && q.abs() <= self.band);
        torus_index(self.band, p, q)
    }

    /// Frequency pair of torus coefficient `i`. Cosine modes sit at (p, q)
    /// with p > 0 or (p = 0, q > 0); the mirrored index holds the matching
    /// sine coefficient.
    pub fn torus_mode(&self, i: usize) -> (i64, i64) {
        let width = 2 * self.band + 1;
        let p = i as i64 / width - self.band;
        let q = i as i64 % width - self.band;
        (p, q)
    }

    /// Position of node `j`: `(z, 0)` on the sphere, `(x, y)` on the torus.
    pub fn node_position(&self, j: usize) -> (f64, f64) {
        match self.kind {
            SurfaceKind::Sphere => (self.z[j], 0.0),
            SurfaceKind::Torus => {
                let n = self.grid;
                ((j / n) as f64 / n as f64, (j % n) as f64 / n as f64)
            }
        }
    }

    pub fn work_buffers(&self) -> WorkBuffers {
        match self.kind {
            SurfaceKind::Sphere => WorkBuffers { line: Vec::new(), half: Vec::new() },
            SurfaceKind::Torus => WorkBuffers {
                line: vec![0.0; 2 * self.grid],
                half: vec![0.0; 2 * (self.band as usize + 1) * self.grid],
            },
        }
    }

    /// Evaluate the field with the given coefficients at every node.
    pub fn synthesize(&self, coeffs: &[f64], values: &mut [f64], work: &mut WorkBuffers) {
        assert_eq!(coeffs.len(), self.dim);
        assert_eq!(values.len(), self.nodes);
        match self.kind {
            SurfaceKind::Sphere => {
                values.fill(0.0);
                for (l, &c) in coeffs.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let row = &self.ptab[l * self.nodes..(l + 1) * self.nodes];
                    for (v, &p) in values.iter_mut().zip(row) {
                        *v += c * p;
                    }
                }
            }
            SurfaceKind::Torus => self.torus_synth(coeffs, values, work),
        }
    }

    /// Orthogonal projection of node values onto the basis: exact inverse of
    /// [`Self::synthesize`] on band-limited data, truncation otherwise.
    pub fn analyze(&self, values: &[f64], coeffs: &mut [f64], work: &mut WorkBuffers) {
        assert_eq!(coeffs.len(), self.dim);
        assert_eq!(values.len(), self.nodes);
        match self.kind {
            SurfaceKind::Sphere => {
                for l in 0..self.dim {
                    let row = &self.ptab[l * self.nodes..(l + 1) * self.nodes];
                    let mut acc = 0.0;
                    for j in 0..self.nodes {
                        acc += self.weights[j] * values[j] * row[j];
                    }
                    coeffs[l] = acc / self.norms[l];
                }
            }
            SurfaceKind::Torus => self.torus_analyze(values, coeffs, work),
        }
    }

    /// Apply the background Laplacian in coefficient space.
    pub fn laplacian0_apply(&self, coeffs: &[f64], out: &mut [f64]) {
        assert_eq!(coeffs.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        for i in 0..self.dim {
            out[i] = self.eigs[i] * coeffs[i];
        }
    }

    /// Invert the background Laplacian on mean-zero data, fixing the mean of
    /// the result to zero.
    pub fn green0(&self, coeffs: &[f64], out: &mut [f64]) -> Result<(), CoreError> {
        assert_eq!(coeffs.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        let c0 = self.const_index();
        let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(crate::math::abs(*c)));
        if crate::math::abs(coeffs[c0]) > 1e-8 * (1.0 + scale) {
            return Err(CoreError::UnbalancedSource { mean: coeffs[c0] });
        }
        for i in 0..self.dim {
            out[i] = if i == c0 { 0.0 } else { coeffs[i] / self.eigs[i] };
        }
        Ok(())
    }

    /// Integrate node values against the background measure.
    pub fn integrate0(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes);
        let mut acc = 0.0;
        for j in 0..self.nodes {
            acc += self.weights[j] * values[j];
        }
        acc
    }

    /// Background mean of node values.
    pub fn mean0(&self, values: &[f64]) -> f64 {
        self.integrate0(values) / self.vol
    }

    /// d/dz of a sphere field, evaluated at the nodes.
    pub fn sphere_deriv_values(&self, coeffs: &[f64], out: &mut [f64]) {
        assert_eq!(self.kind, SurfaceKind::Sphere);
        assert_eq!(coeffs.len(), self.dim);
        assert_eq!(out.len(), self.nodes);
        out.fill(0.0);
        for (l, &c) in coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &self.dptab[l * self.nodes..(l + 1) * self.nodes];
            for (v, &d) in out.iter_mut().zip(row) {
                *v += c * d;
            }
        }
    }

    /// Partial derivative of a torus field in coefficient space;
    /// `axis` 0 is x, 1 is y.
    pub fn torus_partial(&self, coeffs: &[f64], axis: usize, out: &mut [f64]) {
        assert_eq!(self.kind, SurfaceKind::Torus);
        assert_eq!(coeffs.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        let b = self.band;
        out.fill(0.0);
        for p in 0..=b {
            for q in -b..=b {
                if p == 0 && q <= 0 {
                    continue;
                }
                let freq = TAU * (if axis == 0 { p } else { q }) as f64;
                let ic = torus_index(b, p, q);
                let is = torus_index(b, -p, -q);
                // d(a cos + b sin) = freq (b cos - a sin)
                out[ic] = freq * coeffs[is];
                out[is] = -freq * coeffs[ic];
            }
        }
    }

    fn torus_analyze(&self, values: &[f64], coeffs: &mut [f64], work: &mut WorkBuffers) {
        let n = self.grid;
        let b = self.band as usize;
        let line = &mut work.line;
        let half = &mut work.half;
        // Transform along y, two real rows packed per complex FFT.
        let mut r = 0;
        while r < n {
            let pair = r + 1 < n;
            for j in 0..n {
                line[2 * j] = values[r * n + j];
                line[2 * j + 1] = if pair { values[(r + 1) * n + j] } else { 0.0 };
            }
            self.plan.forward(line);
            for q in 0..=b {
                let (cr, ci) = (line[2 * q], line[2 * q + 1]);
                let nq = if q == 0 { 0 } else { n - q };
                let (dr, di) = (line[2 * nq], line[2 * nq + 1]);
                let idx = 2 * (q * n + r);
                half[idx] = 0.5 * (cr + dr);
                half[idx + 1] = 0.5 * (ci - di);
                if pair {
                    half[idx + 2] = 0.5 * (ci + di);
                    half[idx + 3] = -0.5 * (cr - dr);
                }
            }
            r += 2;
        }
        // Transform along x, in place per retained nonnegative q.
        for q in 0..=b {
            self.plan.forward(&mut half[2 * q * n..2 * (q + 1) * n]);
        }
        // Read the band; negative q comes from conjugate symmetry.
        let scale = 1.0 / (n * n) as f64;
        let bb = self.band;
        let c0 = self.const_index();
        for q in 0..=bb {
            for p in -bb..=bb {
                if q == 0 && p < 0 {
                    continue;
                }
                let pi = p.rem_euclid(n as i64) as usize;
                let idx = 2 * (q as usize * n + pi);
                let sre = half[idx] * scale;
                let sim = half[idx + 1] * scale;
                if p == 0 && q == 0 {
                    coeffs[c0] = sre;
                } else if p > 0 || (p == 0 && q > 0) {
                    coeffs[torus_index(bb, p, q)] = 2.0 * sre;
                    coeffs[torus_index(bb, -p, -q)] = -2.0 * sim;
                } else {
                    coeffs[torus_index(bb, -p, -q)] = 2.0 * sre;
                    coeffs[torus_index(bb, p, q)] = 2.0 * sim;
                }
            }
        }
    }

    fn torus_synth(&self, coeffs: &[f64], values: &mut [f64], work: &mut WorkBuffers) {
        let n = self.grid;
        let b = self.band as usize;
        let bb = self.band;
        let line = &mut work.line;
        let half = &mut work.half;
        half.fill(0.0);
        let c0 = self.const_index();
        for q in 0..=bb {
            for p in -bb..=bb {
                if q == 0 && p < 0 {
                    continue;
                }
                let (sre, sim) = if p == 0 && q == 0 {
                    (coeffs[c0], 0.0)
                } else if p > 0 || (p == 0 && q > 0) {
                    (0.5 * coeffs[torus_index(bb, p, q)], -0.5 * coeffs[torus_index(bb, -p, -q)])
                } else {
                    (0.5 * coeffs[torus_index(bb, -p, -q)], 0.5 * coeffs[torus_index(bb, p, q)])
                };
                let pi = p.rem_euclid(n as i64) as usize;
                let idx = 2 * (q as usize * n + pi);
                half[idx] = sre;
                half[idx + 1] = sim;
                // Rows q > 0 carry their mirror modes in the dropped -q row,
                // but the q = 0 row is conjugate symmetric within itself.
                if q == 0 && p > 0 {
                    let mi = 2 * (n - pi);
                    half[mi] = sre;
                    half[mi + 1] = -sim;
                }
            }
        }
        for q in 0..=b {
            self.plan.inverse(&mut half[2 * q * n..2 * (q + 1) * n]);
        }
        // Per-row spectra are conjugate symmetric in q, so inverse transforms
        // of packed row pairs come out real in both lanes.
        let mut r = 0;
        while r < n {
            let pair = r + 1 < n;
            line.fill(0.0);
            for q in 0..=b {
                let i0 = 2 * (q * n + r);
                let (t0, t0i) = (half[i0], half[i0 + 1]);
                let (t1, t1i) = if pair { (half[i0 + 2], half[i0 + 3]) } else { (0.0, 0.0) };
                line[2 * q] = t0 - t1i;
                line[2 * q + 1] = t0i + t1;
                if q > 0 {
                    line[2 * (n - q)] = t0 + t1i;
                    line[2 * (n - q) + 1] = t1 - t0i;
                }
            }
            self.plan.inverse(line);
            for j in 0..n {
                values[r * n + j] = line[2 * j];
                if pair {
                    values[(r + 1) * n + j] = line[2 * j + 1];
                }
            }
            r += 2;
        }
    }
}

fn torus_index(band: i64, p: i64, q: i64) -> usize {
    let width = 2 * band + 1;
    ((p + band) * width + q + band) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{self, SplitMix64};

    fn random_coeffs(model: &SurfaceModel, seed: u64) -> Vec<f64> {
        let mut rng = SplitMix64::new(seed);
        (0..model.dim()).map(|_| rng.next_symmetric()).collect()
    }

    #[test]
    fn constructors_validate_resolution() {
        assert!(SurfaceModel::sphere(1).is_err());
        assert!(SurfaceModel::sphere(513).is_err());
        assert!(SurfaceModel::torus(2).is_err());
        assert!(SurfaceModel::torus(2048).is_err());
    }

    #[test]
    fn weights_sum_to_area() {
        let s = SurfaceModel::sphere(16).unwrap();
        let w: f64 = s.quad_weights().iter().sum();
        assert!((w - s.volume()).abs() < 1e-12);
        let t = SurfaceModel::torus(16).unwrap();
        let w: f64 = t.quad_weights().iter().sum();
        assert!((w - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigenvalue_tables() {
        let s = SurfaceModel::sphere(64).unwrap();
        assert_eq!(s.eigenvalues()[0], 0.0);
        assert_eq!(s.eigenvalues()[5], 30.0);
        assert_eq!(s.eigenvalues()[63], 4032.0);
        let t = SurfaceModel::torus(64).unwrap();
        assert_eq!(t.band(), 21);
        assert_eq!(t.dim(), 43 * 43);
        assert_eq!(t.eigenvalues()[t.const_index()], 0.0);
        let one_zero = t.torus_index(1, 0);
        assert!((t.eigenvalues()[one_zero] - TAU * TAU).abs() < 1e-12);
        let peak = t.torus_index(21, 21);
        assert!((t.eigenvalues()[peak] - TAU * TAU * 2.0 * 441.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_round_trip_is_identity() {
        let s = SurfaceModel::sphere(24).unwrap();
        let mut work = s.work_buffers();
        let c = random_coeffs(&s, 3);
        let mut v = vec![0.0; s.node_count()];
        s.synthesize(&c, &mut v, &mut work);
        let mut back = vec![0.0; s.dim()];
        s.analyze(&v, &mut back, &mut work);
        for i in 0..s.dim() {
            assert!((back[i] - c[i]).abs() < 1e-13, "l={i}");
        }
    }

    #[test]
    fn torus_round_trip_is_identity() {
        for &n in &[6usize, 9, 16, 64] {
            let t = SurfaceModel::torus(n).unwrap();
            let mut work = t.work_buffers();
            let c = random_coeffs(&t, 40 + n as u64);
            let mut v = vec![0.0; t.node_count()];
            t.synthesize(&c, &mut v, &mut work);
            let mut back = vec![0.0; t.dim()];
            t.analyze(&v, &mut back, &mut work);
            for i in 0..t.dim() {
                assert!((back[i] - c[i]).abs() < 1e-12, "n={n} i={i}: {} vs {}", back[i], c[i]);
            }
        }
    }

    #[test]
    fn torus_synth_matches_direct_sum() {
        let t = SurfaceModel::torus(8).unwrap();
        let mut work = t.work_buffers();
        let c = random_coeffs(&t, 9);
        let mut v = vec![0.0; t.node_count()];
        t.synthesize(&c, &mut v, &mut work);
        let b = t.band();
        for j in 0..t.node_count() {
            let (x, y) = t.node_position(j);
            let mut want = 0.0;
            for p in -b..=b {
                for q in -b..=b {
                    let i = t.torus_index(p, q);
                    let phase = TAU * (p as f64 * x + q as f64 * y);
                    let basis = if p == 0 && q == 0 {
                        1.0
                    } else if p > 0 || (p == 0 && q > 0) {
                        math::cos(phase)
                    } else {
                        math::sin(-phase)
                    };
                    want += c[i] * basis;
                }
            }
            assert!((v[j] - want).abs() < 1e-12, "j={j}: {} vs {}", v[j], want);
        }
    }

    #[test]
    fn sphere_synth_matches_direct_sum() {
        let s = SurfaceModel::sphere(10).unwrap();
        let mut work = s.work_buffers();
        let c = random_coeffs(&s, 2);
        let mut v = vec![0.0; s.node_count()];
        s.synthesize(&c, &mut v, &mut work);
        for (j, &zj) in s.nodes_z().iter().enumerate() {
            let mut want = 0.0;
            for (l, &cl) in c.iter().enumerate() {
                want += cl * legendre::eval_with_deriv(l, zj).0;
            }
            assert!((v[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn product_analysis_is_exact_torus() {
        // Analyze(f * g) on the working grid equals the exact projection,
        // read off from a finer grid where the product is fully resolved.
        let small = SurfaceModel::torus(16).unwrap(); // band 5
        let big = SurfaceModel::torus(64).unwrap(); // band 21 resolves band-10 products
        let mut rng = SplitMix64::new(77);
        let mut cf = vec![0.0; small.dim()];
        let mut cg = vec![0.0; small.dim()];
        for p in -5i64..=5 {
            for q in -5i64..=5 {
                let i = small.torus_index(p, q);
                cf[i] = rng.next_symmetric();
                cg[i] = rng.next_symmetric();
            }
        }
        let embed = |src: &[f64], dst_model: &SurfaceModel| {
            let mut dst = vec![0.0; dst_model.dim()];
            for p in -5i64..=5 {
                for q in -5i64..=5 {
                    dst[dst_model.torus_index(p, q)] = src[small.torus_index(p, q)];
                }
            }
            dst
        };
        let mut ws = small.work_buffers();
        let mut wb = big.work_buffers();
        let (mut vf, mut vg) = (vec![0.0; small.node_count()], vec![0.0; small.node_count()]);
        small.synthesize(&cf, &mut vf, &mut ws);
        small.synthesize(&cg, &mut vg, &mut ws);
        let prod: Vec<f64> = vf.iter().zip(&vg).map(|(a, b)| a * b).collect();
        let mut got = vec![0.0; small.dim()];
        small.analyze(&prod, &mut got, &mut ws);

        let (bf, bg) = (embed(&cf, &big), embed(&cg, &big));
        let (mut uf, mut ug) = (vec![0.0; big.node_count()], vec![0.0; big.node_count()]);
        big.synthesize(&bf, &mut uf, &mut wb);
        big.synthesize(&bg, &mut ug, &mut wb);
        let bprod: Vec<f64> = uf.iter().zip(&ug).map(|(a, b)| a * b).collect();
        let mut want_big = vec![0.0; big.dim()];
        big.analyze(&bprod, &mut want_big, &mut wb);

        for p in -5i64..=5 {
            for q in -5i64..=5 {
                let a = got[small.torus_index(p, q)];
                let b = want_big[big.torus_index(p, q)];
                assert!((a - b).abs() < 1e-12, "p={p} q={q}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn product_analysis_is_exact_sphere() {
        let small = SurfaceModel::sphere(16).unwrap();
        let big = SurfaceModel::sphere(40).unwrap();
        let mut rng = SplitMix64::new(5);
        let mut cf = vec![0.0; small.dim()];
        let mut cg = vec![0.0; small.dim()];
        for l in 0..8 {
            cf[l] = rng.next_symmetric();
            cg[l] = rng.next_symmetric();
        }
        let mut ws = small.work_buffers();
        let mut wb = big.work_buffers();
        let (mut vf, mut vg) = (vec![0.0; small.node_count()], vec![0.0; small.node_count()]);
        small.synthesize(&cf, &mut vf, &mut ws);
        small.synthesize(&cg, &mut vg, &mut ws);
        let prod: Vec<f64> = vf.iter().zip(&vg).map(|(a, b)| a * b).collect();
        let mut got = vec![0.0; small.dim()];
        small.analyze(&prod, &mut got, &mut ws);

        let mut bf = vec![0.0; big.dim()];
        let mut bg = vec![0.0; big.dim()];
        bf[..16].copy_from_slice(&cf);
        bg[..16].copy_from_slice(&cg);
        let (mut uf, mut ug) = (vec![0.0; big.node_count()], vec![0.0; big.node_count()]);
        big.synthesize(&bf, &mut uf, &mut wb);
        big.synthesize(&bg, &mut ug, &mut wb);
        let bprod: Vec<f64> = uf.iter().zip(&ug).map(|(a, b)| a * b).collect();
        let mut want_big = vec![0.0; big.dim()];
        big.analyze(&bprod, &mut want_big, &mut wb);

        for l in 0..16 {
            assert!((got[l] - want_big[l]).abs() < 1e-12, "l={l}");
        }
    }

    #[test]
    fn integral_of_synthesis_reads_constant_coefficient() {
        for model in [SurfaceModel::sphere(20).unwrap(), SurfaceModel::torus(12).unwrap()] {
            let mut work = model.work_buffers();
            let c = random_coeffs(&model, 31);
            let mut v = vec![0.0; model.node_count()];
            model.synthesize(&c, &mut v, &mut work);
            let got = model.integrate0(&v);
            let want = c[model.const_index()] * model.volume();
            assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()), "{:?}", model.kind());
        }
    }

    #[test]
    fn green0_inverts_laplacian0() {
        for model in [SurfaceModel::sphere(12).unwrap(), SurfaceModel::torus(10).unwrap()] {
            let mut c = random_coeffs(&model, 8);
            c[model.const_index()] = 0.0;
            let mut lap = vec![0.0; model.dim()];
            model.laplacian0_apply(&c, &mut lap);
            let mut back = vec![0.0; model.dim()];
            model.green0(&lap, &mut back).unwrap();
            for i in 0..model.dim() {
                assert!((back[i] - c[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn green0_rejects_nonzero_mean() {
        let model = SurfaceModel::sphere(8).unwrap();
        let mut c = vec![0.0; model.dim()];
        c[0] = 0.5;
        let mut out = vec![0.0; model.dim()];
        match model.green0(&c, &mut out) {
            Err(CoreError::UnbalancedSource { .. }) => {}
            other => panic!("expected UnbalancedSource, got {other:?}"),
        }
    }

    #[test]
    fn torus_partial_matches_analytic_derivative() {
        let t = SurfaceModel::torus(16).unwrap();
        let mut work = t.work_buffers();
        let mut c = vec![0.0; t.dim()];
        c[t.torus_index(2, 1)] = 1.0; // cos(2 pi (2x + y))
        let mut dx = vec![0.0; t.dim()];
        t.torus_partial(&c, 0, &mut dx);
        // d/dx cos(2 pi (2x + y)) = -4 pi sin(2 pi (2x + y))
        assert!((dx[t.torus_index(-2, -1)] + 2.0 * TAU).abs() < 1e-12);
        let mut v = vec![0.0; t.node_count()];
        t.synthesize(&dx, &mut v, &mut work);
        for j in (0..t.node_count()).step_by(7) {
            let (x, y) = t.node_position(j);
            let want = -2.0 * TAU * math::sin(TAU * (2.0 * x + y));
            assert!((v[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_deriv_matches_analytic_derivative() {
        let s = SurfaceModel::sphere(8).unwrap();
        let mut c = vec![0.0; s.dim()];
        c[2] = 2.0; // 2 P_2 = 3 z^2 - 1
        let mut d = vec![0.0; s.node_count()];
        s.sphere_deriv_values(&c, &mut d);
        for (j, &z) in s.nodes_z().iter().enumerate() {
            assert!((d[j] - 6.0 * z).abs() < 1e-13);
        }
    }
}
