//! Legendre polynomials and Gauss-Legendre quadrature on [-1, 1].
//!
//! The axisymmetric sphere model expands fields in P_l(z) with z the height
//! coordinate, so everything here is one dimensional. Nodes and weights come
//! from Newton iteration on P_m with the usual cosine initial guesses; the
//! rule is symmetrized afterwards so odd integrands vanish exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Evaluate `(P_m(z), P_m'(z))` by the three-term recurrence.
pub fn eval_with_deriv(m: usize, z: f64) -> (f64, f64) {
    if m == 0 {
        return (1.0, 0.0);
    }
    let mut pm1 = 1.0; // P_0
    let mut p = z; // P_1
    let mut dm1 = 0.0;
    let mut d = 1.0;
    for l in 1..m {
        let lf = l as f64;
        let pn = ((2.0 * lf + 1.0) * z * p - lf * pm1) / (lf + 1.0);
        let dn = dm1 + (2.0 * lf + 1.0) * p;
        pm1 = p;
        p = pn;
        dm1 = d;
        d = dn;
    }
    (p, d)
}

/// Gauss-Legendre nodes (ascending) and weights for an `m` point rule.
pub fn gauss_rule(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Tricomi-style initial guess, then Newton.
        let mut z = math::cos(core::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = eval_with_deriv(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if math::abs(dz) < 1e-15 {
                let (_, d2) = eval_with_deriv(m, z);
                dp = d2;
                break;
            }
        }
        // Initial guesses descend in z; store ascending.
        nodes[m - 1 - i] = z;
        weights[m - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    // Enforce exact reflection symmetry so odd integrands cancel to zero.
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let z = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -z;
        nodes[j] = z;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

/// Row-major table `P_l(z_j)` for `l < lcount` at the given points.
pub fn value_table(lcount: usize, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut t = vec![0.0; lcount * n];
    for (j, &zj) in z.iter().enumerate() {
        if lcount > 0 {
            t[j] = 1.0;
        }
        if lcount > 1 {
            t[n + j] = zj;
        }
        for l in 1..lcount.saturating_sub(1) {
            let lf = l as f64;
            let pn = ((2.0 * lf + 1.0) * zj * t[l * n + j] - lf * t[(l - 1) * n + j]) / (lf + 1.0);
            t[(l + 1) * n + j] = pn;
        }
    }
    t
}

/// Row-major table `P_l'(z_j)` for `l < lcount`, via the derivative recurrence
/// `P'_{l+1} = P'_{l-1} + (2l+1) P_l`, which stays finite at the endpoints.
pub fn deriv_table(lcount: usize, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let vals = value_table(lcount, z);
    let mut t = vec![0.0; lcount * n];
    for j in 0..n {
        if lcount > 1 {
            t[n + j] = 1.0;
        }
        for l in 1..lcount.saturating_sub(1) {
            t[(l + 1) * n + j] = t[(l - 1) * n + j] + (2.0 * l as f64 + 1.0) * vals[l * n + j];
        }
    }
    t
}
