//! Flow on cohomology classes of complex surfaces.
//!
//! A class moves inside a fixed intersection lattice by a quadratic vector
//! field built from its pairing with the first Chern class; the self
//! intersection is a first integral on the normalized slice, so trajectories
//! live on the volume-one quadric and, when `c1` has positive square, fall
//! into its span.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::math;

/// A named effective divisor class.
#[derive(Debug, Clone, PartialEq)]
pub struct Divisor {
    pub name: String,
    pub coeffs: Vec<f64>,
}

/// An intersection lattice with its first Chern class and a finite list of
/// effective divisor generators.
///
/// The divisor list is a desk-scale stand-in for the full effective cone;
/// [`cone_membership`] reports positivity against this list only.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionLattice {
    name: String,
    rank: usize,
    pairing: Vec<f64>,
    c1: Vec<f64>,
    divisors: Vec<Divisor>,
}

impl IntersectionLattice {
    /// Validate lengths and symmetry of the row-major pairing matrix.
    pub fn new(
        name: &str,
        rank: usize,
        pairing: Vec<f64>,
        c1: Vec<f64>,
        divisors: Vec<Divisor>,
    ) -> Result<Self, CoreError> {
        if pairing.len() != rank * rank {
            return Err(CoreError::RankMismatch { expected: rank * rank, got: pairing.len() });
        }
        if c1.len() != rank {
            return Err(CoreError::RankMismatch { expected: rank, got: c1.len() });
        }
        for d in &divisors {
            if d.coeffs.len() != rank {
                return Err(CoreError::RankMismatch { expected: rank, got: d.coeffs.len() });
            }
        }
        for r in 0..rank {
            for c in (r + 1)..rank {
                if pairing[r * rank + c] != pairing[c * rank + r] {
                    return Err(CoreError::AsymmetricPairing { row: r, col: c });
                }
            }
        }
        Ok(Self { name: String::from(name), rank, pairing, c1, divisors })
    }

    /// The projective plane: rank one, square-one generator.
    pub fn cp2() -> Self {
        Self::new(
            "CP2",
            1,
            vec![1.0],
            vec![3.0],
            vec![divisor("H", vec![1.0])],
        )
        .unwrap()
    }

    /// The plane blown up at one point, basis (line, exceptional curve).
    pub fn cp2_blowup_one() -> Self {
        Self::new(
            "CP2_blowup1",
            2,
            vec![1.0, 0.0, 0.0, -1.0],
            vec![3.0, -1.0],
            vec![
                divisor("H", vec![1.0, 0.0]),
                divisor("E", vec![0.0, 1.0]),
                divisor("H-E", vec![1.0, -1.0]),
            ],
        )
        .unwrap()
    }

    /// The plane blown up at two points.
    pub fn cp2_blowup_two() -> Self {
        Self::new(
            "CP2_blowup2",
            3,
            vec![
                1.0, 0.0, 0.0, //
                0.0, -1.0, 0.0, //
                0.0, 0.0, -1.0,
            ],
            vec![3.0, -1.0, -1.0],
            vec![
                divisor("H", vec![1.0, 0.0, 0.0]),
                divisor("E1", vec![0.0, 1.0, 0.0]),
                divisor("E2", vec![0.0, 0.0, 1.0]),
                divisor("H-E1", vec![1.0, -1.0, 0.0]),
                divisor("H-E2", vec![1.0, 0.0, -1.0]),
                divisor("H-E1-E2", vec![1.0, -1.0, -1.0]),
            ],
        )
        .unwrap()
    }

    /// A rank-three slice of a K3 lattice (hyperbolic plane plus a node),
    /// with vanishing first Chern class.
    pub fn k3_rank3() -> Self {
        Self::new(
            "K3_rank3",
            3,
            vec![
                0.0, 1.0, 0.0, //
                1.0, 0.0, 0.0, //
                0.0, 0.0, -2.0,
            ],
            vec![0.0, 0.0, 0.0],
            vec![
                divisor("fiber", vec![1.0, 0.0, 0.0]),
                divisor("section_class", vec![0.0, 1.0, 0.0]),
                divisor("node", vec![0.0, 0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    /// The four lattices shipped with the crate.
    pub fn builtin() -> Vec<Self> {
        vec![Self::cp2(), Self::cp2_blowup_one(), Self::cp2_blowup_two(), Self::k3_rank3()]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Row-major pairing matrix.
    pub fn pairing(&self) -> &[f64] {
        &self.pairing
    }

    pub fn c1(&self) -> &[f64] {
        &self.c1
    }

    pub fn divisors(&self) -> &[Divisor] {
        &self.divisors
    }

    /// Intersection number of two classes.
    pub fn pair(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), self.rank);
        assert_eq!(b.len(), self.rank);
        let mut acc = 0.0;
        for r in 0..self.rank {
            let mut row = 0.0;
            for c in 0..self.rank {
                row += self.pairing[r * self.rank + c] * b[c];
            }
            acc += a[r] * row;
        }
        acc
    }

    pub fn c1_dot(&self, a: &[f64]) -> f64 {
        self.pair(&self.c1, a)
    }

    pub fn c1_sq(&self) -> f64 {
        self.pair(&self.c1, &self.c1)
    }
}

fn divisor(name: &str, coeffs: Vec<f64>) -> Divisor {
    Divisor { name: String::from(name), coeffs }
}

const PI: f64 = core::f64::consts::PI;

/// Average scalar curvature attached to a class: `8 pi (c1 . omega) / omega^2`.
pub fn class_scalar(lattice: &IntersectionLattice, omega: &[f64]) -> Result<f64, CoreError> {
    let osq = lattice.pair(omega, omega);
    if math::abs(osq) < 1e-12 {
        return Err(CoreError::DegenerateClass { omega_sq: osq });
    }
    Ok(8.0 * PI * lattice.c1_dot(omega) / osq)
}

/// Velocity of the class flow: `2 pi s c1 - (s^2 / 4) omega`.
///
/// Pairing with `omega` cancels the two terms exactly when `omega^2 = 2`, so
/// the normalized slice is invariant.
pub fn class_rhs(lattice: &IntersectionLattice, omega: &[f64]) -> Result<Vec<f64>, CoreError> {
    let s = class_scalar(lattice, omega)?;
    let k = lattice.rank();
    let c1 = lattice.c1();
    let mut out = vec![0.0; k];
    for i in 0..k {
        out[i] = 2.0 * PI * s * c1[i] - 0.25 * s * s * omega[i];
    }
    Ok(out)
}

/// Critical classes of the flow on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalClasses {
    /// Isolated volume-normalized critical classes, attractor first; present
    /// exactly when `c1^2 > 0`.
    pub isolated: Vec<Vec<f64>>,
    /// Whether the stationary quadric `{omega^2 = 2, c1 . omega = 0}` exists
    /// as a branch (any nonzero `c1`); it is a set, not enumerated here.
    pub null_branch: bool,
    /// With `c1 = 0` every class is stationary.
    pub all_classes: bool,
}

/// Solve for the stationary classes: multiples of `c1` meeting the
/// normalization `omega^2 = 2`, plus the branch where the class scalar
/// vanishes.
pub fn find_critical_classes(lattice: &IntersectionLattice) -> CriticalClasses {
    let c1 = lattice.c1();
    let c1_zero = c1.iter().all(|&v| v == 0.0);
    if c1_zero {
        return CriticalClasses { isolated: Vec::new(), null_branch: false, all_classes: true };
    }
    let csq = lattice.c1_sq();
    let mut isolated = Vec::new();
    if csq > 0.0 {
        let lam = math::sqrt(2.0 / csq);
        let plus: Vec<f64> = c1.iter().map(|&v| lam * v).collect();
        let minus: Vec<f64> = c1.iter().map(|&v| -lam * v).collect();
        isolated.push(plus);
        isolated.push(minus);
    }
    CriticalClasses { isolated, null_branch: true, all_classes: false }
}

/// Positivity report of a class against the lattice's divisor list.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeReport {
    /// Positive self-intersection and positive pairing with every listed
    /// divisor. With an empty list only the self-intersection is checked.
    pub inside: bool,
    pub omega_sq: f64,
    /// Pairings aligned with the lattice's divisor order.
    pub pairings: Vec<f64>,
    /// Set when the divisor list is empty and positivity could not be probed.
    pub untested_divisors: bool,
}

/// Nakai-style membership test against the finite divisor list.
pub fn cone_membership(lattice: &IntersectionLattice, omega: &[f64]) -> ConeReport {
    let omega_sq = lattice.pair(omega, omega);
    let pairings: Vec<f64> =
        lattice.divisors().iter().map(|d| lattice.pair(omega, &d.coeffs)).collect();
    let inside = omega_sq > 0.0 && pairings.iter().all(|&p| p > 0.0);
    ConeReport { inside, omega_sq, pairings, untested_divisors: lattice.divisors().is_empty() }
}

/// Closed-form positivity predictor along the flow:
/// `omega0 . d + 8 pi^2 (c1 . omega0)(c1 . d) (e^(c1^2 t) - 1) / c1^2`,
/// with the factor replaced by its limit `t` when `c1^2 = 0`.
///
/// Only the sign is contracted against trajectories; the time variable here
/// need not match the integrator's.
pub fn stability_criterion(
    lattice: &IntersectionLattice,
    omega0: &[f64],
    d: &[f64],
    t: f64,
) -> f64 {
    let base = lattice.pair(omega0, d);
    let csq = lattice.c1_sq();
    let factor = if csq == 0.0 { t } else { (math::exp(csq * t) - 1.0) / csq };
    base + 8.0 * PI * PI * lattice.c1_dot(omega0) * lattice.c1_dot(d) * factor
}

/// Tunables for [`class_integrate`].
#[derive(Debug, Clone)]
pub struct ClassFlowParams {
    pub t_end: f64,
    pub dt: f64,
    /// Record cadence in steps; the initial and final states always appear.
    pub record_every: usize,
}

impl Default for ClassFlowParams {
    fn default() -> Self {
        Self { t_end: 5.0, dt: 1e-3, record_every: 1 }
    }
}

/// One trajectory sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRecord {
    pub step: usize,
    pub t: f64,
    pub omega: Vec<f64>,
    pub omega_sq: f64,
    pub c1_dot_omega: f64,
    pub s_class: f64,
    pub in_cone: bool,
}

/// Outcome of [`class_integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTrajectory {
    pub records: Vec<ClassRecord>,
    pub final_class: Vec<f64>,
    pub steps: usize,
}

/// Fixed-step RK4 integration of the class flow on the volume-one slice.
///
/// The start must satisfy `omega^2 = 2` to within 1e-9. Self-intersection
/// drift beyond 1e-13 is renormalized away after the offending step; an
/// exactly stationary trajectory is therefore returned bit for bit.
pub fn class_integrate(
    lattice: &IntersectionLattice,
    omega0: &[f64],
    params: &ClassFlowParams,
) -> Result<ClassTrajectory, CoreError> {
    let k = lattice.rank();
    assert_eq!(omega0.len(), k);
    let osq0 = lattice.pair(omega0, omega0);
    assert!(
        math::abs(osq0 - 2.0) <= 1e-9,
        "start is not volume normalized: omega^2 = {osq0}"
    );
    let steps = if params.dt > 0.0 {
        let n = params.t_end / params.dt;
        let rounded = (n + 0.5) as usize;
        rounded.max(1)
    } else {
        0
    };
    let mut omega = omega0.to_vec();
    let mut records = Vec::new();
    let sample = |lat: &IntersectionLattice, step: usize, t: f64, w: &[f64]| -> Result<ClassRecord, CoreError> {
        let report = cone_membership(lat, w);
        Ok(ClassRecord {
            step,
            t,
            omega: w.to_vec(),
            omega_sq: report.omega_sq,
            c1_dot_omega: lat.c1_dot(w),
            s_class: class_scalar(lat, w)?,
            in_cone: report.inside,
        })
    };
    records.push(sample(lattice, 0, 0.0, &omega)?);
    let dt = params.dt;
    let mut scratch = vec![0.0; k];
    let mut last_recorded = 0usize;
    for step in 1..=steps {
        let k1 = class_rhs(lattice, &omega)?;
        for i in 0..k {
            scratch[i] = omega[i] + 0.5 * dt * k1[i];
        }
        let k2 = class_rhs(lattice, &scratch)?;
        for i in 0..k {
            scratch[i] = omega[i] + 0.5 * dt * k2[i];
        }
        let k3 = class_rhs(lattice, &scratch)?;
        for i in 0..k {
            scratch[i] = omega[i] + dt * k3[i];
        }
        let k4 = class_rhs(lattice, &scratch)?;
        for i in 0..k {
            omega[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let osq = lattice.pair(&omega, &omega);
        if math::abs(osq) < 1e-12 {
            return Err(CoreError::DegenerateClass { omega_sq: osq });
        }
        if math::abs(osq - 2.0) > 1e-13 {
            let f = math::sqrt(2.0 / osq);
            for v in &mut omega {
                *v *= f;
            }
        }
        if params.record_every > 0 && step % params.record_every == 0 {
            records.push(sample(lattice, step, dt * step as f64, &omega)?);
            last_recorded = step;
        }
    }
    if last_recorded != steps {
        records.push(sample(lattice, steps, dt * steps as f64, &omega)?);
    }
    Ok(ClassTrajectory { records, final_class: omega, steps })
}
