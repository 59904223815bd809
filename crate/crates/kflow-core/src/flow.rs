//! The curvature relaxation flow on potentials and its linearization.
//!
//! The potential moves by the Green operator applied to the scalar curvature
//! deviation from its holomorphy-potential projection. In coefficient space
//! the right-hand side comes out of the projected log-density directly, so
//! the energy dissipated per step is a weighted sum of squares; the descent
//! property therefore survives rounding, and area and total curvature are
//! conserved to rounding at every accepted step.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::CoreError;
use crate::holomorphy::Projector;
use crate::math;
use crate::metric::ConformalMetric;
use crate::surface::{SurfaceKind, SurfaceModel, WorkBuffers};

/// Tunables for [`run_flow`].
#[derive(Debug, Clone)]
pub struct FlowParams {
    /// Integration horizon.
    pub t_end: f64,
    /// Initial step, clipped by the stability cap.
    pub dt_init: f64,
    /// Factor c in the step cap `dt <= c * min(F) / lambda_max`.
    pub dt_safety: f64,
    /// Growth factor after an accepted step.
    pub dt_growth: f64,
    /// Give up when halving pushes the step below this.
    pub dt_min: f64,
    /// Hard bound on accepted steps.
    pub max_steps: usize,
    /// Terminate with a blow-up verdict past this curvature sup norm.
    pub blowup_sup: f64,
    /// Reject stages whose density dips below this floor.
    pub density_floor: f64,
    /// Allowed relative uphill move of the curvature energy per step.
    pub calabi_slack: f64,
    /// Absolute counterpart of `calabi_slack`, needed once the energy sits
    /// at its rounding floor (the flat-torus endpoint has energy zero).
    pub calabi_floor: f64,
    /// Allowed relative drift of the area per step.
    pub volume_slack: f64,
    /// Early-out threshold on sup |s - pi s|; zero disables it.
    pub convergence_sup: f64,
    /// Diagnostics cadence in accepted steps.
    pub record_every: usize,
    /// Cadence for verifying the collocation defect of the Green solve.
    pub green_check_every: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt_init: 1e-3,
            dt_safety: 1.0,
            dt_growth: 1.25,
            dt_min: 1e-12,
            max_steps: 200_000,
            blowup_sup: 1e4,
            density_floor: 1e-6,
            calabi_slack: 1e-10,
            calabi_floor: 1e-20,
            volume_slack: 1e-8,
            convergence_sup: 0.0,
            record_every: 1,
            green_check_every: 8,
        }
    }
}

/// Why a flow run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Reached the time horizon or the step budget.
    TimeLimit,
    /// Curvature deviation fell below the convergence threshold.
    Converged,
    /// Curvature sup norm exceeded the blow-up bound or left the finite range.
    BlowUp,
    /// Step control could not keep the density positive.
    PositivityViolation,
    /// Step control underflowed without a positivity failure.
    StepUnderflow,
}

/// One diagnostics row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub volume: f64,
    /// Total curvature; a topological constant along the flow.
    pub scalar_integral: f64,
    pub calabi_energy: f64,
    pub k_energy: f64,
    pub pis_min: f64,
    pub pis_max: f64,
    pub sup_abs_s: f64,
    pub futaki: f64,
    /// Backward-difference defect of the scalar evolution law (zero on the
    /// first record).
    pub scalar_residual: f64,
    /// Last verified collocation defect of the Green solve.
    pub green_residual: f64,
    pub min_density: f64,
}

/// Outcome of [`run_flow`].
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub termination: Termination,
    pub records: Vec<DiagnosticsRecord>,
    pub final_potential: Vec<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub t_final: f64,
    pub k_energy: f64,
}

/// Right-hand side of the potential flow at the given metric.
pub fn flow_rhs(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    work: &mut WorkBuffers,
) -> Result<Vec<f64>, CoreError> {
    let mut out = vec![0.0; model.dim()];
    rhs_into(model, metric, work, &mut out)?;
    Ok(out)
}

// Fills `out` with the flow velocity and returns the dissipation rate, a
// weighted sum of squares.
fn rhs_into(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    work: &mut WorkBuffers,
    out: &mut [f64],
) -> Result<f64, CoreError> {
    let dim = model.dim();
    let c0 = model.const_index();
    match model.kind() {
        SurfaceKind::Torus => {
            // The projector is the curved mean and the curved mean of the
            // scalar is the background constant, so the analyzed product of
            // density and curvature deviation is twice the Laplacian of the
            // projected log-density. Inverting the background Laplacian
            // cancels the eigenvalues outright.
            let u = metric.u_coeffs();
            for i in 0..dim {
                out[i] = 2.0 * u[i];
            }
            out[c0] = 0.0;
        }
        SurfaceKind::Sphere => {
            let proj = Projector::current(model, metric)?;
            let nodes = model.node_count();
            let mut r = metric.scalar_values().to_vec();
            proj.remove(&mut r);
            let f = metric.density_values();
            for j in 0..nodes {
                r[j] *= f[j];
            }
            let mut b = vec![0.0; dim];
            model.analyze(&r, &mut b, work);
            b[c0] = 0.0;
            model.green0(&b, out)?;
        }
    }
    let eigs = model.eigenvalues();
    let norms = model.basis_norms();
    let mut q = 0.0;
    for i in 0..dim {
        q += eigs[i] * out[i] * out[i] * norms[i];
    }
    Ok(q)
}

/// Linearization of the flow velocity around `metric` in direction `beta`.
///
/// Three parts: the half Laplacian of the direction, the Green-coupled
/// product of the projected Ricci half-trace with it, and the Green-coupled
/// gradient pairing of the direction with the projected-scalar deviation.
/// The last term vanishes identically when the projected scalar is constant,
/// which is the case on both model surfaces.
pub fn linearized_rhs(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    beta: &[f64],
    work: &mut WorkBuffers,
) -> Result<Vec<f64>, CoreError> {
    assert_eq!(beta.len(), model.dim());
    let dim = model.dim();
    let nodes = model.node_count();
    let proj = Projector::current(model, metric)?;

    let mut w_vals = vec![0.0; nodes];
    metric.laplacian_g_values(model, beta, &mut w_vals, work);
    let mut out = vec![0.0; dim];
    model.analyze(&w_vals, &mut out, work);
    for c in out.iter_mut() {
        *c *= -0.5;
    }

    let mut h = vec![0.0; nodes];
    proj.apply(metric.scalar_values(), &mut h);
    let s_bg = model.background_scalar();
    let mut coupled = vec![0.0; nodes];
    for j in 0..nodes {
        coupled[j] = 0.5 * h[j] * (-0.5 * w_vals[j]);
    }
    // coupled = (Pi rho)_h * (-1/2 lap beta); fold in the -2 prefactor.
    let mut g2 = vec![0.0; dim];
    metric.green_g(model, &coupled, &mut g2, work)?;
    for i in 0..dim {
        out[i] -= 2.0 * g2[i];
    }

    // Gradient pairing against the projected-scalar deviation.
    let mut gamma = h;
    for v in &mut gamma {
        *v -= s_bg;
    }
    let mut gamma_c = vec![0.0; dim];
    model.analyze(&gamma, &mut gamma_c, work);
    let mut pair = vec![0.0; nodes];
    gradient_pairing(model, metric, beta, &gamma_c, &mut pair, work);
    for v in &mut pair {
        *v *= 0.5;
    }
    let mut g3 = vec![0.0; dim];
    metric.green_g(model, &pair, &mut g3, work)?;
    for i in 0..dim {
        out[i] -= g3[i];
    }
    // The velocity is gauge-fixed to a vanishing constant coefficient, so
    // its derivative lives in the same slice.
    out[model.const_index()] = 0.0;
    Ok(out)
}

// Curved-metric gradient inner product of two coefficient fields, at nodes.
fn gradient_pairing(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    a: &[f64],
    b: &[f64],
    out: &mut [f64],
    work: &mut WorkBuffers,
) {
    let nodes = model.node_count();
    match model.kind() {
        SurfaceKind::Sphere => {
            let mut da = vec![0.0; nodes];
            let mut db = vec![0.0; nodes];
            model.sphere_deriv_values(a, &mut da);
            model.sphere_deriv_values(b, &mut db);
            let z = model.nodes_z();
            let f = metric.density_values();
            for j in 0..nodes {
                out[j] = (1.0 - z[j] * z[j]) * da[j] * db[j] / f[j];
            }
        }
        SurfaceKind::Torus => {
            let dim = model.dim();
            let mut ca = vec![0.0; dim];
            let mut cb = vec![0.0; dim];
            let mut va = vec![0.0; nodes];
            let mut vb = vec![0.0; nodes];
            out.fill(0.0);
            for axis in 0..2 {
                model.torus_partial(a, axis, &mut ca);
                model.torus_partial(b, axis, &mut cb);
                model.synthesize(&ca, &mut va, work);
                model.synthesize(&cb, &mut vb, work);
                for j in 0..nodes {
                    out[j] += va[j] * vb[j];
                }
            }
            let f = metric.density_values();
            for j in 0..nodes {
                out[j] /= f[j];
            }
        }
    }
}

/// Defect of the scalar evolution law at one state: a centered difference of
/// the curvature along the flow direction against the analytic rate
/// `(s (s - pi s) - lap_g (s - pi s)) / 2`, as a relative sup norm.
pub fn scalar_evolution_residual(
    model: &SurfaceModel,
    phi: &[f64],
    epsilon: f64,
    work: &mut WorkBuffers,
) -> Result<f64, CoreError> {
    let metric = ConformalMetric::new(model, phi, work)?;
    let psi = flow_rhs(model, &metric, work)?;
    let dim = model.dim();
    let mut shifted = vec![0.0; dim];
    for i in 0..dim {
        shifted[i] = phi[i] + epsilon * psi[i];
    }
    let plus = ConformalMetric::new(model, &shifted, work)?;
    for i in 0..dim {
        shifted[i] = phi[i] - epsilon * psi[i];
    }
    let minus = ConformalMetric::new(model, &shifted, work)?;

    let nodes = model.node_count();
    let mut analytic = vec![0.0; nodes];
    scalar_rate(model, &metric, &mut analytic, work)?;
    let sp = plus.scalar_values();
    let sm = minus.scalar_values();
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    for j in 0..nodes {
        let fd = (sp[j] - sm[j]) / (2.0 * epsilon);
        worst = worst.max(math::abs(fd - analytic[j]));
        scale = scale.max(math::abs(analytic[j]));
    }
    Ok(worst / scale)
}

// Analytic time derivative of the curvature under the flow.
fn scalar_rate(
    model: &SurfaceModel,
    metric: &ConformalMetric,
    out: &mut [f64],
    work: &mut WorkBuffers,
) -> Result<(), CoreError> {
    let nodes = model.node_count();
    let mut dev = metric.scalar_values().to_vec();
    match model.kind() {
        SurfaceKind::Torus => {
            let mean = metric.mean_g(model, &dev);
            for v in &mut dev {
                *v -= mean;
            }
        }
        SurfaceKind::Sphere => {
            let proj = Projector::current(model, metric)?;
            proj.remove(&mut dev);
        }
    }
    let mut dev_c = vec![0.0; model.dim()];
    model.analyze(&dev, &mut dev_c, work);
    metric.laplacian_g_values(model, &dev_c, out, work);
    let s = metric.scalar_values();
    for j in 0..nodes {
        out[j] = 0.5 * (s[j] * dev[j] - out[j]);
    }
    Ok(())
}

struct Stepper<'a> {
    model: &'a SurfaceModel,
    params: &'a FlowParams,
    work: WorkBuffers,
    metric: ConformalMetric,
    stage: ConformalMetric,
    phi: Vec<f64>,
    phi_try: Vec<f64>,
    phi_stage: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    q1: f64,
    calabi: f64,
    s_prev: Vec<f64>,
    dt_prev: f64,
    k_energy: f64,
    green_residual: f64,
    lambda_max: f64,
}

enum RejectCause {
    Positivity,
    Monotonicity,
}

impl<'a> Stepper<'a> {
    fn cap(&self) -> f64 {
        self.params.dt_safety * self.metric.min_density() / self.lambda_max
    }

    fn record(&mut self, step: usize, t: f64, dt: f64) -> Result<DiagnosticsRecord, CoreError> {
        let model = self.model;
        let metric = &self.metric;
        let s = metric.scalar_values();
        let nodes = model.node_count();
        let (pis_min, pis_max) = match model.kind() {
            SurfaceKind::Torus => {
                let m = metric.mean_g(model, s);
                (m, m)
            }
            SurfaceKind::Sphere => {
                let proj = Projector::current(model, metric)?;
                let mut pis = vec![0.0; nodes];
                proj.apply(s, &mut pis);
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &v in &pis {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            }
        };
        let sup_abs_s = s.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
        let futaki = crate::holomorphy::futaki_rotation(model, metric);
        let scalar_residual = if self.dt_prev > 0.0 {
            let mut analytic = vec![0.0; nodes];
            scalar_rate(model, metric, &mut analytic, &mut self.work)?;
            let mut worst = 0.0f64;
            let mut scale = 1.0f64;
            for j in 0..nodes {
                let fd = (s[j] - self.s_prev[j]) / self.dt_prev;
                worst = worst.max(math::abs(fd - analytic[j]));
                scale = scale.max(math::abs(analytic[j]));
            }
            worst / scale
        } else {
            0.0
        };
        Ok(DiagnosticsRecord {
            step,
            t,
            dt,
            volume: metric.volume(),
            scalar_integral: metric.scalar_integral(model),
            calabi_energy: self.calabi,
            k_energy: self.k_energy,
            pis_min,
            pis_max,
            sup_abs_s,
            futaki,
            scalar_residual,
            green_residual: self.green_residual,
            min_density: metric.min_density(),
        })
    }

    // Collocation defect of the velocity as a solution of the curved Poisson
    // equation with the curvature deviation as data.
    fn verify_green(&mut self) -> Result<(), CoreError> {
        let model = self.model;
        let nodes = model.node_count();
        let mut dev = self.metric.scalar_values().to_vec();
        match model.kind() {
            SurfaceKind::Torus => {
                let m = self.metric.mean_g(model, &dev);
                for v in &mut dev {
                    *v -= m;
                }
            }
            SurfaceKind::Sphere => {
                let proj = Projector::current(model, &self.metric)?;
                proj.remove(&mut dev);
            }
        }
        let mut lap = vec![0.0; nodes];
        self.metric.laplacian_g_values(model, &self.k1, &mut lap, &mut self.work);
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        let w = model.quad_weights();
        let f = self.metric.density_values();
        for j in 0..nodes {
            let d = dev[j] - lap[j];
            num += w[j] * f[j] * d * d;
            den += w[j] * f[j] * dev[j] * dev[j];
        }
        self.green_residual = if den > 0.0 { math::sqrt(num / den) } else { math::sqrt(num) };
        Ok(())
    }

    fn try_step(&mut self, dt: f64) -> Result<Result<(), RejectCause>, CoreError> {
        let dim = self.model.dim();
        let floor = self.params.density_floor;
        // Stage evaluation at phi + c * dt * k, rejecting on density loss.
        macro_rules! stage {
            ($coeff:expr, $kin:ident, $kout:ident) => {{
                for i in 0..dim {
                    self.phi_stage[i] = self.phi[i] + $coeff * dt * self.$kin[i];
                }
                match self.stage.rebuild(self.model, &self.phi_stage, &mut self.work) {
                    Err(CoreError::PositivityViolation { .. }) => {
                        return Ok(Err(RejectCause::Positivity))
                    }
                    Err(e) => return Err(e),
                    Ok(()) => {}
                }
                if self.stage.min_density() < floor {
                    return Ok(Err(RejectCause::Positivity));
                }
                rhs_into(self.model, &self.stage, &mut self.work, &mut self.$kout)?;
            }};
        }
        stage!(0.5, k1, k2);
        stage!(0.5, k2, k3);
        stage!(1.0, k3, k4);
        for i in 0..dim {
            self.phi_try[i] = self.phi[i]
                + dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        match self.stage.rebuild(self.model, &self.phi_try, &mut self.work) {
            Err(CoreError::PositivityViolation { .. }) => return Ok(Err(RejectCause::Positivity)),
            Err(e) => return Err(e),
            Ok(()) => {}
        }
        if self.stage.min_density() < floor {
            return Ok(Err(RejectCause::Positivity));
        }
        let vol = self.stage.volume();
        let vol0 = self.model.volume();
        if math::abs(vol - vol0) > self.params.volume_slack * vol0 {
            return Ok(Err(RejectCause::Monotonicity));
        }
        let calabi_new = self.stage.calabi_energy(self.model);
        if calabi_new > self.calabi * (1.0 + self.params.calabi_slack) + self.params.calabi_floor {
            return Ok(Err(RejectCause::Monotonicity));
        }
        Ok(Ok(()))
    }
}

/// Integrate the potential flow from `phi0`.
pub fn run_flow(
    model: &SurfaceModel,
    phi0: &[f64],
    params: &FlowParams,
) -> Result<FlowResult, CoreError> {
    assert_eq!(phi0.len(), model.dim());
    let dim = model.dim();
    let mut work = model.work_buffers();
    let metric = ConformalMetric::new(model, phi0, &mut work)?;
    let stage = metric.clone();
    let calabi = metric.calabi_energy(model);
    let lambda_max = model.eigenvalues().iter().fold(0.0f64, |m, &e| m.max(e));
    let mut st = Stepper {
        model,
        params,
        work,
        metric,
        stage,
        phi: phi0.to_vec(),
        phi_try: vec![0.0; dim],
        phi_stage: vec![0.0; dim],
        k1: vec![0.0; dim],
        k2: vec![0.0; dim],
        k3: vec![0.0; dim],
        k4: vec![0.0; dim],
        q1: 0.0,
        calabi,
        s_prev: vec![0.0; model.node_count()],
        dt_prev: 0.0,
        k_energy: 0.0,
        green_residual: 0.0,
        lambda_max,
    };
    st.q1 = rhs_into(model, &st.metric, &mut st.work, &mut st.k1)?;
    st.verify_green()?;

    let mut records = Vec::new();
    records.push(st.record(0, 0.0, 0.0)?);
    let mut t = 0.0;
    let mut dt = params.dt_init.min(st.cap()).min(params.t_end);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut termination = Termination::TimeLimit;
    let mut last_recorded_step = 0usize;

    'outer: while t < params.t_end && accepted < params.max_steps {
        dt = dt.min(params.t_end - t);
        if let Err(cause) = st.try_step(dt)? {
            rejected += 1;
            dt *= 0.5;
            if dt < params.dt_min {
                termination = match cause {
                    RejectCause::Positivity => Termination::PositivityViolation,
                    RejectCause::Monotonicity => Termination::StepUnderflow,
                };
                break 'outer;
            }
            continue;
        }
        // Accept: the trial metric becomes current, and its velocity serves
        // as both diagnostics source and first stage of the next step.
        st.s_prev.copy_from_slice(st.metric.scalar_values());
        st.dt_prev = dt;
        core::mem::swap(&mut st.metric, &mut st.stage);
        st.phi.copy_from_slice(&st.phi_try);
        let q_new = rhs_into(model, &st.metric, &mut st.work, &mut st.k1)?;
        st.k_energy -= 0.5 * (st.q1 + q_new) * dt;
        st.q1 = q_new;
        st.calabi = st.metric.calabi_energy(model);
        accepted += 1;
        t += dt;

        let sup_s = st
            .metric
            .scalar_values()
            .iter()
            .fold(0.0f64, |m, v| m.max(math::abs(*v)));
        if !sup_s.is_finite() || sup_s > params.blowup_sup {
            termination = Termination::BlowUp;
            break 'outer;
        }
        if params.green_check_every > 0 && accepted.is_multiple_of(params.green_check_every) {
            st.verify_green()?;
        }
        if params.record_every > 0 && accepted.is_multiple_of(params.record_every) {
            records.push(st.record(accepted, t, dt)?);
            last_recorded_step = accepted;
        }
        if params.convergence_sup > 0.0 {
            let dev_sup = deviation_sup(model, &st.metric)?;
            if dev_sup < params.convergence_sup {
                termination = Termination::Converged;
                break 'outer;
            }
        }
        dt = (dt * params.dt_growth).min(st.cap());
    }

    if last_recorded_step != accepted || records.is_empty() {
        let rec = st.record(accepted, t, st.dt_prev)?;
        records.push(rec);
    }
    Ok(FlowResult {
        termination,
        records,
        final_potential: st.phi,
        steps_accepted: accepted,
        steps_rejected: rejected,
        t_final: t,
        k_energy: st.k_energy,
    })
}

fn deviation_sup(model: &SurfaceModel, metric: &ConformalMetric) -> Result<f64, CoreError> {
    let s = metric.scalar_values();
    match model.kind() {
        SurfaceKind::Torus => {
            let m = metric.mean_g(model, s);
            Ok(s.iter().fold(0.0f64, |acc, v| acc.max(math::abs(v - m))))
        }
        SurfaceKind::Sphere => {
            let proj = Projector::current(model, metric)?;
            let mut pis = vec![0.0; s.len()];
            proj.apply(s, &mut pis);
            let mut worst = 0.0f64;
            for j in 0..s.len() {
                worst = worst.max(math::abs(s[j] - pis[j]));
            }
            Ok(worst)
        }
    }
}
