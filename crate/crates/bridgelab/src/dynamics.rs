//! Time integration of the truncated first-order system
//!
//! ```text
//! u_tt + A u + u_t - (p - ||u||_1^2) A^{1/2} u + k^2 u+ = f(t)
//! ```
//!
//! in modal coordinates. The stiff linear part `a'' + damping a' + (n pi)^4 a`
//! is propagated exactly by its 2x2 matrix exponential per mode; the axial
//! coupling, the cable force and the forcing enter through a two-stage
//! explicit midpoint rule on the variation-of-constants formula. The scheme
//! is second-order and unconditionally stable on the linear part, so `dt` is
//! set by the nonlinearity alone. A classical RK4 step is kept as a reference
//! integrator (explicit stability limit roughly `2.8 / (N pi)^2`).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{energy_components, DiagnosticRecord};
use crate::modal::{ModalField, QuadratureGrid, SineTable, State};
use crate::{BridgeError, Result};

/// Norm guard: theory forbids blow-up, so reaching this signals a `dt` or
/// implementation error and aborts loudly.
pub const BLOWUP_GUARD: f64 = 1e6;

/// Scalar modulation `g(t)` for time-dependent forcing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSignal {
    Const { value: f64 },
    Sin { omega: f64 },
    Cos { omega: f64 },
}

impl TimeSignal {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeSignal::Const { value } => value,
            TimeSignal::Sin { omega } => (omega * t).sin(),
            TimeSignal::Cos { omega } => (omega * t).cos(),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match *self {
            TimeSignal::Const { value } => value.abs(),
            TimeSignal::Sin { .. } | TimeSignal::Cos { .. } => 1.0,
        }
    }

    /// Constant signals keep the system autonomous.
    pub fn is_constant(&self) -> bool {
        matches!(self, TimeSignal::Const { .. })
    }
}

/// Forcing `f(t) = f0 + g(t) f1`, with `g` bounded and smooth (the signals
/// above all have translation-bounded derivatives).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub static_part: ModalField,
    pub modulation: Option<(TimeSignal, ModalField)>,
}

impl ForcingSpec {
    pub fn none(order: usize) -> Self {
        Self { static_part: ModalField::zeros(order), modulation: None }
    }

    pub fn constant(f0: ModalField) -> Self {
        Self { static_part: f0, modulation: None }
    }

    pub fn modulated(f0: ModalField, signal: TimeSignal, f1: ModalField) -> Result<Self> {
        if f0.order() != f1.order() {
            return Err(BridgeError::OrderMismatch(f0.order(), f1.order()));
        }
        Ok(Self { static_part: f0, modulation: Some((signal, f1)) })
    }

    pub fn is_autonomous(&self) -> bool {
        match &self.modulation {
            None => true,
            Some((signal, _)) => signal.is_constant(),
        }
    }

    pub fn order(&self) -> usize {
        self.static_part.order()
    }

    /// Modal coefficients of `f(t)`.
    pub fn at(&self, t: f64) -> ModalField {
        match &self.modulation {
            None => self.static_part.clone(),
            Some((signal, f1)) => {
                let g = signal.eval(t);
                self.static_part.add(&f1.scaled(g)).expect("orders checked at construction")
            }
        }
    }

    /// Add `f(t)` onto an acceleration buffer.
    pub fn add_to(&self, t: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.static_part.coeffs()) {
            *o += c;
        }
        if let Some((signal, f1)) = &self.modulation {
            let g = signal.eval(t);
            for (o, c) in out.iter_mut().zip(f1.coeffs()) {
                *o += g * c;
            }
        }
    }

    /// `||f||_{L^inf(R+, L^2)}` for this grammar: `||f0|| + sup|g| ||f1||`.
    pub fn sup_l2_norm(&self) -> f64 {
        let base = self.static_part.sobolev_norm_sq(0.0).sqrt();
        match &self.modulation {
            None => base,
            Some((signal, f1)) => {
                base + signal.sup_abs() * f1.sobolev_norm_sq(0.0).sqrt()
            }
        }
    }
}

/// Physical and discretization parameters of a run.
///
/// Sign convention: `p` is negative when the bridge is stretched, positive
/// when compressed; the cable stiffness enters the equation as `k^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeParams {
    pub p: f64,
    pub k: f64,
    pub forcing: ForcingSpec,
    pub n_modes: usize,
    pub quad_intervals: usize,
    pub damping: f64,
}

impl BridgeParams {
    pub fn new(
        p: f64,
        k: f64,
        forcing: ForcingSpec,
        n_modes: usize,
        quad_intervals: usize,
        damping: f64,
    ) -> Result<Self> {
        if !(p.is_finite() && k.is_finite() && damping.is_finite()) {
            return Err(BridgeError::InvalidParameter("non-finite parameter".into()));
        }
        if k < 0.0 {
            return Err(BridgeError::InvalidParameter(format!("k = {k} must be >= 0")));
        }
        if n_modes == 0 {
            return Err(BridgeError::InvalidParameter("N must be >= 1".into()));
        }
        if quad_intervals < 16 * n_modes {
            return Err(BridgeError::GridTooCoarse {
                m: quad_intervals,
                order: n_modes,
                required: 16 * n_modes,
            });
        }
        if damping <= 0.0 {
            return Err(BridgeError::InvalidParameter(format!(
                "damping = {damping} must be > 0"
            )));
        }
        if forcing.order() != n_modes {
            return Err(BridgeError::OrderMismatch(forcing.order(), n_modes));
        }
        Ok(Self { p, k, forcing, n_modes, quad_intervals, damping })
    }

    /// Construct from the dimensionless loads of the static problem:
    /// `p = b pi^2`, `k = kappa pi^2`.
    pub fn from_bk(
        b: f64,
        kappa: f64,
        forcing: ForcingSpec,
        n_modes: usize,
        quad_intervals: usize,
        damping: f64,
    ) -> Result<Self> {
        Self::new(b * PI * PI, kappa * PI * PI, forcing, n_modes, quad_intervals, damping)
    }

    pub fn b(&self) -> f64 {
        self.p / (PI * PI)
    }

    pub fn kappa(&self) -> f64 {
        self.k / (PI * PI)
    }

    pub fn table(&self) -> Result<SineTable> {
        SineTable::new(self.n_modes, QuadratureGrid::new(self.quad_intervals)?)
    }
}

/// Which one-step scheme drives `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Exponential,
    Rk4,
}

/// Time-ordered samples of the flow plus per-sample diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub records: Vec<DiagnosticRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &State {
        self.states.last().expect("trajectory never empty")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory never empty")
    }
}

/// Right-hand side of the first-order system: returns `(u_t, u_tt)`.
///
/// Mode-wise, `a_n'' = f_n(t) - (n pi)^4 a_n - damping v_n
/// + (p - S) (n pi)^2 a_n - k^2 (u+)_n` with `S = ||u||_1^2`.
pub fn rhs(state: &State, params: &BridgeParams, t: f64, table: &SineTable) -> Result<State> {
    if state.order() != params.n_modes {
        return Err(BridgeError::OrderMismatch(state.order(), params.n_modes));
    }
    let mut accel = nonlinear_accel(&state.position, params, t, table)?;
    for (n, a) in accel.iter_mut().enumerate() {
        let mu = ((n + 1) as f64 * PI).powi(2);
        *a += -mu * mu * state.position.coeffs()[n] - params.damping * state.velocity.coeffs()[n];
    }
    State::new(state.velocity.clone(), ModalField::new(accel)?)
}

/// The non-stiff part of the acceleration:
/// `f(t) + (p - S) A^{1/2} u - k^2 u+`.
fn nonlinear_accel(
    u: &ModalField,
    params: &BridgeParams,
    t: f64,
    table: &SineTable,
) -> Result<Vec<f64>> {
    let s_axial = u.sobolev_norm_sq(1.0);
    let mut out = vec![0.0; params.n_modes];
    params.forcing.add_to(t, &mut out);
    for (n, o) in out.iter_mut().enumerate() {
        let mu = ((n + 1) as f64 * PI).powi(2);
        *o += (params.p - s_axial) * mu * u.coeffs()[n];
    }
    if params.k != 0.0 {
        let plus = table.positive_part(u)?;
        let k2 = params.k * params.k;
        for (o, c) in out.iter_mut().zip(plus.coeffs()) {
            *o -= k2 * c;
        }
    }
    Ok(out)
}

/// Exact propagator of `a'' + delta a' + lambda a = 0` over a time `tau`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ModePropagator {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl ModePropagator {
    pub(crate) fn new(lambda: f64, delta: f64, tau: f64) -> Self {
        let mu = lambda - 0.25 * delta * delta;
        // c = cos(omega tau), s = sin(omega tau)/omega, continued to mu <= 0
        let (c, s) = if mu * tau * tau > 1e-8 {
            let w = mu.sqrt();
            ((w * tau).cos(), (w * tau).sin() / w)
        } else if mu * tau * tau < -1e-8 {
            let w = (-mu).sqrt();
            ((w * tau).cosh(), (w * tau).sinh() / w)
        } else {
            let x = mu * tau * tau;
            (
                1.0 - x / 2.0 + x * x / 24.0,
                tau * (1.0 - x / 6.0 + x * x / 120.0),
            )
        };
        let e = (-0.5 * delta * tau).exp();
        ModePropagator {
            m11: e * (c + 0.5 * delta * s),
            m12: e * s,
            m21: -lambda * e * s,
            m22: e * (c - 0.5 * delta * s),
        }
    }

    #[inline]
    pub(crate) fn apply(&self, a: f64, v: f64) -> (f64, f64) {
        (self.m11 * a + self.m12 * v, self.m21 * a + self.m22 * v)
    }

    /// Exact Duhamel weight `L^{-1} (e^{tau L} - I) (0, 1)^T` for a constant
    /// acceleration, so states with `L z + (0, g) = 0` are exactly stationary.
    #[inline]
    pub(crate) fn duhamel(&self, lambda: f64, delta: f64) -> (f64, f64) {
        ((1.0 - self.m22 - delta * self.m12) / lambda, self.m12)
    }
}

/// One-step integrator with cached per-mode propagators for a fixed `dt`.
pub struct Stepper {
    params: BridgeParams,
    table: SineTable,
    dt: f64,
    pub(crate) full: Vec<ModePropagator>,
    pub(crate) half: Vec<ModePropagator>,
    /// Duhamel weights of `full` / `half` (position, velocity).
    pub(crate) phi_full: Vec<(f64, f64)>,
    pub(crate) phi_half: Vec<(f64, f64)>,
}

impl Stepper {
    pub fn new(params: &BridgeParams, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(BridgeError::InvalidParameter(format!("dt = {dt} must be > 0")));
        }
        let table = params.table()?;
        let mut full = Vec::with_capacity(params.n_modes);
        let mut half = Vec::with_capacity(params.n_modes);
        let mut phi_full = Vec::with_capacity(params.n_modes);
        let mut phi_half = Vec::with_capacity(params.n_modes);
        for n in 1..=params.n_modes {
            let lambda = (n as f64 * PI).powi(4);
            full.push(ModePropagator::new(lambda, params.damping, dt));
            half.push(ModePropagator::new(lambda, params.damping, dt / 2.0));
            phi_full.push(full[n - 1].duhamel(lambda, params.damping));
            phi_half.push(half[n - 1].duhamel(lambda, params.damping));
        }
        Ok(Self { params: params.clone(), table, dt, full, half, phi_full, phi_half })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn table(&self) -> &SineTable {
        &self.table
    }

    pub fn params(&self) -> &BridgeParams {
        &self.params
    }

    pub(crate) fn nonlinear_accel(&self, u: &ModalField, t: f64) -> Result<Vec<f64>> {
        nonlinear_accel(u, &self.params, t, &self.table)
    }

    /// Exponential midpoint step: exact linear propagation, midpoint
    /// quadrature of the Duhamel integral with a half-step predictor.
    pub fn step_exponential(&self, state: &State, t: f64) -> Result<State> {
        let n = self.params.n_modes;
        if state.order() != n {
            return Err(BridgeError::OrderMismatch(state.order(), n));
        }
        let dt = self.dt;
        let u = state.position.coeffs();
        let v = state.velocity.coeffs();

        let g0 = self.nonlinear_accel(&state.position, t)?;
        let mut uh = vec![0.0; n];
        for i in 0..n {
            let (a, _) = self.half[i].apply(u[i], v[i]);
            uh[i] = a + self.phi_half[i].0 * g0[i];
        }
        let gm = self.nonlinear_accel(&ModalField::new(uh)?, t + 0.5 * dt)?;
        let mut u1 = vec![0.0; n];
        let mut v1 = vec![0.0; n];
        for i in 0..n {
            let (a, b) = self.full[i].apply(u[i], v[i]);
            u1[i] = a + self.phi_full[i].0 * gm[i];
            v1[i] = b + self.phi_full[i].1 * gm[i];
        }
        State::new(ModalField::new(u1)?, ModalField::new(v1)?)
    }

    /// Classical 4-stage explicit step on the full first-order system.
    pub fn step_rk4(&self, state: &State, t: f64) -> Result<State> {
        let dt = self.dt;
        let add = |z: &State, d: &State, s: f64| -> Result<State> {
            State::new(
                z.position.add(&d.position.scaled(s))?,
                z.velocity.add(&d.velocity.scaled(s))?,
            )
        };
        let k1 = rhs(state, &self.params, t, &self.table)?;
        let k2 = rhs(&add(state, &k1, dt / 2.0)?, &self.params, t + dt / 2.0, &self.table)?;
        let k3 = rhs(&add(state, &k2, dt / 2.0)?, &self.params, t + dt / 2.0, &self.table)?;
        let k4 = rhs(&add(state, &k3, dt)?, &self.params, t + dt, &self.table)?;
        let mut out = add(state, &k1, dt / 6.0)?;
        out = add(&out, &k2, dt / 3.0)?;
        out = add(&out, &k3, dt / 3.0)?;
        out = add(&out, &k4, dt / 6.0)?;
        if out.h_norm_sq() > BLOWUP_GUARD * BLOWUP_GUARD {
            return Err(BridgeError::BlowUp { t: t + dt, guard: BLOWUP_GUARD });
        }
        Ok(out)
    }

    pub fn step(&self, state: &State, t: f64, scheme: Scheme) -> Result<State> {
        match scheme {
            Scheme::Exponential => self.step_exponential(state, t),
            Scheme::Rk4 => self.step_rk4(state, t),
        }
    }
}

/// Single exponential step without a cached stepper.
pub fn step_exponential(state: &State, params: &BridgeParams, t: f64, dt: f64) -> Result<State> {
    Stepper::new(params, dt)?.step_exponential(state, t)
}

/// Single RK4 step without a cached stepper.
pub fn step_rk4(state: &State, params: &BridgeParams, t: f64, dt: f64) -> Result<State> {
    Stepper::new(params, dt)?.step_rk4(state, t)
}

/// Integrate from `init` to time `horizon`, storing every `stride` steps
/// (always including `t = 0` and `t = horizon`).
pub fn simulate(
    params: &BridgeParams,
    init: &State,
    horizon: f64,
    dt: f64,
    stride: usize,
    scheme: Scheme,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(BridgeError::InvalidParameter(format!("T = {horizon} must be > 0")));
    }
    if stride == 0 {
        return Err(BridgeError::InvalidParameter("stride must be >= 1".into()));
    }
    let n_steps = (horizon / dt).round().max(1.0) as usize;
    let dt = horizon / n_steps as f64;
    let stepper = Stepper::new(params, dt)?;

    let mut times = Vec::with_capacity(n_steps / stride + 2);
    let mut states = Vec::with_capacity(n_steps / stride + 2);
    let mut records = Vec::with_capacity(n_steps / stride + 2);
    let mut push = |t: f64, z: &State| -> Result<()> {
        records.push(energy_components(z, params, t, stepper.table())?);
        times.push(t);
        states.push(z.clone());
        Ok(())
    };

    let mut z = init.clone();
    push(0.0, &z)?;
    for step in 1..=n_steps {
        let t = (step - 1) as f64 * dt;
        z = stepper.step(&z, t, scheme)?;
        let norm_sq = z.h_norm_sq();
        if !norm_sq.is_finite() || norm_sq > BLOWUP_GUARD * BLOWUP_GUARD {
            return Err(BridgeError::BlowUp { t: step as f64 * dt, guard: BLOWUP_GUARD });
        }
        if step % stride == 0 || step == n_steps {
            push(step as f64 * dt, &z)?;
        }
    }
    Ok(Trajectory { times, states, records })
}
