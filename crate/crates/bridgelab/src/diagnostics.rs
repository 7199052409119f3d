//! Scalar functionals along states and trajectories.
//!
//! Conventions (with `lambda_1 = pi^4`, `p_c = pi^2`):
//!
//! * phase-space norm `calE = ||u||_2^2 + ||v||^2`;
//! * energy `E = calE + (||u||_1^2 - p)^2 / 2 + k^2 ||u+||^2`, which obeys
//!   `dE/dt + 2 ||u_t||^2 = 2 <u_t, f>` along solutions;
//! * Lyapunov functional `L = E - 2 <u, f>`, nonincreasing when `f` is
//!   time-independent and constant only at equilibria;
//! * `Upsilon = <u, v>` and the absorbing-set functional
//!   `Lambda = L + Upsilon + C` with
//!   `C = 2 ||f||^2 / lambda_1 + 1/(2 lambda_1) + |p|/(2 sqrt(lambda_1))`;
//! * `Phi = calE + eps Upsilon - p^2 / 2` with `eps = min(lambda_1 C(p), 1)`,
//!   the functional behind the sub-critical exponential decay rate
//!   `c = eps (1 + eps) / 2`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{BridgeParams, Trajectory};
use crate::modal::{SineTable, State};
use crate::{BridgeError, Result, LAMBDA_1, P_CRITICAL};

/// All per-sample scalars stored along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    /// Phase-space norm `||u||_2^2 + ||v||^2`.
    pub cal_e: f64,
    /// Full energy (always `>= cal_e >= 0`).
    pub e: f64,
    /// Lyapunov functional `E - 2<u, f>`.
    pub l: f64,
    /// `<u, v>`.
    pub upsilon: f64,
    /// Absorbing-set functional `L + Upsilon + C`.
    pub lambda: f64,
    /// Decay functional `calE + eps Upsilon - p^2/2`.
    pub phi: f64,
    /// Axial strain `||u||_1^2`.
    pub axial: f64,
    /// Cable energy `k^2 ||u+||^2`.
    pub cable: f64,
}

/// Which scalar of a [`DiagnosticRecord`] a fit or scan looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajScalar {
    CalE,
    E,
    L,
    Upsilon,
    Lambda,
    Phi,
    Axial,
    Cable,
}

impl TrajScalar {
    pub fn extract(&self, r: &DiagnosticRecord) -> f64 {
        match self {
            TrajScalar::CalE => r.cal_e,
            TrajScalar::E => r.e,
            TrajScalar::L => r.l,
            TrajScalar::Upsilon => r.upsilon,
            TrajScalar::Lambda => r.lambda,
            TrajScalar::Phi => r.phi,
            TrajScalar::Axial => r.axial,
            TrajScalar::Cable => r.cable,
        }
    }
}

/// `C(p)` of the coercivity bound `<A u - p A^{1/2} u, u> >= C(p) ||u||_2^2`,
/// extended by zero above the critical load (where no bound holds).
fn coercivity_constant(p: f64) -> f64 {
    if p <= 0.0 {
        1.0
    } else {
        (1.0 - p / P_CRITICAL).max(0.0)
    }
}

fn epsilon(p: f64) -> f64 {
    (LAMBDA_1 * coercivity_constant(p)).min(1.0)
}

/// Guaranteed sub-critical decay data: `C(p)`, `eps = min(lambda_1 C(p), 1)`
/// and the energy envelope rate `c = eps (1 + eps) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuaranteedRate {
    pub cp: f64,
    pub eps: f64,
    pub c: f64,
}

pub fn guaranteed_rate(p: f64) -> Result<GuaranteedRate> {
    if p >= P_CRITICAL {
        return Err(BridgeError::SupercriticalLoad { p });
    }
    let cp = coercivity_constant(p);
    let eps = epsilon(p);
    Ok(GuaranteedRate { cp, eps, c: eps * (1.0 + eps) / 2.0 })
}

/// Every functional of a single state, with `f` evaluated at time `t`.
pub fn energy_components(
    state: &State,
    params: &BridgeParams,
    t: f64,
    table: &SineTable,
) -> Result<DiagnosticRecord> {
    let u = &state.position;
    let v = &state.velocity;
    let axial = u.sobolev_norm_sq(1.0);
    let cal_e = u.sobolev_norm_sq(2.0) + v.sobolev_norm_sq(0.0);
    let cable = if params.k != 0.0 {
        params.k * params.k * table.positive_part_norm_sq(u)?
    } else {
        0.0
    };
    let e = cal_e + 0.5 * (axial - params.p).powi(2) + cable;
    let f_t = params.forcing.at(t);
    let l = e - 2.0 * u.dot(&f_t);
    let upsilon = u.dot(v);
    let f_sup = params.forcing.sup_l2_norm();
    let c_abs = 2.0 / LAMBDA_1 * f_sup * f_sup
        + 1.0 / (2.0 * LAMBDA_1)
        + params.p.abs() / (2.0 * P_CRITICAL);
    let lambda = l + upsilon + c_abs;
    let phi = cal_e + epsilon(params.p) * upsilon - 0.5 * params.p * params.p;
    Ok(DiagnosticRecord { cal_e, e, l, upsilon, lambda, phi, axial, cable })
}

/// Max over stored intervals of the normalized defect in the energy identity
/// `Delta E + 2 int ||u_t||^2 - 2 int <u_t, f> = 0` (trapezoid on the
/// sample stride).
pub fn energy_identity_residual(traj: &Trajectory, params: &BridgeParams) -> Result<f64> {
    if traj.len() < 2 {
        return Err(BridgeError::Contract(
            "energy identity needs at least 2 samples".into(),
        ));
    }
    let mut worst: f64 = 0.0;
    for j in 0..traj.len() - 1 {
        let h = traj.times[j + 1] - traj.times[j];
        let g = |i: usize| -> f64 {
            let v = &traj.states[i].velocity;
            let f = params.forcing.at(traj.times[i]);
            v.sobolev_norm_sq(0.0) - v.dot(&f)
        };
        let defect = traj.records[j + 1].e - traj.records[j].e + h * (g(j) + g(j + 1));
        let res = defect.abs() / (1.0 + traj.records[j].e);
        worst = worst.max(res);
    }
    Ok(worst)
}

/// Result of the Lyapunov monotonicity audit.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub monotone: bool,
    /// Largest increase `L(t_{j+1}) - L(t_j)` observed (0 if none).
    pub max_violation: f64,
    pub tolerance: f64,
}

/// Checks `L(t_{j+1}) <= L(t_j) + tol` with `tol = 1e-8 (1 + |L(0)|)`.
/// Only meaningful for autonomous forcing, where the monotonicity is exact.
pub fn lyapunov_check(traj: &Trajectory, params: &BridgeParams) -> Result<LyapunovReport> {
    if !params.forcing.is_autonomous() {
        return Err(BridgeError::Contract(
            "Lyapunov monotonicity is only claimed for autonomous forcing".into(),
        ));
    }
    if traj.is_empty() {
        return Err(BridgeError::Contract("empty trajectory".into()));
    }
    let tolerance = 1e-8 * (1.0 + traj.records[0].l.abs());
    let mut max_violation: f64 = 0.0;
    for j in 0..traj.len() - 1 {
        max_violation = max_violation.max(traj.records[j + 1].l - traj.records[j].l);
    }
    Ok(LyapunovReport { monotone: max_violation <= tolerance, max_violation, tolerance })
}

/// An exponential fit `scalar(t) ~ prefactor * exp(-rate * t)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub prefactor: f64,
    pub envelope_points: usize,
}

/// Least-squares line fit to the log of the scalar's peak envelope over
/// `[t_a, t_b]`.
///
/// The envelope consists of the samples not exceeded by any later sample in
/// the window (the descending sequence of peaks); for a monotone decay every
/// sample qualifies. Values are floored at `1e-300` in absolute value so an
/// exact zero cannot poison the log.
pub fn fit_decay_rate(
    traj: &Trajectory,
    scalar: TrajScalar,
    window: (f64, f64),
) -> Result<DecayFit> {
    let (ta, tb) = window;
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(&traj.records)
        .filter(|(&t, _)| t >= ta && t <= tb)
        .map(|(&t, r)| (t, scalar.extract(r).abs().max(1e-300)))
        .collect();
    fit_exponential_envelope(&pts)
}

/// Envelope fit on raw `(t, value)` samples; see [`fit_decay_rate`].
pub fn fit_exponential_envelope(pts: &[(f64, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(t, s)| (t, s.abs().max(1e-300)))
        .collect();
    // Right-to-left running maximum selects the peak envelope.
    let mut envelope = Vec::new();
    let mut later_max = f64::NEG_INFINITY;
    for &(t, s) in pts.iter().rev() {
        if s >= later_max {
            envelope.push((t, s));
            later_max = s;
        }
    }
    envelope.reverse();
    if envelope.len() < 4 {
        return Err(BridgeError::Contract(format!(
            "decay fit needs at least 4 envelope points, found {}",
            envelope.len()
        )));
    }
    // Ordinary least squares on (t, ln s).
    let n = envelope.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, s) in &envelope {
        let y = s.ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom.abs() < 1e-30 {
        return Err(BridgeError::Contract("degenerate time window for fit".into()));
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    Ok(DecayFit {
        rate: -slope,
        prefactor: intercept.exp(),
        envelope_points: envelope.len(),
    })
}

/// First stored time after which `E` stays at or below `threshold` forever
/// (within the trajectory); `None` if the tail never settles below it.
pub fn entry_time(traj: &Trajectory, threshold: f64) -> Option<f64> {
    match traj.records.iter().rposition(|r| r.e > threshold) {
        None => traj.times.first().copied(),
        Some(i) if i + 1 < traj.len() => Some(traj.times[i + 1]),
        Some(_) => None,
    }
}
