//! Modal spectral laboratory for the damped extensible suspension-bridge beam
//!
//! The model is the one-dimensional beam equation with pinned ends on `[0,1]`,
//!
//! ```text
//! u_tt + u_xxxx + (p - ||u_x||^2) u_xx + u_t + k^2 u+ = f(x,t),
//! u(0) = u(1) = u_xx(0) = u_xx(1) = 0,
//! ```
//!
//! where `p` is the axial load, the `||u_x||^2` term models midplane stretching
//! of the road bed, and `k^2 u+` is the one-sided restoring force of the
//! suspension cables (active only where the deflection `u` is downward-positive).
//!
//! Everything is discretized in the orthonormal sine eigenbasis of the bending
//! operator, `e_n(x) = sqrt(2) sin(n pi x)`, which diagonalizes `u_xxxx` with
//! eigenvalues `(n pi)^4` and `-u_xx` with eigenvalues `(n pi)^2`.
//!
//! The crate is organized around the experiments the model supports:
//!
//! * [`modal`] — fields, Sobolev-scale norms, quadrature projection, and the
//!   positive part `u+`.
//! * [`dynamics`] — time integration of the truncated system (an exact modal
//!   propagator for the stiff linear part plus an explicit midpoint treatment
//!   of the nonlinearities, and a classical RK4 reference).
//! * [`diagnostics`] — every scalar functional of interest: the phase-space
//!   norm, the full energy, the Lyapunov functional, absorbing-set
//!   functionals, decay-rate fits, and entry times.
//! * [`equilibria`] — semismooth Newton solves of the static problem, analytic
//!   single-mode branches, natural-parameter continuation, and linearized
//!   stability.
//! * [`attractor`] — long-time experiments: omega-limit classification, basin
//!   sweeps, and the exponential/compact semigroup decomposition.
//! * [`cli`] — configuration and artifact emission for the `bridgelab` binary.
//!
//! A quick taste: simulate the unforced beam below the buckling load and watch
//! the energy decay.
//!
//! ```
//! use bridgelab::dynamics::{BridgeParams, ForcingSpec, simulate, Scheme};
//! use bridgelab::modal::{ModalField, State};
//!
//! let params = BridgeParams::new(0.0, 0.0, ForcingSpec::none(8), 8, 128, 1.0).unwrap();
//! let init = State::new(ModalField::basis(8, 1).unwrap().scaled(0.1),
//!                       ModalField::zeros(8)).unwrap();
//! let traj = simulate(&params, &init, 10.0, 1e-3, 10, Scheme::Exponential).unwrap();
//! let first = traj.records.first().unwrap().cal_e;
//! let last = traj.records.last().unwrap().cal_e;
//! // the energy decays at least like exp(-t) here
//! assert!(last < 1e-3 * first);
//! ```

pub mod attractor;
pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod equilibria;
pub mod io;
pub mod modal;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("invalid modal field: {0}")]
    InvalidField(String),
    #[error("evaluation point {0} outside [0,1]")]
    PointOutsideDomain(f64),
    #[error("quadrature grid too coarse: M = {m} intervals < 16 N = {required} (order N = {order})")]
    GridTooCoarse { m: usize, order: usize, required: usize },
    #[error("modal order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state blew up at t = {t:.6} (norm above {guard:.1e}); check dt or the model setup")]
    BlowUp { t: f64, guard: f64 },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("Newton did not converge after {iters} iterations (last residual {residual:.3e})")]
    NewtonStalled { iters: usize, residual: f64 },
    #[error("singular Jacobian in Newton solve (even after Tikhonov retry)")]
    SingularJacobian,
    #[error("no guaranteed decay above the critical load: p = {p:.6} >= pi^2")]
    SupercriticalLoad { p: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BridgeError>;

/// First eigenvalue of the bending operator, `lambda_1 = pi^4`.
pub const LAMBDA_1: f64 = 97.40909103400243;

/// Critical buckling load `p_c = sqrt(lambda_1) = pi^2`.
pub const P_CRITICAL: f64 = 9.869604401089358;
