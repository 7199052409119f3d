//! The static problem: steady states, analytic single-mode branches,
//! natural-parameter continuation and linearized stability.
//!
//! Loads are parameterized as `p = b pi^2` and `k = kappa pi^2`. The single
//! mode `u(x) = A sin(pi x)` solves the steady equation exactly: the negative
//! branch (`u+ = 0`, cables slack) has `A = -sqrt(2(b-1))` for `b > 1`, and
//! the positive branch (`u+ = u`, cables taut) has `A = sqrt(2(b-1-kappa^2))`
//! for `b > 1 + kappa^2`. At `kappa = 1` these are the two curves of the
//! bifurcation picture, emanating from `b = 1` and `b = 2`.
//!
//! Nontrivial solutions are found by a semismooth Newton method whose
//! generalized Jacobian uses the pointwise indicator of `{u > 0}` on the
//! quadrature nodes for the one-sided cable term.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{BridgeParams, ForcingSpec};
use crate::modal::{ModalField, QuadratureGrid, SineTable};
use crate::{BridgeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stability::Stable => write!(f, "stable"),
            Stability::Unstable => write!(f, "unstable"),
            Stability::Marginal => write!(f, "marginal"),
        }
    }
}

/// A steady state with its residual, loads and stability tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Equilibrium {
    pub field: ModalField,
    pub residual_norm: f64,
    pub b: f64,
    pub kappa: f64,
    pub stability: Stability,
    pub branch_label: String,
}

impl Equilibrium {
    /// Signed sine-basis amplitude `sqrt(2) a_1`; for the pure mode-1 states
    /// this equals the `A` of the branch formulas.
    pub fn amplitude(&self) -> f64 {
        2f64.sqrt() * self.field.coeffs()[0]
    }

    pub fn l2_norm(&self) -> f64 {
        self.field.sobolev_norm_sq(0.0).sqrt()
    }
}

/// An ordered sweep of equilibria along `b` at fixed `kappa`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub points: Vec<Equilibrium>,
    /// Load at which the branch amplitude falls below `1e-6`, if the
    /// continuation reached it.
    pub origin_b: Option<f64>,
    /// Set when the branch was truncated before the range end.
    pub truncation_reason: Option<String>,
}

/// Steady parameters without forcing machinery.
fn steady_params(b: f64, kappa: f64, order: usize) -> Result<BridgeParams> {
    BridgeParams::from_bk(b, kappa, ForcingSpec::none(order), order, 16 * order, 1.0)
}

/// Modal residual of the static equation
/// `r_n = (n pi)^4 u_n - (p - S)(n pi)^2 u_n + k^2 (u+)_n - f0_n`,
/// with `S = ||u||_1^2`.
pub fn steady_residual(
    field: &ModalField,
    params: &BridgeParams,
    table: &SineTable,
) -> Result<ModalField> {
    if field.order() != params.n_modes {
        return Err(BridgeError::OrderMismatch(field.order(), params.n_modes));
    }
    let s_axial = field.sobolev_norm_sq(1.0);
    let plus = if params.k != 0.0 {
        Some(table.positive_part(field)?)
    } else {
        None
    };
    let k2 = params.k * params.k;
    let f0 = &params.forcing.static_part;
    let mut r = vec![0.0; params.n_modes];
    for (n, rn) in r.iter_mut().enumerate() {
        let mu = ((n + 1) as f64 * PI).powi(2);
        *rn = mu * mu * field.coeffs()[n] - (params.p - s_axial) * mu * field.coeffs()[n]
            - f0.coeffs()[n];
        if let Some(plus) = &plus {
            *rn += k2 * plus.coeffs()[n];
        }
    }
    ModalField::new(r)
}

/// Generalized Jacobian of the static residual at `field`, with the cable
/// term linearized by the node indicator `mask` (usually `{u > 0}`).
fn steady_jacobian(
    field: &ModalField,
    params: &BridgeParams,
    table: &SineTable,
    mask: &[bool],
) -> DMatrix<f64> {
    let n = params.n_modes;
    let s_axial = field.sobolev_norm_sq(1.0);
    let mut jac = DMatrix::zeros(n, n);
    for i in 0..n {
        let mu_i = ((i + 1) as f64 * PI).powi(2);
        jac[(i, i)] = mu_i * mu_i - (params.p - s_axial) * mu_i;
        // rank-one contribution of S = ||u||_1^2
        for j in 0..n {
            let mu_j = ((j + 1) as f64 * PI).powi(2);
            jac[(i, j)] += mu_i * field.coeffs()[i] * 2.0 * mu_j * field.coeffs()[j];
        }
    }
    if params.k != 0.0 {
        let k2 = params.k * params.k;
        let w = table.grid().weights();
        for i in 0..n {
            let bi = table.basis_row(i + 1);
            for j in i..n {
                let bj = table.basis_row(j + 1);
                let mut acc = 0.0;
                for (l, (&wi, &m)) in w.iter().zip(mask).enumerate() {
                    if m {
                        acc += wi * bi[l] * bj[l];
                    }
                }
                jac[(i, j)] += k2 * acc;
                if i != j {
                    jac[(j, i)] += k2 * acc;
                }
            }
        }
    }
    jac
}

fn node_mask(field: &ModalField, table: &SineTable) -> Result<Vec<bool>> {
    Ok(table.evaluate(field)?.iter().map(|&s| s > 0.0).collect())
}

/// Residual norm on a 4x finer grid, guarding against aliasing in the
/// positive-part projection.
fn fine_residual_norm(field: &ModalField, params: &BridgeParams) -> Result<f64> {
    let fine = SineTable::new(
        params.n_modes,
        QuadratureGrid::new(4 * params.quad_intervals)?,
    )?;
    Ok(steady_residual(field, params, &fine)?
        .sobolev_norm_sq(0.0)
        .sqrt())
}

fn label_for(field: &ModalField) -> String {
    let total = field.sobolev_norm_sq(0.0);
    if total.sqrt() < 1e-9 {
        return "trivial".into();
    }
    let a1 = field.coeffs()[0];
    let rest = total - a1 * a1;
    if rest < 1e-12 * total {
        if a1 < 0.0 {
            "mode1-negative".into()
        } else {
            "mode1-positive".into()
        }
    } else {
        "numeric".into()
    }
}

/// Semismooth Newton on the modal residual, with backtracking and a
/// Tikhonov-regularized retry on singular Jacobians.
pub fn newton_solve(
    guess: &ModalField,
    params: &BridgeParams,
    table: &SineTable,
    tol: f64,
    max_iter: usize,
) -> Result<Equilibrium> {
    if !(tol > 0.0) {
        return Err(BridgeError::InvalidParameter(format!("tol = {tol} must be > 0")));
    }
    let mut u = guess.clone();
    let mut r = steady_residual(&u, params, table)?;
    let mut norm = r.sobolev_norm_sq(0.0).sqrt();
    // one extra pass so a solve converging on the last update is accepted
    for _ in 0..=max_iter {
        if norm <= tol {
            let field = u;
            let residual_norm = fine_residual_norm(&field, params)?;
            let stability = classify_stability(&field, params, table)?;
            return Ok(Equilibrium {
                branch_label: label_for(&field),
                residual_norm,
                b: params.b(),
                kappa: params.kappa(),
                stability,
                field,
            });
        }
        let mask = node_mask(&u, table)?;
        let jac = steady_jacobian(&u, params, table, &mask);
        let rv = DVector::from_column_slice(r.coeffs());
        let delta = match jac.clone().lu().solve(&rv) {
            Some(d) => d,
            None => {
                let shifted = jac + DMatrix::identity(params.n_modes, params.n_modes) * 1e-10;
                shifted.lu().solve(&rv).ok_or(BridgeError::SingularJacobian)?
            }
        };
        // backtracking on the residual norm
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..8 {
            let trial = ModalField::new(
                u.coeffs()
                    .iter()
                    .zip(delta.iter())
                    .map(|(a, d)| a - scale * d)
                    .collect(),
            )?;
            let trial_r = steady_residual(&trial, params, table)?;
            let trial_norm = trial_r.sobolev_norm_sq(0.0).sqrt();
            if trial_norm < norm || scale < 1.0 / 128.0 {
                u = trial;
                r = trial_r;
                norm = trial_norm;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(BridgeError::NewtonStalled { iters: max_iter, residual: norm })
}

/// The trivial state plus whichever signed mode-1 states exist at `(b, kappa)`.
pub fn single_mode_equilibria(b: f64, kappa: f64, order: usize) -> Result<Vec<Equilibrium>> {
    let params = steady_params(b, kappa, order)?;
    let table = params.table()?;
    let make = |a1: f64, label: &str| -> Result<Equilibrium> {
        let mut c = vec![0.0; order];
        c[0] = a1;
        let field = ModalField::new(c)?;
        let residual_norm = fine_residual_norm(&field, &params)?;
        let stability = classify_stability(&field, &params, &table)?;
        Ok(Equilibrium {
            field,
            residual_norm,
            b,
            kappa,
            stability,
            branch_label: label.into(),
        })
    };
    let mut out = vec![make(0.0, "trivial")?];
    if b >= 1.0 {
        // A = -sqrt(2(b-1)), orthonormal coefficient a1 = A / sqrt(2)
        out.push(make(-(b - 1.0).sqrt(), "mode1-negative")?);
    }
    if b >= 1.0 + kappa * kappa {
        out.push(make((b - 1.0 - kappa * kappa).sqrt(), "mode1-positive")?);
    }
    Ok(out)
}

/// Linearized stability about an equilibrium.
///
/// Assembles the `2N x 2N` first-order linearization with the cable term
/// linearized by the node indicator. For the trivial state the one-sided term
/// has no classical derivative anywhere, so both one-sided linearizations
/// (cables slack everywhere / taut everywhere) are examined and the worse
/// verdict wins. A nonzero equilibrium vanishing on many interior nodes is
/// tagged marginal (nonsmooth linearization).
pub fn classify_stability(
    field: &ModalField,
    params: &BridgeParams,
    table: &SineTable,
) -> Result<Stability> {
    let values = table.evaluate(field)?;
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale < 1e-9 {
        let interior = values.len() - 2;
        let s_off = stability_with_mask(field, params, table, &vec![false; interior + 2])?;
        let s_on = stability_with_mask(field, params, table, &vec![true; interior + 2])?;
        return Ok(match (s_off, s_on) {
            (Stability::Unstable, _) | (_, Stability::Unstable) => Stability::Unstable,
            (Stability::Marginal, _) | (_, Stability::Marginal) => Stability::Marginal,
            _ => Stability::Stable,
        });
    }
    let interior = &values[1..values.len() - 1];
    let zeroish = interior.iter().filter(|v| v.abs() < 1e-12 * scale).count();
    if zeroish * 20 > interior.len() {
        // u vanishes on a positive-measure node set: nonsmooth linearization
        return Ok(Stability::Marginal);
    }
    let mask: Vec<bool> = values.iter().map(|&v| v > 0.0).collect();
    stability_with_mask(field, params, table, &mask)
}

fn stability_with_mask(
    field: &ModalField,
    params: &BridgeParams,
    table: &SineTable,
    mask: &[bool],
) -> Result<Stability> {
    let n = params.n_modes;
    let k_mat = steady_jacobian(field, params, table, mask);
    let mut sys = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        sys[(i, n + i)] = 1.0;
        sys[(n + i, n + i)] = -params.damping;
        for j in 0..n {
            sys[(n + i, j)] = -k_mat[(i, j)];
        }
    }
    let eigs: DVector<Complex<f64>> = sys.complex_eigenvalues();
    let max_re = eigs.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.re));
    Ok(if max_re > 1e-8 {
        Stability::Unstable
    } else if max_re < -1e-8 {
        Stability::Stable
    } else {
        Stability::Marginal
    })
}

/// Natural-parameter continuation of a branch in `b` at fixed `kappa`.
///
/// Marches from the seed toward `b_end`, warm-starting Newton from the
/// previous point, halving the step on failure. When the branch amplitude
/// falls below `1e-6` the onset is refined by bisection and recorded as
/// `origin_b`.
pub fn continue_branch(
    seed: &Equilibrium,
    b_end: f64,
    step: f64,
    tol: f64,
) -> Result<Branch> {
    if !(step > 0.0) {
        return Err(BridgeError::InvalidParameter("step must be > 0".into()));
    }
    let order = seed.field.order();
    let kappa = seed.kappa;
    let table = steady_params(seed.b, kappa, order)?.table()?;
    let sign_guard = seed.field.coeffs()[0].signum();
    let direction = (b_end - seed.b).signum();
    if direction == 0.0 {
        return Err(BridgeError::InvalidParameter("b_end equals seed.b".into()));
    }

    let solve_at = |b: f64, warm: &ModalField| -> Option<Equilibrium> {
        let params = steady_params(b, kappa, order).ok()?;
        let eq = newton_solve(warm, &params, &table, tol, 50).ok()?;
        // reject convergence to the trivial state or to the opposite branch
        if eq.l2_norm() < 1e-6 || eq.field.coeffs()[0].signum() != sign_guard {
            None
        } else {
            Some(eq)
        }
    };

    let mut points = vec![seed.clone()];
    let mut origin_b = None;
    let mut truncation_reason = None;
    let mut b = seed.b;
    let mut current_step = step;
    let mut halvings_left = 24;

    while (b_end - b) * direction > 1e-12 {
        let b_next = if (b_end - b) * direction <= current_step {
            b_end
        } else {
            b + direction * current_step
        };
        let warm = points.last().expect("seeded").field.clone();
        match solve_at(b_next, &warm) {
            Some(eq) => {
                points.push(eq);
                b = b_next;
                current_step = step;
            }
            None => {
                if halvings_left == 0 || current_step < 1e-7 {
                    // branch ends between b and b_next: refine by bisection
                    let mut alive = b;
                    let mut dead = b_next;
                    let mut warm = points.last().expect("seeded").field.clone();
                    while (alive - dead).abs() > 1e-5 {
                        let mid = 0.5 * (alive + dead);
                        match solve_at(mid, &warm) {
                            Some(eq) => {
                                warm = eq.field.clone();
                                alive = mid;
                            }
                            None => dead = mid,
                        }
                    }
                    origin_b = Some(0.5 * (alive + dead));
                    break;
                }
                current_step *= 0.5;
                halvings_left -= 1;
                if halvings_left == 0 {
                    truncation_reason =
                        Some(format!("step halving exhausted near b = {b_next:.6}"));
                }
            }
        }
    }
    // If the continuation reached the range end with a vanishing amplitude,
    // the onset coincides with the endpoint.
    if origin_b.is_none() {
        if let Some(last) = points.last() {
            if last.l2_norm() < 1e-6 {
                origin_b = Some(last.b);
            }
        }
    }
    Ok(Branch { points, origin_b, truncation_reason })
}

/// Multi-start catalog of equilibria at `(b, kappa)`: analytic seeds plus
/// random restarts, deduplicated and deterministically ordered.
pub fn build_catalog(
    b: f64,
    kappa: f64,
    order: usize,
    n_random: usize,
    rng_seed: u64,
    tol: f64,
) -> Result<Vec<Equilibrium>> {
    use rand::{Rng, SeedableRng};
    let params = steady_params(b, kappa, order)?;
    let table = params.table()?;
    let mut found: Vec<Equilibrium> = Vec::new();
    let push_unique = |eq: Equilibrium, found: &mut Vec<Equilibrium>| {
        let dup = found.iter().any(|e| {
            e.field
                .sub(&eq.field)
                .map(|d| d.sobolev_norm_sq(2.0).sqrt() < 1e-6)
                .unwrap_or(false)
        });
        if !dup {
            found.push(eq);
        }
    };
    for analytic in single_mode_equilibria(b, kappa, order)? {
        // polish analytic seeds through Newton so every entry meets tol
        if analytic.l2_norm() < 1e-9 {
            push_unique(analytic, &mut found);
        } else if let Ok(eq) = newton_solve(&analytic.field, &params, &table, tol, 50) {
            push_unique(eq, &mut found);
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
    for _ in 0..n_random {
        let coeffs: Vec<f64> = (0..order).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let guess = ModalField::new(coeffs)?;
        if let Ok(eq) = newton_solve(&guess, &params, &table, tol, 80) {
            push_unique(eq, &mut found);
        }
    }
    found.sort_by(|a, b| {
        a.field.coeffs()[0]
            .partial_cmp(&b.field.coeffs()[0])
            .unwrap()
            .then_with(|| a.branch_label.cmp(&b.branch_label))
    });
    Ok(found)
}
