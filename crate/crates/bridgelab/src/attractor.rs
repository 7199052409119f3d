//! Long-time experiments: omega-limit classification against an equilibrium
//! catalog, basin-of-attraction sweeps, and the exponential/compact
//! semigroup decomposition `S(t)z = L(t)z + K(t)z`.
//!
//! The decomposition integrates the coupled triple `(u, v, w)` in lockstep:
//! `u` solves the full system, `v` the exponentially decaying part
//!
//! ```text
//! v_tt + A v + v_t - (p - ||u||_1^2) A^{1/2} v + alpha v = 0,  (v, v_t)(0) = z,
//! ```
//!
//! and `w = u - v` the compact part driven by `alpha v`, `k^2 u+` and `f`
//! from zero data. Because all three share the axial coupling `||u||_1^2`
//! and the scheme is linear in state and inhomogeneity, `u = v + w` holds to
//! machine precision at every sample; the report carries the fitted decay
//! rate of the `v`-part and the sup of the higher-order norm of the `w`-part.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::fit_exponential_envelope;
use crate::dynamics::{BridgeParams, Stepper, Trajectory, BLOWUP_GUARD};
use crate::equilibria::Equilibrium;
use crate::modal::{ModalField, State};
use crate::{BridgeError, Result};

/// Default phase-space tolerance for declaring convergence to an equilibrium.
pub const OMEGA_TOL: f64 = 1e-4;
/// Velocity norm below which a state counts as settled.
pub const VELOCITY_TOL: f64 = 1e-5;
/// Early-stop thresholds, far inside the classification tolerances so the
/// reported endpoint also satisfies steady-residual checks, which scale the
/// position error by up to `(N pi)^2`.
const SETTLE_DIST: f64 = 1e-8;
const SETTLE_VEL: f64 = 1e-9;

/// Outcome of one omega-limit run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmegaReport {
    pub initial: State,
    pub final_state: State,
    pub final_time: f64,
    pub nearest_label: String,
    pub nearest_b: f64,
    /// Phase-space distance `||z(T) - (u*, 0)||_H` to the nearest catalog member.
    pub distance: f64,
    pub velocity_norm: f64,
    pub converged: bool,
    pub reason: Option<String>,
}

fn nearest_in_catalog(z: &State, catalog: &[Equilibrium]) -> Result<(usize, f64)> {
    let mut best = (0usize, f64::INFINITY);
    for (i, eq) in catalog.iter().enumerate() {
        let du = z.position.sub(&eq.field)?;
        let d = (du.sobolev_norm_sq(2.0) + z.velocity.sobolev_norm_sq(0.0)).sqrt();
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// Simulate to at most `horizon` and classify the endpoint against the
/// catalog. Stops early once within [`OMEGA_TOL`] of a catalog member with
/// velocity below [`VELOCITY_TOL`].
pub fn omega_limit(
    params: &BridgeParams,
    init: &State,
    horizon: f64,
    dt: f64,
    catalog: &[Equilibrium],
) -> Result<OmegaReport> {
    if catalog.is_empty() {
        return Err(BridgeError::Contract("empty equilibrium catalog".into()));
    }
    if !params.forcing.is_autonomous() {
        return Err(BridgeError::Contract(
            "omega-limit classification assumes autonomous forcing".into(),
        ));
    }
    let stepper = Stepper::new(params, dt)?;
    let n_steps = (horizon / dt).round().max(1.0) as usize;
    let check_every = ((1.0 / dt).round() as usize).max(1);

    let mut z = init.clone();
    let mut t = 0.0;
    let mut blowup: Option<String> = None;
    for step in 1..=n_steps {
        match stepper.step_exponential(&z, t) {
            Ok(next) => z = next,
            Err(e) => {
                blowup = Some(e.to_string());
                break;
            }
        }
        t = step as f64 * dt;
        let norm_sq = z.h_norm_sq();
        if !norm_sq.is_finite() || norm_sq > BLOWUP_GUARD * BLOWUP_GUARD {
            blowup = Some(format!("blow-up at t = {t:.6}"));
            break;
        }
        if step % check_every == 0 || step == n_steps {
            let (idx, dist) = nearest_in_catalog(&z, catalog)?;
            let vel = z.velocity.sobolev_norm_sq(0.0).sqrt();
            if dist <= SETTLE_DIST && vel <= SETTLE_VEL {
                return Ok(OmegaReport {
                    initial: init.clone(),
                    final_state: z,
                    final_time: t,
                    nearest_label: catalog[idx].branch_label.clone(),
                    nearest_b: catalog[idx].b,
                    distance: dist,
                    velocity_norm: vel,
                    converged: true,
                    reason: None,
                });
            }
        }
    }
    let (idx, dist) = nearest_in_catalog(&z, catalog)?;
    let vel = z.velocity.sobolev_norm_sq(0.0).sqrt();
    Ok(OmegaReport {
        initial: init.clone(),
        final_state: z,
        final_time: t,
        nearest_label: catalog[idx].branch_label.clone(),
        nearest_b: catalog[idx].b,
        distance: dist,
        velocity_norm: vel,
        converged: blowup.is_none() && dist <= OMEGA_TOL && vel <= VELOCITY_TOL,
        reason: blowup.or_else(|| Some("horizon reached before convergence".into())),
    })
}

/// Basin-sweep result: per-run reports plus the per-equilibrium histogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub reports: Vec<OmegaReport>,
    pub histogram: std::collections::BTreeMap<String, usize>,
    pub unresolved: usize,
}

/// Deterministic seeded initial data in the phase-space ball of the given
/// radius.
pub fn sample_ball(order: usize, radius: f64, count: usize, seed: u64) -> Vec<State> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            // direction with H-weights absorbed, then a radial factor
            let gu: Vec<f64> = (0..order).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gv: Vec<f64> = (0..order).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r: f64 = radius * rng.gen_range(0.0..1.0_f64);
            let norm: f64 = gu
                .iter()
                .chain(&gv)
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt()
                .max(1e-12);
            let scale = r / norm;
            let u: Vec<f64> = gu
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let mu = ((i + 1) as f64 * std::f64::consts::PI).powi(2);
                    scale * g / mu
                })
                .collect();
            let v: Vec<f64> = gv.iter().map(|g| scale * g).collect();
            State::new(ModalField::new(u).unwrap(), ModalField::new(v).unwrap()).unwrap()
        })
        .collect()
}

/// Fan out independent omega-limit runs over the sampled ball; results are
/// merged in sampler order so a fixed seed reproduces bit-identical output.
pub fn basin_sweep(
    params: &BridgeParams,
    radius: f64,
    count: usize,
    horizon: f64,
    dt: f64,
    seed: u64,
    catalog: &[Equilibrium],
) -> Result<SweepSummary> {
    if count == 0 {
        return Err(BridgeError::InvalidParameter("count must be >= 1".into()));
    }
    let inits = sample_ball(params.n_modes, radius, count, seed);
    let reports: Vec<OmegaReport> = inits
        .par_iter()
        .map(|init| omega_limit(params, init, horizon, dt, catalog))
        .collect::<Result<Vec<_>>>()?;
    let mut histogram = std::collections::BTreeMap::new();
    let mut unresolved = 0usize;
    for r in &reports {
        if r.converged {
            *histogram.entry(r.nearest_label.clone()).or_insert(0) += 1;
        } else {
            unresolved += 1;
        }
    }
    Ok(SweepSummary { reports, histogram, unresolved })
}

/// Measured outcome of the semigroup decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub alpha: f64,
    /// Fitted exponential rate of `||(v, v_t)||_H`.
    pub v_decay_rate: f64,
    /// Sup of the `v`-part norm over the last fifth of the run.
    pub v_sup_norm_tail: f64,
    /// Sup over samples of `||w||_4^2 + ||w_t||_2^2`.
    pub w_h2_sup: f64,
    /// Max over samples of `||u - (v + w)||_2`.
    pub max_sum_error: f64,
    pub final_time: f64,
}

/// Pick `alpha` so that `||u||_2^2 - p ||u||_1^2 + alpha ||u||^2` stays
/// coercive; checked a posteriori sample by sample.
pub fn default_alpha(p: f64) -> f64 {
    (2.0 * p.abs() * crate::P_CRITICAL).max(1.0)
}

/// Integrate the coupled `(u, v, w)` triple and report the decay/compactness
/// measurements. Errors if the coercivity check for `alpha` fails at any
/// sampled state.
pub fn decompose_simulate(
    params: &BridgeParams,
    init: &State,
    alpha: f64,
    horizon: f64,
    dt: f64,
    stride: usize,
) -> Result<DecompositionReport> {
    if !params.forcing.is_autonomous() {
        return Err(BridgeError::Contract(
            "the semigroup decomposition assumes autonomous forcing".into(),
        ));
    }
    if stride == 0 {
        return Err(BridgeError::InvalidParameter("stride must be >= 1".into()));
    }
    let n = params.n_modes;
    let stepper = Stepper::new(params, dt)?;
    let n_steps = (horizon / dt).round().max(1.0) as usize;
    let dt = horizon / n_steps as f64;
    let stepper = if (dt - stepper.dt()).abs() > 0.0 {
        Stepper::new(params, dt)?
    } else {
        stepper
    };

    let mut zu = init.clone();
    let mut zv = init.clone();
    let mut zw = State::zeros(n);

    let mut v_samples: Vec<(f64, f64)> = Vec::new();
    let mut w_h2_sup: f64 = 0.0;
    let mut max_sum_error: f64 = 0.0;

    let mut record = |t: f64, zu: &State, zv: &State, zw: &State| -> Result<()> {
        let u = &zu.position;
        // coercivity check for alpha on the driving trajectory
        let lhs = 0.5 * u.sobolev_norm_sq(2.0);
        let rhs = u.sobolev_norm_sq(2.0) - params.p * u.sobolev_norm_sq(1.0)
            + alpha * u.sobolev_norm_sq(0.0);
        if lhs > rhs + 1e-9 * (1.0 + lhs) {
            return Err(BridgeError::Contract(format!(
                "alpha = {alpha} fails the coercivity check at t = {t:.4}"
            )));
        }
        let v_norm = (zv.position.sobolev_norm_sq(2.0)
            + zv.velocity.sobolev_norm_sq(0.0))
        .sqrt();
        v_samples.push((t, v_norm));
        let w_high = zw.position.sobolev_norm_sq(4.0) + zw.velocity.sobolev_norm_sq(2.0);
        w_h2_sup = w_h2_sup.max(w_high);
        let sum = zv.position.add(&zw.position)?;
        let err = zu.position.sub(&sum)?.sobolev_norm_sq(2.0).sqrt();
        max_sum_error = max_sum_error.max(err);
        Ok(())
    };

    record(0.0, &zu, &zv, &zw)?;

    // nonlinear accelerations of the three subsystems, sharing S = ||u||_1^2
    let g_triple = |zu: &State, zv: &State, _zw: &State, t: f64| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let gu = stepper.nonlinear_accel(&zu.position, t)?;
        let s_axial = zu.position.sobolev_norm_sq(1.0);
        let mut gv = vec![0.0; n];
        let mut gw = vec![0.0; n];
        for i in 0..n {
            let mu = ((i + 1) as f64 * std::f64::consts::PI).powi(2);
            let vpos = zv.position.coeffs()[i];
            gv[i] = (params.p - s_axial) * mu * vpos - alpha * vpos;
            // gw = gu - gv by construction of the splitting
            gw[i] = gu[i] - gv[i];
        }
        Ok((gu, gv, gw))
    };

    let half_apply = |z: &State, g: &[f64]| -> Result<State> {
        let mut u1 = vec![0.0; n];
        let mut v1 = vec![0.0; n];
        for i in 0..n {
            let (a, b) = stepper.half[i].apply(z.position.coeffs()[i], z.velocity.coeffs()[i]);
            u1[i] = a + stepper.phi_half[i].0 * g[i];
            v1[i] = b + stepper.phi_half[i].1 * g[i];
        }
        State::new(ModalField::new(u1)?, ModalField::new(v1)?)
    };
    let full_apply = |z: &State, gm: &[f64]| -> Result<State> {
        let mut u1 = vec![0.0; n];
        let mut v1 = vec![0.0; n];
        for i in 0..n {
            let (a, b) = stepper.full[i].apply(z.position.coeffs()[i], z.velocity.coeffs()[i]);
            u1[i] = a + stepper.phi_full[i].0 * gm[i];
            v1[i] = b + stepper.phi_full[i].1 * gm[i];
        }
        State::new(ModalField::new(u1)?, ModalField::new(v1)?)
    };

    for step in 1..=n_steps {
        let t = (step - 1) as f64 * dt;
        let (gu, gv, gw) = g_triple(&zu, &zv, &zw, t)?;
        let hu = half_apply(&zu, &gu)?;
        let hv = half_apply(&zv, &gv)?;
        let hw = half_apply(&zw, &gw)?;
        let (gum, gvm, gwm) = g_triple(&hu, &hv, &hw, t + 0.5 * dt)?;
        zu = full_apply(&zu, &gum)?;
        zv = full_apply(&zv, &gvm)?;
        zw = full_apply(&zw, &gwm)?;
        if !zu.h_norm_sq().is_finite() || zu.h_norm_sq() > BLOWUP_GUARD * BLOWUP_GUARD {
            return Err(BridgeError::BlowUp { t: step as f64 * dt, guard: BLOWUP_GUARD });
        }
        if step % stride == 0 || step == n_steps {
            record(step as f64 * dt, &zu, &zv, &zw)?;
        }
    }

    let tail_start = horizon * 0.8;
    let v_sup_norm_tail = v_samples
        .iter()
        .filter(|(t, _)| *t >= tail_start)
        .map(|(_, s)| *s)
        .fold(0.0_f64, f64::max);
    let fit = fit_exponential_envelope(&v_samples)?;
    Ok(DecompositionReport {
        alpha,
        v_decay_rate: fit.rate,
        v_sup_norm_tail,
        w_h2_sup,
        max_sum_error,
        final_time: horizon,
    })
}

/// `int_0^T ||u_t||^2 ds` by the trapezoid rule on stored samples.
pub fn dissipation_integral(traj: &Trajectory) -> f64 {
    let mut acc = 0.0;
    for j in 0..traj.len().saturating_sub(1) {
        let h = traj.times[j + 1] - traj.times[j];
        let a = traj.states[j].velocity.sobolev_norm_sq(0.0);
        let b = traj.states[j + 1].velocity.sobolev_norm_sq(0.0);
        acc += 0.5 * h * (a + b);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, ForcingSpec, Scheme};
    use crate::equilibria::build_catalog;

    fn bridge(b: f64, kappa: f64, n: usize) -> BridgeParams {
        BridgeParams::from_bk(b, kappa, ForcingSpec::none(n), n, 16 * n, 1.0).unwrap()
    }

    #[test]
    fn subcritical_everything_converges_to_trivial() {
        let params = bridge(0.5, 1.0, 8);
        let catalog = build_catalog(0.5, 1.0, 8, 4, 3, 1e-9).unwrap();
        for init in sample_ball(8, 2.0, 4, 42) {
            let rep = omega_limit(&params, &init, 60.0, 1e-3, &catalog).unwrap();
            assert!(rep.converged, "unconverged: {:?}", rep.reason);
            assert_eq!(rep.nearest_label, "trivial");
        }
    }

    #[test]
    fn exact_equilibrium_stays_put() {
        let params = bridge(3.0, 1.0, 8);
        let catalog = build_catalog(3.0, 1.0, 8, 4, 3, 1e-11).unwrap();
        let neg = catalog
            .iter()
            .find(|e| e.branch_label == "mode1-negative")
            .unwrap();
        let init = State::new(neg.field.clone(), ModalField::zeros(8)).unwrap();
        let rep = omega_limit(&params, &init, 5.0, 1e-3, &catalog).unwrap();
        assert!(
            rep.converged,
            "label {} dist {:.3e} vel {:.3e} reason {:?}",
            rep.nearest_label, rep.distance, rep.velocity_norm, rep.reason
        );
        assert_eq!(rep.nearest_label, "mode1-negative");
        assert!(rep.distance < 1e-5, "drifted {}", rep.distance);
    }

    #[test]
    fn count_one_sweep_matches_omega_limit() {
        let params = bridge(0.5, 1.0, 6);
        let catalog = build_catalog(0.5, 1.0, 6, 2, 3, 1e-9).unwrap();
        let sweep = basin_sweep(&params, 1.0, 1, 40.0, 1e-3, 9, &catalog).unwrap();
        let init = sample_ball(6, 1.0, 1, 9);
        let direct = omega_limit(&params, &init[0], 40.0, 1e-3, &catalog).unwrap();
        assert_eq!(sweep.reports.len(), 1);
        assert_eq!(sweep.reports[0].nearest_label, direct.nearest_label);
        assert_eq!(sweep.reports[0].final_time, direct.final_time);
        assert_eq!(sweep.reports[0].distance, direct.distance);
    }

    #[test]
    fn sweep_is_deterministic() {
        let params = bridge(3.0, 1.0, 6);
        let catalog = build_catalog(3.0, 1.0, 6, 4, 3, 1e-9).unwrap();
        let a = basin_sweep(&params, 3.0, 6, 30.0, 1e-3, 1234, &catalog).unwrap();
        let b = basin_sweep(&params, 3.0, 6, 30.0, 1e-3, 1234, &catalog).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }

    #[test]
    fn decomposition_sum_and_decay() {
        let params = bridge(3.0, 1.0, 8);
        let init = State::new(
            ModalField::new(vec![0.5, -0.2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            ModalField::zeros(8),
        )
        .unwrap();
        let alpha = default_alpha(params.p);
        let rep = decompose_simulate(&params, &init, alpha, 30.0, 1e-3, 100).unwrap();
        assert!(rep.max_sum_error < 1e-6, "sum error {}", rep.max_sum_error);
        assert!(rep.v_decay_rate > 0.05, "v decay rate {}", rep.v_decay_rate);
        assert!(rep.w_h2_sup.is_finite() && rep.w_h2_sup > 0.0);
    }

    #[test]
    fn decomposition_rejects_bad_alpha() {
        let params = bridge(3.0, 1.0, 6);
        let init = State::new(
            ModalField::new(vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            ModalField::zeros(6),
        )
        .unwrap();
        // alpha far too small for p = 3 pi^2
        let r = decompose_simulate(&params, &init, 1e-6, 5.0, 1e-3, 50);
        assert!(matches!(r, Err(BridgeError::Contract(_))), "got {r:?}");
    }

    #[test]
    fn dissipation_integral_saturates() {
        let params = bridge(0.0, 0.0, 6);
        let init = State::new(
            ModalField::new(vec![1.0, 0.3, 0.0, 0.0, 0.0, 0.0]).unwrap(),
            ModalField::zeros(6),
        )
        .unwrap();
        let short = simulate(&params, &init, 30.0, 1e-3, 10, Scheme::Exponential).unwrap();
        let long = simulate(&params, &init, 60.0, 1e-3, 10, Scheme::Exponential).unwrap();
        let i_short = dissipation_integral(&short);
        let i_long = dissipation_integral(&long);
        assert!((i_long - i_short).abs() < 1e-6, "delta {}", i_long - i_short);
        // equilibrium init gives zero
        let still = simulate(&params, &State::zeros(6), 1.0, 1e-3, 10, Scheme::Exponential)
            .unwrap();
        assert_eq!(dissipation_integral(&still), 0.0);
    }
}
