//! End-to-end acceptance gate. Each test prints a single PASS/FAIL line for
//! its criterion; run with `--nocapture` to see them on success.

use std::f64::consts::PI;
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bridgelab::attractor::{basin_sweep, decompose_simulate, default_alpha, sample_ball};
use bridgelab::diagnostics::{
    energy_identity_residual, entry_time, fit_decay_rate, guaranteed_rate, lyapunov_check,
    TrajScalar,
};
use bridgelab::dynamics::{simulate, BridgeParams, ForcingSpec, Scheme, TimeSignal};
use bridgelab::equilibria::{build_catalog, continue_branch, single_mode_equilibria, steady_residual};
use bridgelab::modal::{ModalField, State};

fn verdict(name: &str, ok: bool, detail: &str) {
    println!("criterion {name}: {}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {name} failed: {detail}");
}

fn forcing_mode(order: usize, mode: usize, amp: f64) -> ForcingSpec {
    ForcingSpec::constant(ModalField::basis(order, mode).unwrap().scaled(amp))
}

#[test]
fn criterion_01_bifurcation_diagram() {
    let seeds = single_mode_equilibria(4.0, 1.0, 8).unwrap();
    let mut worst_rel: f64 = 0.0;
    let mut origin_err: f64 = 0.0;
    for (label, origin) in [("mode1-negative", 1.0), ("mode1-positive", 2.0)] {
        let seed = seeds.iter().find(|e| e.branch_label == label).unwrap();
        let branch = continue_branch(seed, 0.0, 0.05, 1e-10).unwrap();
        let got = branch.origin_b.expect("origin located");
        origin_err = origin_err.max((got - origin).abs());
        for pt in branch.points.iter().filter(|p| p.b >= origin + 0.05) {
            let expect = if label == "mode1-negative" {
                -(2.0 * (pt.b - 1.0)).sqrt()
            } else {
                (2.0 * (pt.b - 2.0)).sqrt()
            };
            worst_rel = worst_rel.max(((pt.amplitude() - expect) / expect).abs());
        }
    }
    verdict(
        "01 bifurcation diagram",
        worst_rel <= 1e-6 && origin_err <= 1e-3,
        &format!("amplitude rel err {worst_rel:.3e}, origin err {origin_err:.3e}"),
    );
}

#[test]
fn criterion_02_energy_identity() {
    let params =
        BridgeParams::from_bk(2.0, 1.0, forcing_mode(16, 1, 0.3), 16, 256, 1.0).unwrap();
    let init = State::zeros(16);
    let residual_at = |dt: f64| {
        let traj = simulate(&params, &init, 10.0, dt, 1, Scheme::Exponential).unwrap();
        energy_identity_residual(&traj, &params).unwrap()
    };
    let r1 = residual_at(1e-3);
    let r2 = residual_at(5e-4);
    verdict(
        "02 energy identity",
        r1 <= 1e-6 && r1 / r2 >= 3.5,
        &format!("residual {r1:.3e}, halving ratio {:.2}", r1 / r2),
    );
}

#[test]
fn criterion_03_lyapunov_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0usize;
    for i in 0..50u64 {
        let p = rng.gen_range(-1.0..1.5) * PI * PI;
        let k = rng.gen_range(0.0..2.0) * PI * PI;
        let f0 = ModalField::new((0..6).map(|_| rng.gen_range(-0.5..0.5)).collect()).unwrap();
        let params =
            BridgeParams::new(p, k, ForcingSpec::constant(f0), 6, 96, 1.0).unwrap();
        let init = sample_ball(6, 3.0, 1, 1000 + i).remove(0);
        let traj = simulate(&params, &init, 5.0, 1e-3, 5, Scheme::Exponential).unwrap();
        let rep = lyapunov_check(&traj, &params).unwrap();
        if !rep.monotone {
            violations += 1;
        }
    }
    verdict(
        "03 Lyapunov monotonicity",
        violations == 0,
        &format!("{violations}/50 runs violated monotonicity"),
    );
}

#[test]
fn criterion_04_exponential_decay() {
    let fitted = |p: f64, k: f64, seed: u64| {
        let params = BridgeParams::new(p, k, ForcingSpec::none(8), 8, 128, 1.0).unwrap();
        let init = sample_ball(8, 0.1, 1, seed).remove(0);
        let traj = simulate(&params, &init, 20.0, 1e-3, 10, Scheme::Exponential).unwrap();
        fit_decay_rate(&traj, TrajScalar::CalE, (2.0, 18.0)).unwrap().rate
    };
    let mut ok = true;
    let mut detail = String::new();
    for (i, p) in [0.0, 0.5 * PI * PI].iter().enumerate() {
        let rate = fitted(*p, PI * PI, 21 + i as u64);
        let c = guaranteed_rate(*p).unwrap().c;
        detail.push_str(&format!("p={p:.3}: fitted {rate:.4} guaranteed {c:.4}; "));
        ok &= rate >= 0.9 * c;
    }
    let linear = fitted(0.0, 0.0, 23);
    detail.push_str(&format!("linear fit {linear:.4}"));
    ok &= (0.9..=1.1).contains(&linear);
    verdict("04 exponential decay", ok, &detail);
}

#[test]
fn criterion_05_load_coercivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let p_grid: Vec<f64> = (0..21).map(|j| (-0.99 + 0.099 * j as f64) * PI * PI).collect();
    let c_of = |p: f64| if p <= 0.0 { 1.0 } else { 1.0 - p / (PI * PI) };
    let mut failures = 0usize;
    for _ in 0..10_000 {
        let u = ModalField::new((0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let h2 = u.sobolev_norm_sq(2.0);
        for &p in &p_grid {
            if u.fp_pairing(p) < c_of(p) * h2 - 1e-12 * h2 {
                failures += 1;
            }
        }
    }
    verdict(
        "05 load coercivity",
        failures == 0,
        &format!("{failures} pairs violated the lower bound"),
    );
}

#[test]
fn criterion_06_omega_limits_land_on_equilibria() {
    let params = BridgeParams::from_bk(3.0, 1.0, ForcingSpec::none(16), 16, 256, 1.0).unwrap();
    let table = params.table().unwrap();
    let catalog = build_catalog(3.0, 1.0, 16, 16, 5, 1e-11).unwrap();
    let start = std::time::Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let summary = pool
        .install(|| basin_sweep(&params, 10.0, 64, 200.0, 1e-3, 99, &catalog))
        .unwrap();
    let elapsed = start.elapsed();
    let mut worst_dist: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for rep in summary.reports.iter().filter(|r| r.converged) {
        worst_dist = worst_dist.max(rep.distance);
        let r = steady_residual(&rep.final_state.position, &params, &table).unwrap();
        worst_res = worst_res.max(r.sobolev_norm_sq(0.0).sqrt());
    }
    let ok = summary.unresolved as f64 <= 0.05 * 64.0
        && worst_dist <= 1e-4
        && worst_res <= 1e-4
        && elapsed.as_secs() <= 600;
    verdict(
        "06 omega limits",
        ok,
        &format!(
            "unresolved {}/64, worst distance {worst_dist:.3e}, worst residual {worst_res:.3e}, {:.0?}",
            summary.unresolved, elapsed
        ),
    );
}

#[test]
fn criterion_07_absorbing_set() {
    let f0 = ModalField::basis(8, 1).unwrap().scaled(0.5);
    let f1 = ModalField::basis(8, 2).unwrap().scaled(0.2);
    let forcing = ForcingSpec::modulated(f0, TimeSignal::Sin { omega: 1.0 }, f1).unwrap();
    let params = BridgeParams::from_bk(0.0, 1.0, forcing, 8, 128, 1.0).unwrap();
    let table = params.table().unwrap();
    let mut radii = Vec::new();
    let mut entries_found = true;
    let mut trajs = Vec::new();
    for i in 0..16u64 {
        // rescale the sample until the initial energy is at most 100
        let mut init = sample_ball(8, 6.0, 1, 300 + i).remove(0);
        loop {
            let e0 = bridgelab::diagnostics::energy_components(&init, &params, 0.0, &table)
                .unwrap()
                .e;
            if e0 <= 100.0 {
                break;
            }
            init = State::new(init.position.scaled(0.9), init.velocity.scaled(0.9)).unwrap();
        }
        let traj = simulate(&params, &init, 100.0, 1e-3, 10, Scheme::Exponential).unwrap();
        let tail_sup = traj
            .times
            .iter()
            .zip(&traj.records)
            .filter(|(t, _)| **t >= 80.0)
            .map(|(_, r)| r.e)
            .fold(0.0_f64, f64::max);
        radii.push(tail_sup);
        trajs.push(traj);
    }
    let r_max = radii.iter().cloned().fold(0.0_f64, f64::max);
    let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = (r_max - r_min) / r_max;
    for traj in &trajs {
        // every run must enter {E <= R0} for good and stay
        entries_found &= entry_time(traj, r_max * (1.0 + 1e-9)).is_some();
    }
    verdict(
        "07 absorbing set",
        spread <= 0.10 && entries_found,
        &format!("R0 in [{r_min:.6}, {r_max:.6}], spread {spread:.3}"),
    );
}

#[test]
fn criterion_08_semigroup_decomposition() {
    let params = BridgeParams::from_bk(3.0, 1.0, ForcingSpec::none(16), 16, 256, 1.0).unwrap();
    let init = sample_ball(16, 2.0, 1, 13).remove(0);
    let alpha = default_alpha(params.p);
    let rep50 = decompose_simulate(&params, &init, alpha, 50.0, 1e-3, 10).unwrap();
    let rep100 = decompose_simulate(&params, &init, alpha, 100.0, 1e-3, 10).unwrap();
    let sup_drift = (rep100.w_h2_sup - rep50.w_h2_sup).abs() / rep50.w_h2_sup;
    let ok = rep50.max_sum_error <= 1e-6
        && rep100.max_sum_error <= 1e-6
        && rep50.v_decay_rate > 0.05
        && sup_drift <= 0.01;
    verdict(
        "08 semigroup decomposition",
        ok,
        &format!(
            "sum error {:.3e}/{:.3e}, v rate {:.4}, sup drift {:.4}",
            rep50.max_sum_error, rep100.max_sum_error, rep50.v_decay_rate, sup_drift
        ),
    );
}

#[test]
fn criterion_09_semigroup_restart() {
    let params =
        BridgeParams::from_bk(2.0, 1.0, forcing_mode(16, 1, 0.3), 16, 256, 1.0).unwrap();
    let init = sample_ball(16, 1.0, 1, 31).remove(0);
    let full = simulate(&params, &init, 10.0, 1e-3, 1000, Scheme::Exponential).unwrap();
    let mid_idx = full.times.iter().position(|&t| (t - 5.0).abs() < 1e-12).unwrap();
    let restarted = simulate(
        &params,
        &full.states[mid_idx],
        5.0,
        1e-3,
        1000,
        Scheme::Exponential,
    )
    .unwrap();
    let d = full.final_state().h_distance(restarted.final_state()).unwrap();
    verdict(
        "09 semigroup restart",
        d <= 1e-6,
        &format!("restart distance {d:.3e}"),
    );
}

#[test]
fn criterion_10_deterministic_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{
            "b": 0.5, "kappa": 1.0, "n_modes": 6, "dt": 1e-3, "t_final": 40.0,
            "count": 6, "radius": 2.0, "seed": 3,
            "random_starts": 4, "newton_tol": 1e-10
        }"#,
    )
    .unwrap();
    let run = |out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_bridgelab"))
            .args([
                "omega",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                dir.path().join(out).to_str().unwrap(),
                "--threads",
                "2",
            ])
            .status()
            .unwrap();
        assert!(status.success());
    };
    run("a");
    run("b");
    let mut ok = true;
    let mut detail = String::new();
    for name in ["omega.jsonl", "omega_summary.json"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        if a != b {
            ok = false;
            detail.push_str(&format!("{name} differs; "));
        }
    }
    // manifests agree once the timestamp line is dropped
    let strip = |path: std::path::PathBuf| {
        let text = std::fs::read_to_string(path).unwrap();
        text.lines()
            .filter(|l| !l.contains("timestamp"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    if strip(dir.path().join("a/manifest.json")) != strip(dir.path().join("b/manifest.json")) {
        ok = false;
        detail.push_str("manifest differs beyond timestamp");
    }
    verdict("10 deterministic reruns", ok, &detail);
}
