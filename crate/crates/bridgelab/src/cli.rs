//! Command-line front end for the `bridgelab` binary.
//!
//! Every subcommand resolves its inputs in the same order — built-in
//! defaults, then the `--config` JSON file, then explicit flags — hashes the
//! resolved configuration, and writes its artifacts plus a manifest into
//! `--out`. Identical resolved configurations produce byte-identical
//! artifacts; the wall-clock timestamp lives only in the manifest.
//!
//! Exit codes: `0` success, `2` configuration error, `3` numerical abort.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attractor::{self, basin_sweep, decompose_simulate, sample_ball};
use crate::diagnostics::{
    energy_identity_residual, fit_decay_rate, guaranteed_rate, lyapunov_check, TrajScalar,
};
use crate::dynamics::{simulate, BridgeParams, ForcingSpec, Scheme, TimeSignal};
use crate::equilibria::{build_catalog, continue_branch, single_mode_equilibria, Branch};
use crate::io::{self, Manifest};
use crate::modal::{ModalField, State};
use crate::{BridgeError, Result, P_CRITICAL};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bridgelab", version, about = "Modal laboratory for a damped extensible beam with one-sided cables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the beam and write the trajectory with diagnostics.
    Simulate(SimulateArgs),
    /// Solve for equilibria at fixed loads and classify their stability.
    Steady(SteadyArgs),
    /// Continue the equilibrium branches over a load range.
    Bifurcate(BifurcateArgs),
    /// Fit the energy decay rate and compare with the guaranteed bound.
    Decay(DecayArgs),
    /// Classify omega-limit points of random initial data.
    Omega(OmegaArgs),
    /// Split the flow into a decaying and a compact part.
    Decompose(DecomposeArgs),
    /// Run the numerical self-checks (energy identity, Lyapunov monotonicity).
    Audit(AuditArgs),
}

/// Flags shared by every subcommand. Flags override the config file.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file; unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of retained sine modes N.
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Axial load; exclusive with --b.
    #[arg(long)]
    pub p: Option<f64>,
    /// Dimensionless axial load b = p / pi^2; exclusive with --p.
    #[arg(long)]
    pub b: Option<f64>,
    /// Cable stiffness; exclusive with --kappa.
    #[arg(long)]
    pub k: Option<f64>,
    /// Dimensionless cable stiffness kappa = k / pi^2; exclusive with --k.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Quadrature intervals M (even, >= 16 N).
    #[arg(long)]
    pub quad_intervals: Option<usize>,
    /// Worker threads (falls back to BRIDGELAB_THREADS, then all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Keep every `stride`-th step in the output.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Random Newton restarts beyond the analytic seeds.
    #[arg(long)]
    pub random_starts: Option<usize>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BifurcateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub b_start: Option<f64>,
    #[arg(long)]
    pub b_end: Option<f64>,
    #[arg(long)]
    pub b_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DecayArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fit window start (default T/2).
    #[arg(long)]
    pub window_start: Option<f64>,
    /// Fit window end (default T).
    #[arg(long)]
    pub window_end: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OmegaArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of random initial states.
    #[arg(long)]
    pub count: Option<usize>,
    /// Phase-space radius of the sampling ball.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub random_starts: Option<usize>,
    #[arg(long)]
    pub newton_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Shift in the decaying part; defaults to max(1, 2|p| pi^2).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub stride: Option<usize>,
}

fn parse_scheme(s: &str) -> std::result::Result<Scheme, String> {
    match s {
        "exponential" => Ok(Scheme::Exponential),
        "rk4" => Ok(Scheme::Rk4),
        other => Err(format!("unknown scheme `{other}` (expected `exponential` or `rk4`)")),
    }
}

/// Optional JSON configuration. Every field has a flag or a default; unknown
/// keys abort with exit code 2.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub p: Option<f64>,
    pub b: Option<f64>,
    pub k: Option<f64>,
    pub kappa: Option<f64>,
    pub n_modes: Option<usize>,
    pub quad_intervals: Option<usize>,
    pub damping: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub stride: Option<usize>,
    pub scheme: Option<Scheme>,
    pub seed: Option<u64>,
    pub forcing: Option<ForcingConfig>,
    pub init: Option<InitConfig>,
    pub b_start: Option<f64>,
    pub b_end: Option<f64>,
    pub b_step: Option<f64>,
    pub count: Option<usize>,
    pub radius: Option<f64>,
    pub alpha: Option<f64>,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
    pub newton_tol: Option<f64>,
    pub random_starts: Option<usize>,
    pub threads: Option<usize>,
}

/// `f(t) = f0 + g(t) f1` with modal coefficient lists (padded to N).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingConfig {
    pub f0: Vec<f64>,
    pub signal: Option<TimeSignal>,
    pub f1: Vec<f64>,
}

/// Initial state grammar.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum InitConfig {
    /// Named state: `zero`, `mode1`, `near-negative-branch`,
    /// `near-positive-branch`.
    Preset { name: String, scale: Option<f64> },
    /// Explicit modal coefficients (padded to N).
    Coeffs { position: Vec<f64>, velocity: Vec<f64> },
    /// Seeded sample from the phase-space ball of the given radius.
    Random { radius: f64 },
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig::Preset { name: "zero".into(), scale: None }
    }
}

/// Fully resolved run description; its canonical JSON is hashed into the
/// provenance tag carried by every artifact.
#[derive(Debug, Clone, Serialize)]
struct Resolved {
    command: &'static str,
    params: BridgeParams,
    dt: f64,
    t_final: f64,
    stride: usize,
    scheme: Scheme,
    seed: u64,
    init: State,
    extras: serde_json::Value,
}

struct Resolver {
    file: FileConfig,
    common: Common,
}

impl Resolver {
    fn new(common: &Common) -> Result<Self> {
        let file = match &common.config {
            None => FileConfig::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                serde_json::from_str(&text)?
            }
        };
        Ok(Self { file, common: common.clone() })
    }

    fn n_modes(&self) -> usize {
        self.common.n_modes.or(self.file.n_modes).unwrap_or(16)
    }

    fn loads(&self) -> Result<(f64, f64)> {
        let p = match (self.common.p.or(self.file.p), self.common.b.or(self.file.b)) {
            (Some(_), Some(_)) => {
                return Err(BridgeError::InvalidParameter(
                    "p and b are exclusive; give one".into(),
                ))
            }
            (Some(p), None) => p,
            (None, Some(b)) => b * P_CRITICAL,
            (None, None) => 0.0,
        };
        let k = match (self.common.k.or(self.file.k), self.common.kappa.or(self.file.kappa)) {
            (Some(_), Some(_)) => {
                return Err(BridgeError::InvalidParameter(
                    "k and kappa are exclusive; give one".into(),
                ))
            }
            (Some(k), None) => k,
            (None, Some(kappa)) => kappa * P_CRITICAL,
            (None, None) => 0.0,
        };
        Ok((p, k))
    }

    fn forcing(&self, n: usize) -> Result<ForcingSpec> {
        match &self.file.forcing {
            None => Ok(ForcingSpec::none(n)),
            Some(fc) => {
                let f0 = padded_field(&fc.f0, n, "forcing.f0")?;
                match (&fc.signal, fc.f1.is_empty()) {
                    (None, true) => Ok(ForcingSpec::constant(f0)),
                    (None, false) => Err(BridgeError::InvalidParameter(
                        "forcing.f1 given without forcing.signal".into(),
                    )),
                    (Some(signal), _) => {
                        let f1 = padded_field(&fc.f1, n, "forcing.f1")?;
                        ForcingSpec::modulated(f0, *signal, f1)
                    }
                }
            }
        }
    }

    fn params(&self) -> Result<BridgeParams> {
        let n = self.n_modes();
        let (p, k) = self.loads()?;
        let m = self.common.quad_intervals.or(self.file.quad_intervals).unwrap_or(16 * n);
        let damping = self.file.damping.unwrap_or(1.0);
        BridgeParams::new(p, k, self.forcing(n)?, n, m, damping)
    }

    fn dt(&self) -> f64 {
        self.common.dt.or(self.file.dt).unwrap_or(1e-3)
    }

    fn t_final(&self, default: f64) -> f64 {
        self.common.t_final.or(self.file.t_final).unwrap_or(default)
    }

    fn seed(&self) -> u64 {
        self.common.seed.or(self.file.seed).unwrap_or(0)
    }

    fn init(&self, params: &BridgeParams) -> Result<State> {
        let n = params.n_modes;
        let cfg = self.file.init.clone().unwrap_or_default();
        match cfg {
            InitConfig::Preset { name, scale } => {
                let scale = scale.unwrap_or(1.0);
                let position = match name.as_str() {
                    "zero" => ModalField::zeros(n),
                    "mode1" => ModalField::basis(n, 1)?.scaled(0.1 * scale),
                    "near-negative-branch" => {
                        let a1 = -(params.b() - 1.0).max(0.01).sqrt();
                        let mut c = vec![0.0; n];
                        c[0] = 1.05 * a1 * scale;
                        if n > 1 {
                            c[1] = 0.01 * scale;
                        }
                        ModalField::new(c)?
                    }
                    "near-positive-branch" => {
                        let kap = params.kappa();
                        let a1 = (params.b() - 1.0 - kap * kap).max(0.01).sqrt();
                        let mut c = vec![0.0; n];
                        c[0] = 1.05 * a1 * scale;
                        if n > 1 {
                            c[1] = 0.01 * scale;
                        }
                        ModalField::new(c)?
                    }
                    other => {
                        return Err(BridgeError::InvalidParameter(format!(
                            "unknown init preset `{other}`"
                        )))
                    }
                };
                State::new(position, ModalField::zeros(n))
            }
            InitConfig::Coeffs { position, velocity } => State::new(
                padded_field(&position, n, "init.position")?,
                padded_field(&velocity, n, "init.velocity")?,
            ),
            InitConfig::Random { radius } => {
                if !(radius > 0.0) {
                    return Err(BridgeError::InvalidParameter(
                        "init.random.radius must be > 0".into(),
                    ));
                }
                Ok(sample_ball(n, radius, 1, self.seed()).remove(0))
            }
        }
    }
}

fn padded_field(coeffs: &[f64], n: usize, what: &str) -> Result<ModalField> {
    if coeffs.len() > n {
        return Err(BridgeError::InvalidParameter(format!(
            "{what} has {} coefficients but N = {n}",
            coeffs.len()
        )));
    }
    let mut c = coeffs.to_vec();
    c.resize(n, 0.0);
    ModalField::new(c)
}

fn init_threads(common: &Common, file: &FileConfig) {
    let n = common
        .threads
        .or(file.threads)
        .or_else(|| std::env::var("BRIDGELAB_THREADS").ok().and_then(|s| s.parse().ok()));
    if let Some(n) = n {
        // best effort: the global pool may already exist in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_manifest(dir: &Path, resolved: &Resolved) -> Result<String> {
    let hash = io::config_hash(resolved)?;
    let manifest = Manifest::new(
        &resolved.params,
        resolved.dt,
        resolved.t_final,
        resolved.stride,
        resolved.scheme,
        Some(resolved.seed),
        hash.clone(),
    );
    manifest.write(&dir.join("manifest.json"))?;
    Ok(hash)
}

/// Run a parsed command, printing any error to stderr and returning the
/// process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Steady(args) => cmd_steady(&args),
        Command::Bifurcate(args) => cmd_bifurcate(&args),
        Command::Decay(args) => cmd_decay(&args),
        Command::Omega(args) => cmd_omega(&args),
        Command::Decompose(args) => cmd_decompose(&args),
        Command::Audit(args) => cmd_audit(&args),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                BridgeError::BlowUp { .. }
                | BridgeError::NewtonStalled { .. }
                | BridgeError::SingularJacobian
                | BridgeError::Contract(_) => EXIT_NUMERICAL,
                _ => EXIT_CONFIG,
            }
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let r = Resolver::new(&args.common)?;
    init_threads(&args.common, &r.file);
    let params = r.params()?;
    let init = r.init(&params)?;
    let resolved = Resolved {
        command: "simulate",
        params: params.clone(),
        dt: r.dt(),
        t_final: r.t_final(10.0),
        stride: args.stride.or(r.file.stride).unwrap_or(10),
        scheme: args.scheme.or(r.file.scheme).unwrap_or(Scheme::Exponential),
        seed: r.seed(),
        init: init.clone(),
        extras: serde_json::Value::Null,
    };
    prepare_out(&args.common.out)?;
    let hash = write_manifest(&args.common.out, &resolved)?;
    let traj = simulate(
        &params,
        &init,
        resolved.t_final,
        resolved.dt,
        resolved.stride,
        resolved.scheme,
    )?;
    io::write_trajectory_csv(&args.common.out.join("trajectory.csv"), &traj, &hash)?;
    println!(
        "simulate: {} samples to t = {:.6}, final calE = {:.6e}",
        traj.len(),
        traj.final_time(),
        traj.records.last().map(|r| r.cal_e).unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_steady(args: &SteadyArgs) -> Result<()> {
    let r = Resolver::new(&args.common)?;
    init_threads(&args.common, &r.file);
    let params = r.params()?;
    let random_starts = args.random_starts.or(r.file.random_starts).unwrap_or(16);
    let tol = args.newton_tol.or(r.file.newton_tol).unwrap_or(1e-10);
    let resolved = Resolved {
        command: "steady",
        params: params.clone(),
        dt: 0.0,
        t_final: 0.0,
        stride: 0,
        scheme: Scheme::Exponential,
        seed: r.seed(),
        init: State::zeros(params.n_modes),
        extras: serde_json::json!({ "random_starts": random_starts, "newton_tol": tol }),
    };
    prepare_out(&args.common.out)?;
    let hash = write_manifest(&args.common.out, &resolved)?;
    let catalog = build_catalog(
        params.b(),
        params.kappa(),
        params.n_modes,
        random_starts,
        r.seed(),
        tol,
    )?;
    io::write_json(
        &args.common.out.join("equilibria.json"),
        &serde_json::json!({
            "config_hash": hash,
            "b": params.b(),
            "kappa": params.kappa(),
            "equilibria": catalog,
        }),
    )?;
    for e in &catalog {
        println!(
            "steady: {} amplitude {:+.9e} residual {:.3e} [{}]",
            e.branch_label,
            e.amplitude(),
            e.residual_norm,
            e.stability
        );
    }
    Ok(())
}

fn cmd_bifurcate(args: &BifurcateArgs) -> Result<()> {
    let r = Resolver::new(&args.common)?;
    init_threads(&args.common, &r.file);
    let params = r.params()?;
    let b_start = args.b_start.or(r.file.b_start).unwrap_or(0.0);
    let b_end = args.b_end.or(r.file.b_end).unwrap_or(4.0);
    let b_step = args.b_step.or(r.file.b_step).unwrap_or(0.05);
    if !(b_step > 0.0 && b_end > b_start) {
        return Err(BridgeError::InvalidParameter(
            "need b_step > 0 and b_end > b_start".into(),
        ));
    }
    let tol = r.file.newton_tol.unwrap_or(1e-10);
    let resolved = Resolved {
        command: "bifurcate",
        params: params.clone(),
        dt: 0.0,
        t_final: 0.0,
        stride: 0,
        scheme: Scheme::Exponential,
        seed: r.seed(),
        init: State::zeros(params.n_modes),
        extras: serde_json::json!({
            "b_start": b_start, "b_end": b_end, "b_step": b_step, "newton_tol": tol,
        }),
    };
    prepare_out(&args.common.out)?;
    let hash = write_manifest(&args.common.out, &resolved)?;

    let kappa = params.kappa();
    let n = params.n_modes;
    let mut branches: Vec<Branch> = Vec::new();
    // trivial branch sampled on the grid
    let mut trivial = Branch { points: Vec::new(), origin_b: None, truncation_reason: None };
    let steps = ((b_end - b_start) / b_step).round() as usize;
    for i in 0..=steps {
        let b = (b_start + i as f64 * b_step).min(b_end);
        let eq = single_mode_equilibria(b, kappa, n)?
            .into_iter()
            .find(|e| e.branch_label == "trivial")
            .expect("trivial state always present");
        trivial.points.push(eq);
    }
    branches.push(trivial);
    // nontrivial branches continued down from b_end
    for seed in single_mode_equilibria(b_end, kappa, n)? {
        if seed.branch_label == "trivial" {
            continue;
        }
        branches.push(continue_branch(&seed, b_start, b_step, tol)?);
    }

    io::write_branches_csv(&args.common.out.join("branches.csv"), &branches, &hash)?;
    io::write_json(
        &args.common.out.join("branches.json"),
        &serde_json::json!({ "config_hash": hash, "kappa": kappa, "branches": branches }),
    )?;
    for br in branches.iter().skip(1) {
        let label =
            br.points.first().map(|e| e.branch_label.as_str()).unwrap_or("?");
        match br.origin_b {
            Some(b0) => println!("bifurcate: {label} originates at b = {b0:.6}"),
            None => println!("bifurcate: {label} spans the whole range"),
        }
    }
    Ok(())
}

fn cmd_decay(args: &DecayArgs) -> Result<()> {
    let r = Resolver::new(&args.common)?;
    init_threads(&args.common, &r.file);
    let params = r.params()?;
    if !params.forcing.is_autonomous() || params.forcing.sup_l2_norm() != 0.0 {
        return Err(BridgeError::InvalidParameter(
            "decay analysis requires zero forcing".into(),
        ));
    }
    let init = r.init(&params)?;
    let t_final = r.t_final(30.0);
    let window = (
        args.window_start.or(r.file.window_start).unwrap_or(t_final / 2.0),
        args.window_end.or(r.file.window_end).unwrap_or(t_final),
    );
    let resolved = Resolved {
        command: "decay",
        params: params.clone(),
        dt: r.dt(),
        t_final,
        stride: r.file.stride.unwrap_or(10),
        scheme: Scheme::Exponential,
        seed: r.seed(),
        init: init.clone(),
        extras: serde_json::json!({ "window": window }),
    };
    prepare_out(&args.common.out)?;
    let hash = write_manifest(&args.common.out, &resolved)?;
    let traj = simulate(&params, &init, t_final, resolved.dt, resolved.stride, resolved.scheme)?;
    let fit = fit_decay_rate(&traj, TrajScalar::CalE, window)?;
    let guaranteed = if params.p < P_CRITICAL { Some(guaranteed_rate(params.p)?) } else { None };
    io::write_trajectory_csv(&args.common.out.join("trajectory.csv"), &traj, &hash)?;
    io::write_json(
        &args.common.out.join("decay.json"),
        &serde_json::json!({
            "config_hash": hash,
            "fit": fit,
            "guaranteed": guaranteed,
            "window": window,
        }),
    )?;
    match guaranteed {
        Some(g) => println!(
            "decay: fitted rate {:.6} vs guaranteed {:.6}",
            fit.rate, g.c
        ),
        None => println!("decay: fitted rate {:.6} (no guaranteed bound for p = {})", fit.rate, params.p),
    }
    Ok(())
}

fn cmd_omega(args: &OmegaArgs) -> Result<()> {
    let r = Resolver::new(&args.common)?;
    init_threads(&args.common, &r.file);
    let params = r.params()?;
    let count = args.count.or(r.file.count).unwrap_or(64);
    let radius = args.radius.or(r.file.radius).unwrap_or(10.0);
    let random_starts = args.random_starts.or(r.file.random_starts).unwrap_or(16);
    let tol = args.newton_tol.or(r.file.newton_tol).unwrap_or(1e-10);
    let t_final = r.t_final(200.0);
    let resolved = Resolved {
        command: "omega",
        params: params.clone(),
        dt: r.dt(),
        t_final,
        stride: 0,
        scheme: Scheme::Exponential,
        seed: r.seed(),
        init: State::zeros(params.n_modes),
        extras: serde_json::json!({
            "count": count, "radius": radius,
            "random_starts": random_starts, "newton_tol": tol,
        }),
    };
    prepare_out(&args.common.out)?;
    let hash = write_manifest(&args.common.out, &resolved)?;
    let catalog = build_catalog(
        params.b(),
        params.kappa(),
        params.n_modes,
        random_starts,
        r.seed(),
        tol,
    )?;
    let summary = basin_sweep(&params, radius, count, t_final, resolved.dt, r.seed(), &catalog)?;
    io::write_json_lines(&args.common.out.join("omega.jsonl"), &summary.reports)?;
    io::write_json(
        &args.common.out.join("omega_summary.json"),
        &serde_json::json!({
            "config_hash": hash,
            "histogram": summary.histogram,
            "unresolved": summary.unresolved,
        }),
    )?;
    for (label, n) in &summary.histogram {
        println!("omega: {n}/{count} -> {label}");
    }
    if summary.unresolved > 0 {
        println!("omega: {} unresolved", summary.unresolved);
    }
    Ok(())
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<()> {
    let r = Resolver::new(&args.common)?;
    init_threads(&args.common, &r.file);
    let params = r.params()?;
    let init = r.init(&params)?;
    let alpha = args.alpha.or(r.file.alpha).unwrap_or_else(|| attractor::default_alpha(params.p));
    let t_final = r.t_final(50.0);
    let stride = args.stride.or(r.file.stride).unwrap_or(10);
    let resolved = Resolved {
        command: "decompose",
        params: params.clone(),
        dt: r.dt(),
        t_final,
        stride,
        scheme: Scheme::Exponential,
        seed: r.seed(),
        init: init.clone(),
        extras: serde_json::json!({ "alpha": alpha }),
    };
    prepare_out(&args.common.out)?;
    let hash = write_manifest(&args.common.out, &resolved)?;
    let report = decompose_simulate(&params, &init, alpha, t_final, resolved.dt, stride)?;
    io::write_json(
        &args.common.out.join("decomposition.json"),
        &serde_json::json!({ "config_hash": hash, "report": report }),
    )?;
    println!(
        "decompose: v decays at {:.6}, w bounded by {:.6e} in H2, sum error {:.3e}",
        report.v_decay_rate, report.w_h2_sup, report.max_sum_error
    );
    Ok(())
}

fn cmd_audit(args: &AuditArgs) -> Result<()> {
    let r = Resolver::new(&args.common)?;
    init_threads(&args.common, &r.file);
    let params = r.params()?;
    let init = r.init(&params)?;
    let stride = args.stride.or(r.file.stride).unwrap_or(1);
    let resolved = Resolved {
        command: "audit",
        params: params.clone(),
        dt: r.dt(),
        t_final: r.t_final(10.0),
        stride,
        scheme: Scheme::Exponential,
        seed: r.seed(),
        init: init.clone(),
        extras: serde_json::Value::Null,
    };
    prepare_out(&args.common.out)?;
    let hash = write_manifest(&args.common.out, &resolved)?;
    let traj = simulate(&params, &init, resolved.t_final, resolved.dt, stride, Scheme::Exponential)?;
    let residual = energy_identity_residual(&traj, &params)?;
    let lyapunov = if params.forcing.is_autonomous() {
        Some(lyapunov_check(&traj, &params)?)
    } else {
        None
    };
    let dissipated = attractor::dissipation_integral(&traj);
    io::write_trajectory_csv(&args.common.out.join("trajectory.csv"), &traj, &hash)?;
    io::write_json(
        &args.common.out.join("audit.json"),
        &serde_json::json!({
            "config_hash": hash,
            "energy_identity_residual": residual,
            "lyapunov": lyapunov,
            "dissipation_integral": dissipated,
        }),
    )?;
    println!("audit: energy identity residual {residual:.3e}");
    if let Some(rep) = &lyapunov {
        println!(
            "audit: Lyapunov monotone = {} (max increase {:.3e}, tolerance {:.3e})",
            rep.monotone, rep.max_violation, rep.tolerance
        );
    }
    Ok(())
}
