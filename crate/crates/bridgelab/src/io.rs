//! Artifact emission: trajectory CSV, branch CSV, JSON catalogs and
//! manifests. Numeric columns use 17 significant digits so downstream
//! tooling can round-trip values exactly.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{BridgeParams, Scheme, Trajectory};
use crate::equilibria::Branch;
use crate::Result;

/// Full-precision float formatting (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Hex SHA-256 of a canonical JSON serialization, used as a provenance tag.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let canonical = serde_json::to_string(value)?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

/// Run provenance written next to every artifact. The timestamp is the only
/// non-deterministic field and is confined to this file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub params: BridgeParams,
    pub dt: f64,
    pub t_final: f64,
    pub stride: usize,
    pub scheme: Scheme,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub timestamp_unix_ms: u128,
}

impl Manifest {
    pub fn new(
        params: &BridgeParams,
        dt: f64,
        t_final: f64,
        stride: usize,
        scheme: Scheme,
        seed: Option<u64>,
        config_hash: String,
    ) -> Self {
        let timestamp_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self {
            params: params.clone(),
            dt,
            t_final,
            stride,
            scheme,
            seed,
            config_hash,
            timestamp_unix_ms,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// One JSON document per line (for sweep reports).
pub fn write_json_lines<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for v in values {
        serde_json::to_writer(&mut f, v)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Trajectory CSV: `t, a_1..a_N, v_1..v_N, E, calE, L, Upsilon, Lambda,
/// Phi, axial, cable`, preceded by a provenance comment line.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, config_hash: &str) -> Result<()> {
    let order = traj.states.first().map(|s| s.order()).unwrap_or(0);
    let mut out = String::new();
    writeln!(out, "# config_hash={config_hash}").ok();
    let mut header = String::from("t");
    for n in 1..=order {
        write!(header, ",a{n}").ok();
    }
    for n in 1..=order {
        write!(header, ",v{n}").ok();
    }
    header.push_str(",E,calE,L,Upsilon,Lambda,Phi,axial,cable");
    writeln!(out, "{header}").ok();
    for ((t, z), r) in traj.times.iter().zip(&traj.states).zip(&traj.records) {
        let mut row = fmt_f64(*t);
        for a in z.position.coeffs() {
            row.push(',');
            row.push_str(&fmt_f64(*a));
        }
        for v in z.velocity.coeffs() {
            row.push(',');
            row.push_str(&fmt_f64(*v));
        }
        for s in [r.e, r.cal_e, r.l, r.upsilon, r.lambda, r.phi, r.axial, r.cable] {
            row.push(',');
            row.push_str(&fmt_f64(s));
        }
        writeln!(out, "{row}").ok();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Branch CSV with one row per continuation point, directly plottable as the
/// bifurcation diagram.
pub fn write_branches_csv(path: &Path, branches: &[Branch], config_hash: &str) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# config_hash={config_hash}").ok();
    writeln!(out, "kappa,b,branch_label,amplitude,residual,stability").ok();
    for branch in branches {
        for pt in &branch.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(pt.kappa),
                fmt_f64(pt.b),
                pt.branch_label,
                fmt_f64(pt.amplitude()),
                fmt_f64(pt.residual_norm),
                pt.stability
            )
            .ok();
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
