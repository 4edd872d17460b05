//! Report plumbing: gate lines with one printed pass/fail per checked
//! property, the JSON envelope every command writes, and the CSV tables.
//!
//! The envelope keys every artifact to its inputs: tool name, crate
//! version, the subcommand, and a SHA-256 hash of the effective
//! configuration, followed by the gates, the command findings, and the
//! full configuration itself.  Nothing time- or host-dependent goes into
//! any file, so reruns with the same configuration and seed reproduce
//! every artifact byte for byte.

use serde::Serialize;
use serde_json::Value;
use std::path::Path;

use heis::distance::PairSample;
use heis::group::LatticePoint;

use crate::run::Ctx;
use crate::CliError;

/// One checked property with a human-readable comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Gate {
    pub name: String,
    pub detail: String,
    pub passed: bool,
}

/// Ordered gate list for one command.
#[derive(Debug, Default)]
pub struct Gates(Vec<Gate>);

impl Gates {
    pub fn new() -> Self {
        Gates(Vec::new())
    }

    fn push(&mut self, name: &str, detail: String, passed: bool) -> bool {
        self.0.push(Gate { name: name.to_string(), detail, passed });
        passed
    }

    /// value <= max
    pub fn le(&mut self, name: &str, value: f64, max: f64) -> bool {
        self.push(name, format!("{value:.4e} <= {max:.4e}"), value <= max)
    }

    /// value >= min
    pub fn ge(&mut self, name: &str, value: f64, min: f64) -> bool {
        self.push(name, format!("{value:.4e} >= {min:.4e}"), value >= min)
    }

    /// |value - target| <= tol
    pub fn within(&mut self, name: &str, value: f64, target: f64, tol: f64) -> bool {
        self.push(
            name,
            format!("|{value:.6} - {target}| <= {tol:.4e}"),
            (value - target).abs() <= tol,
        )
    }

    /// lo <= value <= hi
    pub fn in_band(&mut self, name: &str, value: f64, lo: f64, hi: f64) -> bool {
        self.push(
            name,
            format!("{value:.4} in [{lo:.4}, {hi:.4}]"),
            (lo..=hi).contains(&value),
        )
    }

    /// An already-evaluated condition.
    pub fn holds(&mut self, name: &str, detail: String, ok: bool) -> bool {
        self.push(name, detail, ok)
    }

    pub fn all_passed(&self) -> bool {
        self.0.iter().all(|g| g.passed)
    }

    pub fn print(&self) {
        for g in &self.0 {
            let mark = if g.passed { "PASS" } else { "FAIL" };
            println!("  [{mark}] {}: {}", g.name, g.detail);
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(&self.0).expect("gates serialize")
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: &'a str,
    passed: bool,
    gates: Value,
    findings: Value,
    config: &'a crate::config::RunConfig,
}

/// Print the gate lines and the verdict, write `<out>/<stem>.json`, and
/// hand back whether every gate passed.
pub fn finish(
    ctx: &Ctx,
    command: &str,
    gates: &Gates,
    findings: Value,
) -> Result<bool, CliError> {
    let passed = gates.all_passed();
    let doc = Envelope {
        tool: "heis",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_sha256: &ctx.hash,
        passed,
        gates: gates.to_json(),
        findings,
        config: &ctx.cfg,
    };
    let stem: String = command.replace(' ', "_");
    let path = ctx.out.join(format!("{stem}.json"));
    let mut bytes = serde_json::to_vec_pretty(&doc)
        .map_err(|e| CliError::Failed(format!("serializing report: {e}")))?;
    bytes.push(b'\n');
    std::fs::write(&path, bytes)
        .map_err(|e| CliError::Failed(format!("writing {}: {e}", path.display())))?;
    gates.print();
    let verdict = if passed { "PASS" } else { "FAIL" };
    println!("{command}: {verdict} (report {})", path.display());
    Ok(passed)
}

// CSV TABLES ##########################################################

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path)
        .map_err(|e| CliError::Failed(format!("opening {}: {e}", path.display())))
}

fn csv_fail(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Failed(format!("writing {}: {e}", path.display()))
}

/// Per-pair distance table for plotting the comparison estimate.
pub fn write_pairs_csv(path: &Path, pairs: &[Option<PairSample>]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["pair", "px", "py", "pz", "qx", "qy", "qz", "d_cc", "d_contraction", "ratio"])
        .map_err(csv_fail(path))?;
    for (i, entry) in pairs.iter().enumerate() {
        if let Some(s) = entry {
            let ratio = s.d_cc / s.d_contraction.sqrt();
            w.serialize((
                i, s.p[0], s.p[1], s.p[2], s.q[0], s.q[1], s.q[2], s.d_cc, s.d_contraction,
                ratio,
            ))
            .map_err(csv_fail(path))?;
        }
    }
    w.flush().map_err(|e| CliError::Failed(format!("flushing {}: {e}", path.display())))
}

/// Ladder coefficients, one row per lattice index.
pub fn write_coefficients_csv(
    path: &Path,
    level: i32,
    coefficients: &[(LatticePoint, f64)],
) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["level", "gamma_m", "gamma_n", "gamma_k", "coefficient"])
        .map_err(csv_fail(path))?;
    for (gamma, c) in coefficients {
        w.serialize((level, gamma.m, gamma.n, gamma.k, c)).map_err(csv_fail(path))?;
    }
    w.flush().map_err(|e| CliError::Failed(format!("flushing {}: {e}", path.display())))
}

/// Level curves (density or triviality), one row per probed level.
pub fn write_curve_csv(path: &Path, column: &str, curve: &[(i32, f64)]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["level", column]).map_err(csv_fail(path))?;
    for (level, v) in curve {
        w.serialize((level, v)).map_err(csv_fail(path))?;
    }
    w.flush().map_err(|e| CliError::Failed(format!("flushing {}: {e}", path.display())))
}

// TESTS ###############################################################

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_comparisons_mirror_their_names() {
        let mut g = Gates::new();
        assert!(g.le("a", 1.0, 2.0));
        assert!(!g.le("b", 3.0, 2.0));
        assert!(g.ge("c", 2.0, 1.0));
        assert!(g.within("d", 1.005, 1.0, 0.01));
        assert!(g.in_band("e", 0.5, 0.4, 0.6));
        assert!(!g.in_band("f", 0.7, 0.4, 0.6));
        assert!(!g.all_passed());
        let v = g.to_json();
        assert_eq!(v.as_array().unwrap().len(), 6);
    }

    #[test]
    fn csv_tables_are_rfc4180_with_stable_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let coefficients = vec![
            (LatticePoint::new(0, 0, 0), 1.0),
            (LatticePoint::new(-1, 2, 3), -0.25),
        ];
        write_coefficients_csv(&path, 1, &coefficients).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "level,gamma_m,gamma_n,gamma_k,coefficient");
        assert_eq!(lines.next().unwrap(), "1,0,0,0,1.0");
        assert_eq!(lines.next().unwrap(), "1,-1,2,3,-0.25");
    }
}
