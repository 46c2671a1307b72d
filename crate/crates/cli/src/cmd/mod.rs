pub mod analyze;
pub mod kernel;
pub mod matrix;
pub mod sample;
pub mod verify;

use std::path::Path;

use serde::Serialize;

use crate::failure::{CliResult, Failure, ACCEPTANCE};

/// One declared check with the tolerance it was judged against.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, target, tolerance, passed: (value - target).abs() <= tolerance }
    }

    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check { name: name.into(), value, target: bound, tolerance: 0.0, passed: value <= bound }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Check { name: name.into(), value: v, target: 1.0, tolerance: 0.0, passed: ok }
    }
}

pub fn print_checks(checks: &[Check]) {
    for c in checks {
        println!(
            "{:<4} {:<40} value {:<12.6} target {:<12.6} tol {:.3e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.target,
            c.tolerance
        );
    }
}

pub fn verdict(checks: &[Check]) -> CliResult<()> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(ACCEPTANCE, format!("checks failed: {}", failed.join(", "))))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

pub fn create_file(path: &Path) -> CliResult<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| Failure::io(format!("cannot create {}: {e}", path.display())))
}
