use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use nalgebra::DVector;
use rieszlab::fit::{fit_lag_decay, DecayFit, FitMode};
use rieszlab::spectral::{
    apply, approx_inverse_residual, build_riesz_matrix, build_sparse_approx_inverse, fourier_power_law, invert,
    inverse_row_decay, kernel_fourier_coefficients,
};
use serde::Serialize;

use super::{create_dir, create_file, verdict, write_json, Check};
use crate::config::{pick, FileConfig};
use crate::failure::{CliResult, Failure};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Invert,
    Decay,
    ApproxInverse,
    FourierCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Oracle {
    Dense,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    action: Action,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    s: Option<f64>,
    /// Compare the FFT inverse against a dense LU inverse.
    #[arg(long)]
    oracle: Option<Oracle>,
    /// Fit window as LO,HI.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    window: Option<Vec<usize>>,
    /// Spacing of the sparse approximate inverse.
    #[arg(long, default_value_t = 8)]
    k0: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Summary {
    action: Action,
    n: usize,
    s: f64,
    fit: Option<DecayFit>,
    exponent: Option<f64>,
    min_eigenvalue: Option<f64>,
    row_sum: Option<f64>,
    max_diff: Option<f64>,
    checks: Vec<Check>,
    passed: bool,
}

fn default_window(n: usize) -> (usize, usize) {
    if n / 8 > 8 {
        (8, n / 8)
    } else {
        (4, n / 8)
    }
}

pub fn run(a: MatrixArgs, file: &FileConfig, threads: usize) -> CliResult<()> {
    let n = pick(a.n, file.params.n, None, "n")?;
    let s = pick(a.s, file.params.s, None, "s")?;
    if !n.is_power_of_two() {
        log::warn!("n = {n} is not a power of two; FFT sizes will be slower and fits less clean");
    }
    let window = match a.window.as_deref() {
        Some([lo, hi]) => (*lo, *hi),
        Some(_) => return Err(Failure::usage("--window takes LO,HI")),
        None => default_window(n),
    };
    let op = build_riesz_matrix(n, s)?;
    let mut sum = Summary {
        action: a.action,
        n,
        s,
        fit: None,
        exponent: None,
        min_eigenvalue: None,
        row_sum: None,
        max_diff: None,
        checks: Vec::new(),
        passed: true,
    };
    let mut csv = Vec::new();
    let csv_name;
    match a.action {
        Action::Invert => {
            let inv = invert(&op, None)?;
            sum.min_eigenvalue = Some(op.min_eigenvalue());
            sum.row_sum = Some(inv.row_sum());
            if a.oracle == Some(Oracle::Dense) {
                let dense = op
                    .to_dense()
                    .lu()
                    .try_inverse()
                    .ok_or_else(|| Failure::new(crate::failure::NUMERICAL, "dense LU inverse failed"))?;
                let d = inv.to_dense().iter().zip(dense.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                sum.max_diff = Some(d);
                sum.checks.push(Check::at_most("inverse vs dense LU", d, 1e-10));
                let v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 / 1000.0 - 0.5).collect();
                let fast = apply(&op, &v)?;
                let slow = op.to_dense() * DVector::from_vec(v);
                let e = fast.iter().zip(slow.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                sum.checks.push(Check::at_most("apply vs dense multiply", e, 1e-11));
            }
            inv.write_csv(&mut csv)?;
            csv_name = "inverse.csv";
        }
        Action::Decay => {
            let inv = invert(&op, None)?;
            let fit = inverse_row_decay(&inv, window)?;
            if s < 1.0 {
                sum.checks.push(Check::within("inverse row exponent", fit.exponent, -(2.0 - s), 0.10));
            }
            sum.exponent = Some(fit.exponent);
            sum.fit = Some(fit);
            sum.row_sum = Some(inv.row_sum());
            inv.write_csv(&mut csv)?;
            csv_name = "inverse.csv";
        }
        Action::ApproxInverse => {
            let approx = build_sparse_approx_inverse(n, s, a.k0)?;
            let r = approx_inverse_residual(n, s, &approx)?;
            let w = a.window.as_ref().map_or((2 * a.k0, n / 8), |_| window);
            let fit = fit_lag_decay(&r, w, FitMode::DyadicEnvelope)?;
            if s < 1.0 {
                sum.checks.push(Check::at_most("residual exponent", fit.exponent, -(2.0 - s) + 0.15));
            }
            sum.checks.push(Check::holds("eigenvalues positive", approx.min_eigenvalue() > 0.0));
            sum.min_eigenvalue = Some(approx.min_eigenvalue());
            sum.exponent = Some(fit.exponent);
            sum.fit = Some(fit);
            writeln!(csv, "lag,residual")?;
            for (d, v) in r.iter().enumerate() {
                writeln!(csv, "{d},{v}")?;
            }
            csv_name = "residual.csv";
        }
        Action::FourierCheck => {
            let w = a.window.as_ref().map_or((4, 256.min(n / 2)), |_| window);
            let fit = fourier_power_law(s, n, w)?;
            sum.checks.push(Check::within("fourier exponent", fit.exponent, s - 1.0, 0.05));
            sum.exponent = Some(fit.exponent);
            sum.fit = Some(fit);
            writeln!(csv, "k,coefficient")?;
            for (k, v) in kernel_fourier_coefficients(s, n)?.iter().enumerate().take(n / 2 + 1) {
                writeln!(csv, "{k},{v}")?;
            }
            csv_name = "fourier.csv";
        }
    }
    sum.passed = sum.checks.iter().all(|c| c.passed);
    println!("{}", serde_json::to_string_pretty(&sum)?);
    if let Some(dir) = &a.out_dir {
        create_dir(dir)?;
        create_file(&dir.join(csv_name))?.write_all(&csv)?;
        write_json(&dir.join("summary.json"), &sum)?;
        let mut m = RunManifest::new("matrix", threads);
        m.options = serde_json::json!({ "action": a.action, "n": n, "s": s, "window": window, "k0": a.k0 });
        m.outputs = vec![dir.join(csv_name), dir.join("summary.json")];
        m.finished_unix = Some(crate::manifest::now());
        m.save(&dir.join("manifest.json"))?;
    }
    verdict(&sum.checks)
}
