use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use rieszlab::kernel::{riesz_kernel, riesz_kernel_deriv};

use crate::config::{pick, FileConfig};
use crate::failure::{CliResult, Failure};

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long)]
    s: Option<f64>,
    /// Single evaluation point in (0, 1).
    #[arg(long, conflicts_with = "grid")]
    x: Option<f64>,
    /// Number of grid points x_j = (j + 1/2) / grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(a: KernelArgs, file: &FileConfig) -> CliResult<()> {
    let s = pick(a.s, file.params.s, None, "s")?;
    let xs: Vec<f64> = match (a.x, a.grid) {
        (Some(x), _) => vec![x],
        (None, Some(0)) => return Err(Failure::usage("--grid must be positive")),
        (None, Some(m)) => (0..m).map(|j| (j as f64 + 0.5) / m as f64).collect(),
        (None, None) => return Err(Failure::usage("give --x or --grid")),
    };
    let mut text = String::from("x,g,g1,g2\n");
    for x in xs {
        let g = riesz_kernel(s, x)?;
        let g1 = riesz_kernel_deriv(s, x, 1)?;
        let g2 = riesz_kernel_deriv(s, x, 2)?;
        text.push_str(&format!("{x},{g},{g1},{g2}\n"));
    }
    match a.out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", p.display())))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
