use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rieszlab::verify::{run_suite, Suite};

use super::write_json;
use crate::failure::{CliResult, Failure, ACCEPTANCE};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// kernel | spectral | sampler-oracle | physics-short | physics-long | all
    suite: String,
    /// Also write the results as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

pub fn run(a: VerifyArgs) -> CliResult<()> {
    let suite: Suite = a.suite.parse()?;
    let started = Instant::now();
    let results = run_suite(suite);
    for c in &results {
        println!("{}", c.line());
        for i in &c.info {
            println!("    info: {i}");
        }
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("{} passed, {failed} failed in {:.1}s", results.len() - failed, started.elapsed().as_secs_f64());
    if let Some(p) = &a.json {
        write_json(p, &results)?;
    }
    if failed > 0 {
        return Err(Failure::new(ACCEPTANCE, format!("{failed} criteria failed")));
    }
    Ok(())
}
