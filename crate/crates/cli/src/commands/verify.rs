use serde::Serialize;

use ssa_core::verify::{run_all, VerifyParams, VerifyReport};

use crate::error::{CliError, Outcome};
use crate::report::{write_json, Provenance};
use crate::Common;

#[derive(Serialize)]
struct Report {
    provenance: Provenance,
    params: VerifyParams,
    passed: bool,
    #[serde(flatten)]
    result: VerifyReport,
}

pub fn run(common: &Common) -> Result<Outcome, CliError> {
    let (cfg, seed) = common.load()?;
    // The suite does not use [ssa], but a broken config should still fail.
    cfg.ssa_config(seed)?;
    let params = cfg.verify_params(seed)?;
    let result = run_all(&params);
    for c in &result.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let passed = result.passed();
    let failed = result.checks.iter().filter(|c| !c.passed).count();
    println!(
        "verify: {} of {} checks passed (seed {seed})",
        result.checks.len() - failed,
        result.checks.len()
    );
    let report = Report {
        provenance: Provenance::new("verify", &cfg, seed),
        params,
        passed,
        result,
    };
    let path = write_json(&common.out, "verify.json", &report)?;
    println!("report: {}", path.display());
    Ok(Outcome::from_pass(passed))
}
