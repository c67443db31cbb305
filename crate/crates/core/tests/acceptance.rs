//! Runs every acceptance criterion and prints one PASS/FAIL line each.

use std::process::ExitCode;

fn main() -> ExitCode {
    let results = semireg::acceptance::run_all(semireg::rng::DEFAULT_SEED);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
