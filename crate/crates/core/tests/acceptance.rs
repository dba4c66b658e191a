//! Acceptance matrix at the stated tolerances. Prints one pass/fail line per
//! criterion and exits non-zero when any criterion fails.

use std::process::ExitCode;

use cvtele::verify::{checks, run_check, VerifyConfig};

fn main() -> ExitCode {
    let cfg = VerifyConfig::default();
    let mut failed = 0;
    for check in checks() {
        let report = run_check(&check, &cfg);
        println!("{}", report.summary_line());
        if !report.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
