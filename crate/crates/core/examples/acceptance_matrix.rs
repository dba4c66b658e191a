//! Runs the full cross-check matrix and prints one line per check.

use cvtele::verify::{run_all, VerifyConfig};

fn main() {
    let reports = run_all(&VerifyConfig::default());
    for r in &reports {
        println!("{}", r.summary_line());
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    println!("{passed} of {} passed", reports.len());
}
