//! Runs every acceptance criterion and prints one line per criterion.
//! Uses its own main so the lines are never captured.

use std::process::ExitCode;

use netshock::acceptance::run_suite;

fn main() -> ExitCode {
    // `cargo test -- --list` and filters other than "acceptance" skip the suite
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance_suite: test");
        return ExitCode::SUCCESS;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance_suite".contains(filter.as_str()) {
            return ExitCode::SUCCESS;
        }
    }
    let reports = run_suite(&[], 0, |r| println!("{}", r.line()));
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("acceptance: {} passed, {failed} failed", reports.len() - failed);
    if reports.len() == 12 && failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
