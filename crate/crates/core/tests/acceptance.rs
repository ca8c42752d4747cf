//! Prints one PASS/FAIL line per acceptance criterion; exits non-zero if any fail.

use std::path::PathBuf;
use std::process::ExitCode;

use tdlab::harness::{check, OUT_DIR_ENV};

fn main() -> ExitCode {
    let out: PathBuf = std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tdlab-acceptance"));
    println!("acceptance outputs in {}", out.display());
    let mut failed = 0;
    for outcome in check::run_all(&out) {
        println!("{}", outcome.line());
        if !outcome.passed {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
