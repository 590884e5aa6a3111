//! Runs verification suites and prints one line per record.
//!
//! `cargo run --release --example verify_suites -- identities cnd-oracle`
//! runs the named suites; with no arguments every suite runs.

use featkrr::report::{run_verify, SUITES};

fn main() -> featkrr::Result<()> {
    let mut suites: Vec<String> = std::env::args().skip(1).collect();
    if suites.is_empty() {
        suites = SUITES.iter().map(|s| s.to_string()).collect();
    }
    let out = tempfile::tempdir()?;
    let outcome = run_verify(&suites, 0, out.path())?;
    for r in &outcome.records {
        let shown: Vec<String> = r
            .quantities
            .iter()
            .take(usize::MAX)
            .map(|(k, v)| format!("{k}={v:.3e}"))
            .collect();
        println!(
            "{:<5} {:<22} {:<40} {}",
            if r.pass { "ok" } else { "FAIL" },
            r.suite,
            r.case,
            shown.join(" ")
        );
    }
    println!("all pass: {}", outcome.all_pass);
    Ok(())
}
