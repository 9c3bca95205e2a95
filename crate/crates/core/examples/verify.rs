//! The built-in self-check suite, as run by `muon-ns verify`.

use muon_ns::verify::{run_verify, VerifyConfig};

fn main() -> Result<(), muon_ns::error::Error> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let report = run_verify(&VerifyConfig { seed, ..VerifyConfig::default() })?;
    print!("{}", report.render());
    std::process::exit(if report.all_passed() { 0 } else { 1 });
}
