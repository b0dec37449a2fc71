//! Full acceptance run: every criterion at full sample sizes, one line each.
//!
//! `cargo test -p mrca-core --test acceptance -- --nocapture` shows the lines.
//! The seed can be overridden with `MRCA_ACCEPTANCE_SEED`.

use mrca_core::verify::{Profile, Suite, CRITERIA};

const SEED: u64 = 20240601;

#[test]
fn acceptance() {
    let seed = std::env::var("MRCA_ACCEPTANCE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(SEED);
    let suite = Suite::new(Profile::Full, seed);
    let ids: Vec<u8> = CRITERIA.iter().map(|c| c.0).collect();
    suite.prepare_for(&ids);
    let mut failed = Vec::new();
    for id in ids {
        let report = suite.run(id);
        println!("{}", report.summary_line());
        if !report.pass {
            for c in report.checks.iter().filter(|c| !c.pass) {
                println!("      {}: {}", c.name, c.detail);
            }
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
