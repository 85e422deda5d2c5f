use std::io::Write;

use metarelay_core::acceptance::{run_all, COUNT};
use metarelay_core::config::RunConfig;

#[test]
fn all_criteria_pass() {
    let results = run_all(RunConfig::default()).expect("fixture builds");
    assert_eq!(results.len(), COUNT as usize);
    // Written past the test harness capture so every run shows the table.
    let mut out = std::io::stdout().lock();
    writeln!(out).unwrap();
    for c in &results {
        writeln!(out, "{c}").unwrap();
    }
    drop(out);
    let failed: Vec<u8> = results.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
