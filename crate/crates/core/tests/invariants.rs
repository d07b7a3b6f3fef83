mod common;

use common::invariants::{run, CHECKS};

#[test]
fn invariants_hold_on_seeded_cases() {
    let failures: Vec<String> = CHECKS.iter().filter_map(|(name, check)| run(name, *check).err()).collect();
    assert!(failures.is_empty(), "{failures:#?}");
}
