mod common;

use common::{mutations, run_mutation, worked_run};
use crossing_core::checker::{check_all, Status};

#[test]
fn unmutated_run_passes_everything() {
    for v in check_all(&worked_run()).unwrap() {
        assert_eq!(v.status, Status::Pass, "{v}");
    }
}

#[test]
fn each_mutation_is_caught_where_it_happens() {
    for m in mutations() {
        let out = run_mutation(&m);
        assert!(
            out.detected(),
            "{}: {} first fails at {:?}, expected {} (also failing: {:?})",
            out.name,
            out.verdict,
            out.observed,
            out.expected,
            out.collateral
        );
    }
}
