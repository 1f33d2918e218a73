//! Brute-force oracle comparisons on randomized small instances.

mod common;

fn run(check: fn() -> common::Check) {
    if let Err(e) = check() {
        panic!("{e}");
    }
}

#[test]
fn ade_fde_matches_summation() {
    run(common::oracle_ade_fde);
}

#[test]
fn best_of_n_matches_exhaustive_scan() {
    run(common::oracle_best_of_n);
}

#[test]
fn nearest_neighbor_matches_l2_scan() {
    run(common::oracle_nearest_neighbor);
}

#[test]
fn weather_join_matches_nearest_scan() {
    run(common::oracle_weather_join);
}

#[test]
fn windows_match_coverage_enumeration() {
    run(common::oracle_windows);
}

#[test]
fn segmentation_matches_occupancy_scan() {
    run(common::oracle_segmentation);
}

#[test]
fn metar_golden_suite() {
    run(common::check_metar_golden);
}

#[test]
fn gradients_match_finite_differences() {
    run(common::check_gradients);
}

#[test]
fn structural_invariants_hold() {
    run(common::check_structural);
}
