//! Numerical routines against independent reference implementations on
//! seeded random instances.

mod support;

use support::{checks, Worst};

fn assert_clean(name: &str, w: Worst) {
    assert!(
        w.ok(),
        "{name}: {} failures, worst error {:e}, first: {}",
        w.failures,
        w.max_err,
        w.first_failure.unwrap_or_default()
    );
}

#[test]
fn t_quantile_matches_series_inversion() {
    assert_clean("t quantile", checks::t_quantiles());
}

#[test]
fn confidence_interval_matches_pairwise_oracle() {
    assert_clean("ci", checks::confidence_intervals());
}

#[test]
fn calibration_matches_lagrange_form() {
    assert_clean("calibration", checks::calibration());
}

#[test]
fn rollups_match_brute_force_buckets() {
    assert_clean("rollups", checks::rollups());
}

#[test]
fn derived_metrics_match_closed_forms() {
    assert_clean("derived metrics", checks::derived_metrics());
}

#[test]
fn t_quantile_oracle_reproduces_table() {
    for (dof, t) in [(1, 12.706_204_736), (2, 4.302_652_730), (9, 2.262_157_163), (30, 2.042_272_456)] {
        assert!((support::t975(dof) - t).abs() < 1e-8, "dof {dof}");
    }
}

#[test]
fn readings_one_to_ten() {
    let xs: Vec<f64> = (1..=10).map(f64::from).collect();
    let (mean, half) = support::ci_oracle(&xs);
    assert_eq!(mean, 5.5);
    assert!((half - 2.262_157 * 3.027_650_4 / 10f64.sqrt()).abs() < 1e-5);
}
