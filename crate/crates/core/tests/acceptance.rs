//! Acceptance suite: one test per criterion, each printing its pass/fail
//! line with the measured extremes.
//!
//! Run with `cargo test -p lightcone-core --test acceptance -- --nocapture`
//! to see every line; the `verify` CLI subcommand emits the same checks as
//! JSON.

use lightcone_core::verify;

fn check(outcome: verify::CriterionOutcome) {
    println!("{}", outcome.line());
    assert!(outcome.passed, "{}", outcome.line());
}

#[test]
fn acceptance_1_duality() {
    check(verify::criterion_duality(None));
}

#[test]
fn acceptance_2_worked_examples() {
    check(verify::criterion_worked_examples(None));
}

#[test]
fn acceptance_3_gauss_identity() {
    check(verify::criterion_gauss(None));
}

#[test]
fn acceptance_4_dual_derivative() {
    check(verify::criterion_dual_derivative(None));
}

#[test]
fn acceptance_5_first_variation() {
    check(verify::criterion_first_variation(None));
}

#[test]
fn acceptance_6_second_variation() {
    check(verify::criterion_second_variation(None));
}

#[test]
fn acceptance_7_null_space() {
    check(verify::criterion_null_space(None));
}

#[test]
fn acceptance_8_null_conversion() {
    check(verify::criterion_conversion(None));
}

#[test]
fn acceptance_9_quadrature() {
    check(verify::criterion_quadrature(None));
}
