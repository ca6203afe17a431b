//! Acceptance suite: one test per shipped guarantee. Each test prints the
//! criterion's single PASS/FAIL line (run with --nocapture to see them all)
//! and asserts the verdict, so `cargo test --test acceptance` is the release
//! gate in CI and `sharpflow check --all` is the same gate from the shell.

use sharpflow::acceptance;

#[test]
fn a01_ou_mode_variances_match_the_closed_form() {
    let outcome = acceptance::criterion_01();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}

#[test]
fn a02_sup_norm_scaling_exponent_sits_in_the_window() {
    let outcome = acceptance::criterion_02();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}

#[test]
fn a03_renorm_constants_match_pointwise_and_in_average() {
    let outcome = acceptance::criterion_03();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}

#[test]
fn a04_recentered_powers_have_zero_mean() {
    let outcome = acceptance::criterion_04();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}

#[test]
fn a05_strip_profile_solves_the_layer_equation() {
    let outcome = acceptance::criterion_05();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}

#[test]
fn a06_mass_is_conserved_and_energy_dissipates() {
    let outcome = acceptance::criterion_06();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}

#[test]
fn a07_droplet_relaxation_approaches_the_sharp_interface_law() {
    let outcome = acceptance::criterion_07();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}

#[test]
fn a08_residual_norms_decrease_with_the_noise_exponent() {
    let outcome = acceptance::criterion_08();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}

#[test]
fn a09_linearization_quotients_stay_bounded() {
    let outcome = acceptance::criterion_09();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}

#[test]
fn a10_stopping_monitor_rarely_triggers_at_high_sigma() {
    let outcome = acceptance::criterion_10();
    println!("{}", outcome.line());
    assert!(outcome.pass, "{}", outcome.detail);
}
