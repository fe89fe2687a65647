mod common;

use common::{lmmse_vs_oracle, CeWorld, OracleRegime};

const DRAWS: usize = 10_000;

fn check(regime: OracleRegime, seed: u64) {
    let cmp = lmmse_vs_oracle(&CeWorld::reference(), regime, DRAWS, seed, false);
    assert!(cmp.relative_gap() < 0.03, "{regime:?}: {cmp:?}");
    // The closed form also predicts its own error.
    let pred_gap = (cmp.closed - cmp.predicted).abs() / cmp.predicted;
    assert!(pred_gap < 0.05, "{regime:?}: {cmp:?}");
}

#[test]
fn ignore_regime_matches_oracle() {
    check(OracleRegime::Ignore, 11);
}

#[test]
fn ri_aware_regime_matches_oracle() {
    check(OracleRegime::RiAware, 12);
}

#[test]
fn null_regime_matches_oracle() {
    check(OracleRegime::Null, 13);
}

#[test]
fn ri_aware_beats_ignore_under_interference() {
    // Same RI-contaminated data, two estimators: the one that models the duct
    // must do better.
    let world = CeWorld::reference();
    let aware = lmmse_vs_oracle(&world, OracleRegime::RiAware, 4_000, 21, false);
    let mut rng = common::rng(21);
    let model = world.model(false);
    let stats = world.stats();
    let mut blind = 0.0;
    for _ in 0..4_000 {
        let (h, y) = world.draw(OracleRegime::RiAware, &mut rng);
        let est = ductsim::estimation::lmmse_estimate(&y, &stats, &model, ductsim::estimation::Regime::Ignore).unwrap();
        blind += (&h - &est.h_hat).norm_squared();
    }
    blind /= 4_000.0;
    assert!(aware.closed < 0.5 * blind, "aware {} vs blind {blind}", aware.closed);
}

#[test]
fn literal_null_scalar_misses_the_residual() {
    // The printed scalar scales with p_ul/p_dl instead of p_dl/p_ul, so its
    // predicted error is far from what the data shows.
    let cmp = lmmse_vs_oracle(&CeWorld::reference(), OracleRegime::Null, 4_000, 31, true);
    let derived = lmmse_vs_oracle(&CeWorld::reference(), OracleRegime::Null, 4_000, 31, false);
    assert!(cmp.closed >= derived.closed * (1.0 - 0.02));
    let pred_gap = (cmp.closed - cmp.predicted).abs() / cmp.predicted;
    assert!(pred_gap > 0.1, "{cmp:?}");
}
