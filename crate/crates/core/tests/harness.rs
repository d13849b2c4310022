use std::sync::Arc;

use quickdraw::envgen::{sample_field, FieldParams};
use quickdraw::harness::output::{read_rows, rows_to_string};
use quickdraw::harness::{
    regret_scaling, run_ensemble, run_once, run_sweep, EnsembleRow, ExperimentConfig, NamedPolicy, ScalingOutcome,
    SweepVariable,
};

fn small_field(seed: u64) -> FieldParams {
    FieldParams { k: 40, rounds: 300, tau_s: 1.0 / 300.0, seed, ..FieldParams::default() }
}

fn small_experiment(kinds: &[&str], n_seeds: usize) -> ExperimentConfig {
    ExperimentConfig {
        field: small_field(0),
        policies: kinds.iter().map(|k| NamedPolicy::default_for(k).unwrap()).collect(),
        warmup_rounds: 50,
        n_seeds,
        seed_base: 7,
    }
}

#[test]
fn every_policy_replays_bit_for_bit() {
    let field = Arc::new(sample_field(&small_field(2)).unwrap());
    for kind in ["quickdraw", "greedy", "restless", "sw_gp_ucb", "sliding_ucb", "random"] {
        let p = NamedPolicy::default_for(kind).unwrap();
        let a = run_once(&field, &p, 50, 2).unwrap();
        let b = run_once(&field, &p, 50, 2).unwrap();
        assert_eq!(a.arms, b.arms, "{kind}");
        assert_eq!(a.rewards, b.rewards, "{kind}");
        assert_eq!(a.regrets, b.regrets, "{kind}");
    }
}

#[test]
fn warmup_is_shared_across_policies() {
    let field = Arc::new(sample_field(&small_field(4)).unwrap());
    let a = run_once(&field, &NamedPolicy::default_for("quickdraw").unwrap(), 50, 4).unwrap();
    let b = run_once(&field, &NamedPolicy::default_for("random").unwrap(), 50, 4).unwrap();
    assert_eq!(a.arms[..50], b.arms[..50]);
}

#[test]
fn oracle_has_zero_regret() {
    let field = Arc::new(sample_field(&small_field(5)).unwrap());
    let r = run_once(&field, &NamedPolicy::default_for("oracle").unwrap(), 50, 5).unwrap();
    assert_eq!(r.cumulative_regret(), 0.0);
}

#[test]
fn random_regret_matches_closed_form() {
    let cfg = ExperimentConfig { field: small_field(0), ..small_experiment(&["random"], 40) };
    let e = run_ensemble(&cfg).unwrap();
    let expected: f64 = cfg
        .seeds()
        .map(|s| {
            let f = sample_field(&FieldParams { seed: s, ..cfg.field }).unwrap();
            f.random_play_regret(cfg.warmup_rounds..cfg.field.rounds)
        })
        .sum::<f64>()
        / cfg.n_seeds as f64;
    let s = e.summary_for("random").unwrap();
    assert!(
        (s.mean_regret - expected).abs() < 3.0 * s.std_error() + 1e-3,
        "{} vs {expected} (se {})",
        s.mean_regret,
        s.std_error()
    );
}

#[test]
fn ensemble_rows_round_trip_through_csv() {
    let e = run_ensemble(&small_experiment(&["quickdraw", "random"], 3)).unwrap();
    let text = rows_to_string(&e.rows).unwrap();
    let back: Vec<EnsembleRow> = read_rows(text.as_bytes()).unwrap();
    assert_eq!(back, e.rows);
}

#[test]
fn single_value_sweep_is_the_ensemble() {
    let cfg = small_experiment(&["quickdraw", "random"], 3);
    let e = run_ensemble(&cfg).unwrap();
    let rows = run_sweep(&cfg, SweepVariable::parse("sigma_noise").unwrap(), &[cfg.field.sigma_noise]).unwrap();
    for s in &e.summary {
        let r = rows.iter().find(|r| r.policy == s.policy).unwrap();
        assert_eq!(r.mean_regret, s.mean_regret);
    }
    assert!(run_sweep(&cfg, SweepVariable::parse("alpha").unwrap(), &[]).is_err());
}

#[test]
fn oracle_scaling_is_skipped() {
    let out = regret_scaling(
        FieldParams { k: 20, ..FieldParams::default() },
        &NamedPolicy::default_for("oracle").unwrap(),
        &[50, 100],
        2,
        0,
    )
    .unwrap();
    assert!(matches!(out, ScalingOutcome::Skipped { .. }));
}
