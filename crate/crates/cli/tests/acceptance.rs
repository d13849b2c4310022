//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.
//!
//! Run with `cargo test -p quickdraw-cli --test acceptance -- --nocapture`
//! to watch progress; the full run takes tens of minutes on one core.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;

use quickdraw::envgen::{sample_field, FieldParams};
use quickdraw::harness::stats::mean_std;
use quickdraw::harness::{
    bench_policies, bench_runtime, regret_scaling, run_ensemble, runtime_exponent, EnsembleResult, ExperimentConfig,
    NamedPolicy, PolicyConfig,
};
use quickdraw::ope::{
    ips_evaluate, ips_evaluate_with, segment, synth_log, synth_log_from_rates, IpsOptions, SynthParams,
};
use quickdraw::quickdraw::{GammaMode, QuickDraw, QuickDrawParams};
use quickdraw::{rng, ArmSpace, Policy, RoundContext};

type Outcome = Result<String, String>;

fn report(line: &str) {
    // Bypass libtest's capture so the verdicts always reach the log.
    let mut err = std::io::stderr();
    let _ = writeln!(err, "{line}");
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// Criteria 1 and 2: the posterior against a naive evaluator

/// For each arm, sum one reciprocal variance per observation, each variance
/// written out term by term.
fn naive_posterior(k: usize, hist: &[(usize, f64, f64)], t: f64, ell_x: f64, ell_t: Option<f64>) -> Vec<(f64, f64)> {
    let rho2 = 1e-7;
    let x = |a: usize| -1.0 + (2.0 / k as f64) * (a as f64 + 0.5);
    (0..k)
        .map(|a| {
            let (mut p, mut w) = (0.0, 0.0);
            for &(b, ts, y) in hist {
                let d = (x(a) - x(b)).abs() / 2.0;
                let spatial = (d / ell_x).powi(2);
                let temporal = ell_t.map_or(0.0, |l| ((t - ts) / l).powi(2));
                let var = rho2 + spatial + temporal;
                p += 1.0 / var;
                w += y / var;
            }
            (w / p, p.sqrt().recip())
        })
        .collect()
}

fn random_history(r: &mut rng::StreamRng, k: usize, n: usize) -> Vec<(usize, f64, f64)> {
    let mut times: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
    times.sort_by(f64::total_cmp);
    times.into_iter().map(|t| (r.random_range(0..k), t, r.random::<f64>())).collect()
}

fn qd_with(k: usize, ell_x: f64, ell_t: f64) -> (ArmSpace, QuickDraw) {
    let space = ArmSpace::grid(k).unwrap();
    let qd = QuickDraw::new(space.clone(), QuickDrawParams { ell_x, ell_t, ..QuickDrawParams::default() }).unwrap();
    (space, qd)
}

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut r = rng::stream(&[1, 1]);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = r.random_range(1..=20);
        let n = r.random_range(1..=50);
        let hist = random_history(&mut r, k, n);
        let ell_x = 10f64.powf(r.random_range(-1.5..1.0));
        let ell_t = 10f64.powf(r.random_range(-2.0..1.0));
        for (mode, lt) in [(f64::INFINITY, None), (ell_t, Some(ell_t))] {
            let (space, mut qd) = qd_with(k, ell_x, mode);
            for &(a, t, y) in &hist {
                qd.observe(&space.observation(a, t, y).unwrap()).unwrap();
            }
            let got = qd.posterior(1.0);
            for (a, (mu, sd)) in naive_posterior(k, &hist, 1.0, ell_x, lt).into_iter().enumerate() {
                worst = worst.max(relative(got.mu_hat[a], mu)).max(relative(got.sigma_hat[a], sd));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-12 && secs < 10.0,
        format!("max relative error {worst:.2e} over 1000 histories x 2 modes in {secs:.2} s"),
    )
}

fn criterion_2() -> Outcome {
    let mut r = rng::stream(&[1, 2]);
    let (mut convex_bad, mut shrink_bad) = (0, 0);
    for case in 0..1000 {
        let k = r.random_range(1..=20);
        let n = r.random_range(1..=50);
        let hist = random_history(&mut r, k, n);
        let ell_x = 10f64.powf(r.random_range(-1.5..1.0));
        let ell_t = if case % 2 == 0 { f64::INFINITY } else { 10f64.powf(r.random_range(-2.0..1.0)) };
        let (space, mut qd) = qd_with(k, ell_x, ell_t);
        let mut prev = vec![f64::INFINITY; k];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(a, t, y) in &hist {
            qd.observe(&space.observation(a, t, y).unwrap()).unwrap();
            lo = lo.min(y);
            hi = hi.max(y);
            let post = qd.posterior(1.0);
            convex_bad += post.mu_hat.iter().filter(|m| !(**m >= lo && **m <= hi)).count();
            if ell_t.is_infinite() {
                shrink_bad += post.sigma_hat.iter().zip(&prev).filter(|(s, p)| !(s < p)).count();
                prev = post.sigma_hat;
            }
        }
    }
    check(
        convex_bad == 0 && shrink_bad == 0,
        format!("{convex_bad} convexity and {shrink_bad} monotonicity violations over 1000 cases"),
    )
}

// ---------------------------------------------------------------------------
// Criterion 3: coverage of the theoretical confidence band

fn criterion_3() -> Outcome {
    let (k, t_max, reps, delta) = (100, 200, 200, 0.1);
    let ell_x = 1.0 / (t_max as f64).sqrt();
    let field_params =
        FieldParams { k, rounds: t_max, rho_t: f64::INFINITY, sigma_noise: 0.1, ..FieldParams::default() };
    let mut covered = 0;
    let mut gamma_seen: f64 = 0.0;
    for rep in 0..reps {
        let field = sample_field(&FieldParams { seed: rep, ..field_params }).unwrap();
        let params = QuickDrawParams {
            ell_x,
            gamma: GammaMode::Theoretical { lipschitz: field.empirical_lipschitz(), delta },
            ..QuickDrawParams::stationary()
        };
        let space = field.arm_space().clone();
        let mut qd = QuickDraw::new(space.clone(), params).unwrap();
        let mut noise = rng::stream(&[3, rep]);
        let mut unused = rng::stream(&[3, rep, 1]);
        let mut ok = true;
        for round in 0..t_max {
            let t = field.params().time_of(round);
            let arm = qd.decide(RoundContext { round, t }, &mut unused).unwrap().arm;
            let y = field.observe(arm, round, &mut noise).unwrap();
            qd.observe(&space.observation(arm, t, y).unwrap()).unwrap();
            let gamma = qd.current_gamma().unwrap();
            gamma_seen = gamma_seen.max(gamma);
            let post = qd.posterior(t);
            ok &= (0..k).all(|a| (field.mean(a, round) - post.mu_hat[a]).abs() <= gamma * post.sigma_hat[a]);
        }
        covered += ok as usize;
    }
    let rate = covered as f64 / reps as f64;
    check(
        rate >= 1.0 - delta,
        format!("coverage {covered}/{reps} = {rate:.3} (largest gamma {gamma_seen:.3e}, ell_x {ell_x:.4})"),
    )
}

// ---------------------------------------------------------------------------
// Criterion 4: regret exponent on stationary fields

fn criterion_4() -> Outcome {
    let field = FieldParams { k: 100, sigma_noise: 0.1, ..FieldParams::default() };
    let ts = [250, 500, 1000, 2000];
    let qd = NamedPolicy::new("quickdraw", PolicyConfig::QuickDraw(QuickDrawParams::stationary()));
    let theoretical = NamedPolicy::new(
        "quickdraw_theoretical",
        PolicyConfig::QuickDraw(QuickDrawParams {
            gamma: GammaMode::Theoretical { lipschitz: 1.0, delta: 0.1 },
            ..QuickDrawParams::stationary()
        }),
    );
    let random = NamedPolicy::default_for("random").unwrap();
    let slope = |p: &NamedPolicy| regret_scaling(field, p, &ts, 20, 0).unwrap().slope();
    let (q, th, r) = (slope(&qd), slope(&theoretical), slope(&random));
    let q_ok = q.is_some_and(|s| s <= 0.75);
    let r_ok = r.is_some_and(|s| (s - 1.0).abs() <= 0.1);
    check(
        q_ok && r_ok,
        format!(
            "quickdraw (gamma 2) slope {q:.3?}, random slope {r:.3?}; theoretical-gamma quickdraw slope {th:.3?} (informational)"
        ),
    )
}

// ---------------------------------------------------------------------------
// Criteria 5 to 7: simulation ensembles

const CONTENDERS: [&str; 3] = ["greedy", "restless", "sw_gp_ucb"];

fn ensemble(field: FieldParams, policies: Vec<NamedPolicy>) -> EnsembleResult {
    let start = Instant::now();
    let cfg = ExperimentConfig { field, policies, ..ExperimentConfig::default() };
    let e = run_ensemble(&cfg).unwrap();
    report(&format!(
        "    ensemble {:?} finished in {:.0} s",
        cfg.policies.iter().map(|p| &p.name).collect::<Vec<_>>(),
        start.elapsed().as_secs_f64()
    ));
    e
}

fn ordering(e: &EnsembleResult) -> (bool, String) {
    let qd = e.summary_for("quickdraw").unwrap();
    let mut ok = true;
    let mut parts = vec![format!("quickdraw {:.4}", qd.mean_regret)];
    for name in CONTENDERS {
        let other = e.summary_for(name).unwrap();
        let gap = qd.gap_in_std_errors(other);
        ok &= gap > 2.0;
        parts.push(format!("{name} {:.4} ({gap:+.1} se)", other.mean_regret));
    }
    (ok, parts.join(", "))
}

fn criterion_5(default: &EnsembleResult) -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let (o, d) = ordering(default);
    ok &= o;
    lines.push(format!("default: {d}"));
    for (label, field) in [
        ("sigma_noise=0.1", FieldParams { sigma_noise: 0.1, ..FieldParams::default() }),
        ("alpha=3", FieldParams { alpha: 3.0, ..FieldParams::default() }),
    ] {
        let (o, d) = ordering(&ensemble(field, ExperimentConfig::default().policies));
        ok &= o;
        lines.push(format!("{label}: {d}"));
    }
    check(ok, lines.join(" | "))
}

fn criterion_6() -> Outcome {
    let field = FieldParams { rho_t: 1e-3, tau_s: 1e-3, ..FieldParams::default() };
    let e = ensemble(field, ExperimentConfig::default().policies);
    let random = e.summary_for("random").unwrap();
    let mut ok = true;
    let mut parts = vec![format!("random {:.4}", random.mean_regret)];
    for s in e.summary.iter().filter(|s| s.policy != "random") {
        let gap = random.gap_in_std_errors(s);
        ok &= gap.abs() <= 2.0;
        parts.push(format!("{} {:.4} ({gap:+.1} se)", s.policy, s.mean_regret));
    }
    check(ok, parts.join(", "))
}

fn quickdraw_at(ell: f64) -> NamedPolicy {
    NamedPolicy::new(
        format!("quickdraw_l{ell}"),
        PolicyConfig::QuickDraw(QuickDrawParams { ell_x: ell, ell_t: ell, ..QuickDrawParams::default() }),
    )
}

fn criterion_7(default: &EnsembleResult) -> Outcome {
    let at_one = default.summary_for("quickdraw").unwrap().mean_regret;
    let others = ensemble(FieldParams::default(), [0.1, 3.0, 10.0].map(quickdraw_at).to_vec());
    let get = |ell: f64| others.summary_for(&format!("quickdraw_l{ell}")).unwrap().mean_regret;
    let (small, three, ten) = (get(0.1), get(3.0), get(10.0));
    let plateau = [at_one, three, ten];
    let hi = plateau.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = plateau.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = plateau.iter().sum::<f64>() / 3.0;
    let spread = (hi - lo) / mean;
    check(
        small > at_one && spread < 0.2,
        format!(
            "regret at ell 0.1/1/3/10: {small:.4}/{at_one:.4}/{three:.4}/{ten:.4}; (max-min)/mean over 1,3,10 = {:.1}% ((max-min)/min = {:.1}%)",
            100.0 * spread,
            100.0 * (hi - lo) / lo
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 8: runtime gap

fn criterion_8() -> Outcome {
    let mut policies = bench_policies();
    let mut merged = policies[1].clone();
    merged.name = "gp_ucb_merged".into();
    if let PolicyConfig::SwGpUcb(g) = &mut merged.config {
        g.merge_duplicates = true;
    }
    policies.push(merged);
    let rows = bench_runtime(1000, &[100, 250, 500], 0, &policies).unwrap();
    let at = |p: &str| rows.iter().find(|r| r.policy == p && r.t == 500).unwrap();
    let ratio = at("gp_ucb").ratio;
    let qe = runtime_exponent(&rows, "quickdraw").unwrap_or(f64::NAN);
    let ge = runtime_exponent(&rows, "gp_ucb").unwrap_or(f64::NAN);
    let me = runtime_exponent(&rows, "gp_ucb_merged").unwrap_or(f64::NAN);
    check(
        ratio >= 50.0 && qe < 1.3 && ge > 2.0,
        format!(
            "T=500: quickdraw {:.4} s, gp {:.2} s, ratio {ratio:.0}x; exponents quickdraw {qe:.2}, gp {ge:.2} \
             (informational: duplicate-merging gp {:.2} s, ratio {:.0}x, exponent {me:.2})",
            at("quickdraw").cumulative_seconds,
            at("gp_ucb").cumulative_seconds,
            at("gp_ucb_merged").cumulative_seconds,
            at("gp_ucb_merged").ratio,
        ),
    )
}

// ---------------------------------------------------------------------------
// Criterion 9: IPS validation

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();

    let log = synth_log(&SynthParams::default()).unwrap();
    let segs = segment(&log.events).unwrap().segments;
    let opts = IpsOptions::default();
    let ctr = log.events.iter().map(|e| e.reward).sum::<f64>() / log.events.len() as f64;
    let random = ips_evaluate(&NamedPolicy::default_for("random").unwrap(), &segs, &opts).unwrap();
    let exact = random.trials.iter().all(|v| *v == ctr);
    ok &= exact;
    parts.push(format!("random target {:.6} vs log CTR {ctr:.6} (exact: {exact})", random.mean));

    let small = SynthParams { k: 46, groups: 2, events_per_group: 2000, time_points: 50, ..SynthParams::default() };
    let rates = small.rates().unwrap();
    let mut values = Vec::new();
    let mut truth = 0.0;
    for s in 0..200 {
        let l = synth_log_from_rates(rates.clone(), 500 + s).unwrap();
        truth = l.oracle_value();
        let sg = segment(&l.events).unwrap().segments;
        let make = |seg: &_| l.oracle_policy(seg);
        values.push(ips_evaluate_with("oracle", &make, true, &sg, &opts).unwrap().mean);
    }
    let (m, sd) = mean_std(&values);
    let se = sd / (values.len() as f64).sqrt();
    let unbiased = (m - truth).abs() <= 3.0 * se;
    ok &= unbiased;
    parts.push(format!("oracle target over 200 logs {m:.5} vs truth {truth:.5} ({:+.1} se)", (m - truth) / se));

    let names = ["quickdraw", "greedy", "restless", "sw_gp_ucb", "random"];
    let v: Vec<f64> = names
        .iter()
        .map(|n| {
            let start = Instant::now();
            let e = ips_evaluate(&NamedPolicy::default_for(n).unwrap(), &segs, &opts).unwrap();
            report(&format!("    ope {n}: {:.5} +- {:.5} ({:.0} s)", e.mean, e.std, start.elapsed().as_secs_f64()));
            e.mean
        })
        .collect();
    let ordered = v[0] > v[1] && v[1] > v[2] && v[2] > v[3] && v[3] >= v[4];
    ok &= ordered;
    parts.push(format!(
        "K=46 ordering {}",
        names.iter().zip(&v).map(|(n, x)| format!("{n} {x:.5}")).collect::<Vec<_>>().join(" > ")
    ));
    check(ok, parts.join(" | "))
}

// ---------------------------------------------------------------------------
// Criterion 10: byte-identical CLI outputs

fn run_cli(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_quickdraw"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("cannot start the quickdraw binary");
    assert!(out.status.success(), "quickdraw {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("small.toml");
    std::fs::write(
        &config,
        "seed = 5\nseeds = 3\nwarmup_rounds = 20\n\n[field]\nk = 50\nrounds = 120\ntau_s = 0.01\n\n\
         [ope.synthetic]\nk = 6\ngroups = 2\nevents_per_group = 1500\ntime_points = 30\n\n[bench]\nk = 50\ntmax = [20, 40]\n",
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let runs: [(&str, Vec<&str>, &[&str]); 4] = [
        ("simulate", vec!["simulate", "--config", cfg], &["ensemble.csv"]),
        ("sweep", vec!["sweep", "--config", cfg, "--var", "alpha", "--values", "1,2"], &["sweep.csv"]),
        ("ope", vec!["ope", "--synthetic", "--config", cfg], &["ope.csv", "ope_summary.csv"]),
        ("bench", vec!["bench", "--config", cfg], &["bench.csv"]),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, args, files) in runs {
        let a = tmp.path().join(format!("{name}_a"));
        let b = tmp.path().join(format!("{name}_b"));
        run_cli(&a, &args);
        run_cli(&b, &args);
        for f in files {
            let (x, y) = (std::fs::read_to_string(a.join(f)).unwrap(), std::fs::read_to_string(b.join(f)).unwrap());
            let same = if name == "bench" {
                // Timing columns are measurements; the table's keys must still match.
                let keys =
                    |s: &str| s.lines().map(|l| l.split(',').take(2).collect::<Vec<_>>().join(",")).collect::<Vec<_>>();
                keys(&x) == keys(&y)
            } else {
                x == y
            };
            ok &= same && !x.is_empty();
            parts.push(format!("{f} {}", if same { "identical" } else { "DIFFERS" }));
        }
    }
    check(ok, format!("{} (bench compared on policy and T only)", parts.join(", ")))
}

// ---------------------------------------------------------------------------

fn run(n: usize, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(d) => report(&format!("criterion {n}: PASS ({secs:.0} s) {d}")),
        Err(d) => report(&format!("criterion {n}: FAIL ({secs:.0} s) {d}")),
    }
    outcome.is_ok()
}

#[test]
fn acceptance_criteria() {
    let mut passed = vec![run(1, criterion_1), run(2, criterion_2), run(3, criterion_3), run(4, criterion_4)];
    let default = Arc::new(ensemble(FieldParams::default(), ExperimentConfig::default().policies));
    let d = default.clone();
    passed.extend([
        run(5, move || criterion_5(&d)),
        run(6, criterion_6),
        run(7, move || criterion_7(&default)),
        run(8, criterion_8),
        run(9, criterion_9),
        run(10, criterion_10),
    ]);
    let failed: Vec<usize> = passed.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| i + 1).collect();
    report(&format!("acceptance: {}/10 criteria pass", 10 - failed.len()));
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
