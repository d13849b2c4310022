use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use quickdraw::harness::output::write_rows;
use quickdraw::harness::{bench_policies, bench_runtime, run_ensemble, run_sweep, SweepVariable};
use quickdraw::ope::{ingest_log, ips_evaluate, segment, synth_log, IpsEstimate, LoggedEvent};

use crate::config::CliConfig;
use crate::Failure;

fn output_path(cfg: &CliConfig, name: &str) -> Result<PathBuf, Failure> {
    let dir = Path::new(&cfg.out);
    std::fs::create_dir_all(dir).map_err(|e| Failure::Run(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

fn write_csv<T: Serialize>(cfg: &CliConfig, name: &str, rows: &[T]) -> Result<PathBuf, Failure> {
    let path = output_path(cfg, name)?;
    let file = File::create(&path).map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display())))?;
    write_rows(BufWriter::new(file), rows)?;
    Ok(path)
}

#[derive(Serialize)]
struct EnsembleLine<'a> {
    policy: &'a str,
    seed: u64,
    mean_regret: f64,
}

#[derive(Serialize)]
struct TimedEnsembleLine<'a> {
    policy: &'a str,
    seed: u64,
    mean_regret: f64,
    wall_time: f64,
}

pub fn simulate(cfg: &CliConfig, timing: bool) -> Result<(), Failure> {
    let experiment = cfg.experiment().map_err(Failure::Usage)?;
    let result = run_ensemble(&experiment)?;
    let path = if timing {
        let rows: Vec<_> = result
            .rows
            .iter()
            .map(|r| TimedEnsembleLine {
                policy: &r.policy,
                seed: r.seed,
                mean_regret: r.mean_regret,
                wall_time: r.wall_time,
            })
            .collect();
        write_csv(cfg, "ensemble.csv", &rows)?
    } else {
        let rows: Vec<_> = result
            .rows
            .iter()
            .map(|r| EnsembleLine { policy: &r.policy, seed: r.seed, mean_regret: r.mean_regret })
            .collect();
        write_csv(cfg, "ensemble.csv", &rows)?
    };
    println!("{:<12} {:>5} {:>12} {:>12} {:>12}", "policy", "n", "mean_regret", "std", "std_error");
    for s in &result.summary {
        println!("{:<12} {:>5} {:>12.6} {:>12.6} {:>12.6}", s.policy, s.n, s.mean_regret, s.std, s.std_error());
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn sweep(cfg: &CliConfig) -> Result<(), Failure> {
    let variable = SweepVariable::parse(&cfg.sweep.var).map_err(|e| Failure::Usage(e.to_string()))?;
    if cfg.sweep.values.is_empty() {
        return Err(Failure::Usage("sweep needs values (--values or [sweep] values)".into()));
    }
    let experiment = cfg.experiment().map_err(Failure::Usage)?;
    let rows = run_sweep(&experiment, variable, &cfg.sweep.values)?;
    println!("{:<12} {:>10} {:<12} {:>12} {:>12}", "variable", "value", "policy", "mean_regret", "std");
    for r in &rows {
        println!("{:<12} {:>10} {:<12} {:>12.6} {:>12.6}", r.variable, r.value, r.policy, r.mean_regret, r.std);
    }
    let path = write_csv(cfg, "sweep.csv", &rows)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn bench(cfg: &CliConfig) -> Result<(), Failure> {
    if cfg.bench.tmax.is_empty() || cfg.bench.tmax.contains(&0) {
        return Err(Failure::Usage("bench horizons must be positive".into()));
    }
    let rows = bench_runtime(cfg.bench.k, &cfg.bench.tmax, cfg.seed, &bench_policies())?;
    println!("{:<10} {:>6} {:>14} {:>10}", "policy", "T", "seconds", "ratio");
    for r in &rows {
        println!("{:<10} {:>6} {:>14.6} {:>10.1}", r.policy, r.t, r.cumulative_seconds, r.ratio);
    }
    let path = write_csv(cfg, "bench.csv", &rows)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn load_events(cfg: &CliConfig, synthetic: bool) -> Result<Vec<LoggedEvent>, Failure> {
    if synthetic {
        let log = synth_log(&cfg.synth_params())?;
        eprintln!(
            "synthetic log: {} events, oracle value {:.5}, uniform value {:.5}",
            log.events.len(),
            log.oracle_value(),
            log.uniform_value()
        );
        return Ok(log.events);
    }
    if cfg.ope.log.is_empty() {
        return Err(Failure::Usage("ope needs a LOG path or --synthetic".into()));
    }
    let path = Path::new(&cfg.ope.log);
    if !path.is_file() {
        return Err(Failure::Usage(format!("log file not found: {}", path.display())));
    }
    let report = ingest_log(path, &cfg.schema())?;
    for r in &report.rejected {
        eprintln!("rejected line {}: {}", r.line, r.reason);
    }
    Ok(report.events)
}

pub fn ope(cfg: &CliConfig, synthetic: bool) -> Result<(), Failure> {
    let policies = cfg.policies().map_err(Failure::Usage)?;
    let opts = cfg.ips_options().map_err(Failure::Usage)?;
    let events = load_events(cfg, synthetic)?;
    let seg = segment(&events)?;
    for s in &seg.skipped {
        eprintln!("skipped segment {:?} ({} events): {}", s.key, s.events, s.reason);
    }
    let estimates =
        policies.iter().map(|p| ips_evaluate(p, &seg.segments, &opts)).collect::<Result<Vec<IpsEstimate>, _>>()?;
    println!("{:<12} {:>12} {:>12}", "policy", "V_hat", "std");
    for e in &estimates {
        println!("{:<12} {:>12.6} {:>12.6}", e.policy, e.mean, e.std);
    }
    let trials: Vec<_> = estimates.iter().flat_map(IpsEstimate::trial_rows).collect();
    let summary: Vec<_> = estimates.iter().map(IpsEstimate::summary_row).collect();
    let a = write_csv(cfg, "ope.csv", &trials)?;
    let b = write_csv(cfg, "ope_summary.csv", &summary)?;
    eprintln!("wrote {} and {}", a.display(), b.display());
    Ok(())
}
