use batchopt::batch::{make_hs45, solve_batch, Hs45};
use batchopt::{SolveStatus, TronConfig};
use serde_json::json;

use crate::{Failure, RunConfig};

pub fn run_bench(cfg: &RunConfig) -> Result<(), Failure> {
    let proto = make_hs45(cfg.n).map_err(|e| Failure::Usage(e.to_string()))?;
    let problems: Vec<Hs45> = vec![proto.clone(); cfg.batch_size];
    let starts = vec![proto.default_start(); cfg.batch_size];
    let tron = TronConfig {
        max_iter: cfg.max_iter.unwrap_or(TronConfig::default().max_iter),
        ..cfg.tron()
    };
    let result =
        solve_batch(&problems, &starts, &tron, cfg.workers).map_err(|e| Failure::Io(e.into()))?;

    let mut w = csv::Writer::from_path(cfg.output_dir.join("bench.csv"))?;
    w.write_record(["index", "status", "iterations", "f_star", "time"])?;
    for (i, (r, t)) in result
        .reports
        .iter()
        .zip(&result.per_problem_time)
        .enumerate()
    {
        w.write_record([
            i.to_string(),
            r.status.as_str().to_string(),
            r.iterations.to_string(),
            r.f_star.to_string(),
            format!("{t:.9}"),
        ])?;
    }
    w.flush()?;

    let failures = result
        .reports
        .iter()
        .filter(|r| r.status != SolveStatus::Converged)
        .count();
    let wall = result.batch_wall_time;
    let summary = json!({
        "mode": "bench",
        "n": cfg.n,
        "batch": cfg.batch_size,
        "workers": cfg.workers,
        "seed": cfg.seed,
        "converged": cfg.batch_size - failures,
        "failures": failures,
        "total_time": wall,
        "throughput": if wall > 0.0 { cfg.batch_size as f64 / wall } else { 0.0 },
        "partition_times": result.partition_times,
    });
    std::fs::write(
        cfg.output_dir.join("bench_summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    println!(
        "solved {} hs45(n={}) problems in {:.3} s, {} failures",
        cfg.batch_size, cfg.n, wall, failures
    );
    if failures == 0 {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}
