use batchopt::TronConfig;
use batchopt_acopf::{read_case, Admm, AdmmOptions, AdmmStatus};
use serde_json::json;

use crate::{Failure, RunConfig};

pub fn run_admm(cfg: &RunConfig) -> Result<(), Failure> {
    let path = cfg.case_path.as_ref().expect("validated");
    let case = read_case(path).map_err(|e| Failure::Usage(e.to_string()))?;
    let defaults = AdmmOptions::default();
    let opts = AdmmOptions {
        rho0: cfg.rho0,
        max_iter: cfg.max_iter.unwrap_or(defaults.max_iter),
        tol_primal: cfg.tol_primal,
        tol_dual: cfg.tol_dual,
        workers: cfg.workers,
        tron: TronConfig {
            tol_pg: cfg.tol_pg,
            ..defaults.tron.clone()
        },
        ..defaults
    };
    let admm = Admm::new(&case, opts).map_err(|e| Failure::Usage(e.to_string()))?;
    let out = admm.run().map_err(|e| Failure::Io(e.into()))?;

    let mut w = csv::Writer::from_path(cfg.output_dir.join("admm_iterations.csv"))?;
    let mut header = vec![
        "iter".to_string(),
        "primal".into(),
        "dual".into(),
        "objective".into(),
    ];
    header.extend((0..cfg.workers).map(|p| format!("batch_time_p{p}")));
    w.write_record(&header)?;
    for rec in &out.history {
        let mut row = vec![
            rec.iter.to_string(),
            rec.primal.to_string(),
            rec.dual.to_string(),
            rec.objective.to_string(),
        ];
        row.extend(rec.partition_times.iter().map(|t| format!("{t:.9}")));
        w.write_record(&row)?;
    }
    w.flush()?;

    let imbalance = out
        .imbalance
        .as_ref()
        .map(|s| json!({ "nu_max": s.nu_max, "nu_min": s.nu_min, "nu_mean": s.nu_mean }));
    let overloads: Vec<_> = out
        .overloads
        .iter()
        .map(|o| json!({ "branch": o.branch, "flow": o.flow, "rating": o.rating }))
        .collect();
    let summary = json!({
        "mode": "admm",
        "case": path.display().to_string(),
        "status": out.status.as_str(),
        "iterations": out.iterations(),
        "objective": out.objective,
        "primal_residual": out.primal,
        "dual_residual": out.dual,
        "dispatch_p": out.dispatch(),
        "dispatch_q": out.state.gen_q.iter().map(|c| c.copy).collect::<Vec<_>>(),
        "workers": cfg.workers,
        "rho0": cfg.rho0,
        "seed": cfg.seed,
        "imbalance": imbalance,
        "line_overloads": overloads,
        "wall_time": out.wall_time,
    });
    std::fs::write(
        cfg.output_dir.join("admm_summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    println!(
        "{} after {} iterations: objective {:.4}, primal {:.2e}, dual {:.2e}",
        out.status.as_str(),
        out.iterations(),
        out.objective,
        out.primal,
        out.dual
    );
    if out.status == AdmmStatus::Converged {
        Ok(())
    } else {
        Err(Failure::NotConverged)
    }
}
