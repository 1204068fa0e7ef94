use std::time::Instant;

use serde::{Deserialize, Serialize};
use surrogate_core::dataset::{value_record, Dataset, Mode, SolverConfig};
use surrogate_core::gpr::TrainedGpr;
use surrogate_core::Execution;

use super::{csv_writer, load_dataset, load_models, write_json};
use crate::config::{GridSize, RunConfig};
use crate::{io_err, Result};

const REPEATS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub queries: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTiming {
    pub method: String,
    pub grid: Option<GridSize>,
    /// Records actually priced within the budget.
    pub solved: usize,
    pub elapsed_seconds: f64,
    /// `elapsed / solved · n_test`, or the measured time when all were solved.
    pub estimated_seconds: f64,
    pub extrapolated: bool,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: Mode,
    pub n_test: usize,
    pub budget_seconds: f64,
    /// Median wall-clock to predict every target for every test row.
    pub gpr_seconds: f64,
    pub gpr_scaling: Vec<ScalingPoint>,
    pub reference: Vec<ReferenceTiming>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Median time for all models to predict the first `m` rows, single-threaded.
fn time_gpr(models: &[TrainedGpr], rows: &[f64], dim: usize, m: usize) -> Result<f64> {
    let rows = &rows[..m * dim];
    let mut times = Vec::with_capacity(REPEATS);
    for _ in 0..REPEATS {
        let start = Instant::now();
        for model in models {
            std::hint::black_box(model.predict_mean_batch(rows, Execution::Sequential)?);
        }
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(median(times))
}

/// Prices test records in order until the budget runs out, then scales.
fn time_reference(test: &Dataset, solver: &SolverConfig, budget: f64) -> Result<(usize, f64, f64)> {
    let start = Instant::now();
    let mut solved = 0;
    for r in &test.records {
        std::hint::black_box(value_record(test.mode(), &r.x, solver)?);
        solved += 1;
        if start.elapsed().as_secs_f64() >= budget {
            break;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Ok((solved, elapsed, elapsed / solved as f64 * test.len() as f64))
}

pub fn run(cfg: &RunConfig) -> Result<serde_json::Value> {
    let test = load_dataset(cfg, "test")?;
    let models = load_models(cfg)?;
    let (n, dim) = (test.len(), cfg.mode.input_dim());
    let rows = test.inputs();

    // Warm caches and lazy allocations before timing.
    time_gpr(&models, &rows, dim, n.min(8))?;
    let gpr_seconds = time_gpr(&models, &rows, dim, n)?;
    let mut gpr_scaling = Vec::new();
    for m in [n / 4, n / 2, n] {
        if m > 0 {
            gpr_scaling.push(ScalingPoint {
                queries: m,
                seconds: time_gpr(&models, &rows, dim, m)?,
            });
        }
    }

    let plans: Vec<(String, Option<GridSize>, SolverConfig)> = match cfg.mode {
        Mode::VarSwap => vec![("replication".into(), None, cfg.solver)],
        Mode::AmPut => cfg
            .bench
            .grids
            .iter()
            .map(|g| {
                let solver = SolverConfig {
                    n_s: g.n_s,
                    n_t: g.n_t,
                    ..cfg.solver
                };
                ("crank-nicolson".to_string(), Some(*g), solver)
            })
            .collect(),
    };
    let mut reference = Vec::with_capacity(plans.len());
    for (method, grid, solver) in plans {
        let (solved, elapsed, estimated) = time_reference(&test, &solver, cfg.bench.budget_seconds)?;
        log::info!("{method} {grid:?}: {solved} solved in {elapsed:.1}s");
        reference.push(ReferenceTiming {
            method,
            grid,
            solved,
            elapsed_seconds: elapsed,
            estimated_seconds: estimated,
            extrapolated: solved < n,
            speedup: estimated / gpr_seconds,
        });
    }

    let report = BenchReport {
        mode: cfg.mode,
        n_test: n,
        budget_seconds: cfg.bench.budget_seconds,
        gpr_seconds,
        gpr_scaling,
        reference,
    };
    let json_path = cfg.report_path("bench.json");
    write_json(&json_path, &report)?;

    let csv_path = cfg.report_path("bench.csv");
    let mut w = csv_writer(&csv_path)?;
    w.write_record(["method", "grid", "solved", "seconds", "extrapolated", "speedup"])?;
    w.write_record(["gpr", "", &n.to_string(), &gpr_seconds.to_string(), "false", "1"])?;
    for r in &report.reference {
        let grid = r.grid.map(|g| g.to_string()).unwrap_or_default();
        w.write_record([
            r.method.as_str(),
            &grid,
            &r.solved.to_string(),
            &r.estimated_seconds.to_string(),
            &r.extrapolated.to_string(),
            &r.speedup.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(&csv_path))?;

    Ok(serde_json::json!({ "command": "bench", "report": json_path, "bench": report }))
}
