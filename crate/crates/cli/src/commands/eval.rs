use surrogate_core::dataset::evaluate;

use super::{csv_writer, load_dataset, load_models, num, write_json};
use crate::config::RunConfig;
use crate::{io_err, Result};

pub fn run(cfg: &RunConfig) -> Result<serde_json::Value> {
    let test = load_dataset(cfg, "test")?;
    let models = load_models(cfg)?;
    let (report, scatter) = evaluate(&models, &test, cfg.exec())?;

    let report_path = cfg.report_path("report.json");
    write_json(&report_path, &report)?;
    let scatter_path = cfg.report_path("scatter.csv");
    let mut w = csv_writer(&scatter_path)?;
    w.write_record(["target", "index", "truth", "prediction"])?;
    for p in &scatter {
        w.write_record([p.target.as_str(), &p.index.to_string(), &num(p.truth), &num(p.prediction)])?;
    }
    w.flush().map_err(io_err(&scatter_path))?;

    Ok(serde_json::json!({
        "command": "eval",
        "mode": cfg.mode,
        "report": report_path,
        "err": report.err,
        "timing_seconds": report.timing_seconds,
    }))
}
