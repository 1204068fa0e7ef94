use std::io::Write;
use std::time::Instant;

use surrogate_core::gpr::{LmlGrid, TrainedGpr};

use super::{create, csv_writer, load_dataset, num};
use crate::config::RunConfig;
use crate::{io_err, Result};

/// LML landscape: one `grid` row per search point with the maximum flagged,
/// plus a `selected` row when refinement moved off the grid.
pub fn write_lml_csv(path: &std::path::Path, grid: &LmlGrid) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["kind", "length_scale", "noise", "lml", "argmax"])?;
    for (j, noise) in grid.noises.iter().enumerate() {
        for (i, l) in grid.length_scales.iter().enumerate() {
            let flag = if (j, i) == grid.argmax { "1" } else { "0" };
            w.write_record(["grid", &num(*l), &num(*noise), &num(grid.at(j, i)), flag])?;
        }
    }
    if grid.refined {
        let s = grid.selected;
        w.write_record(["selected", &num(s.length_scale), &num(s.noise), &num(grid.selected_value), "0"])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn run(cfg: &RunConfig) -> Result<serde_json::Value> {
    let train = load_dataset(cfg, "train")?;
    let mode = cfg.mode;
    let targets: Vec<Vec<f64>> = (0..mode.target_names().len()).map(|j| train.target(j)).collect();
    let start = Instant::now();
    let fits = TrainedGpr::fit_many(&train.inputs(), mode.input_dim(), &targets, &cfg.search, cfg.exec())?;
    let seconds = start.elapsed().as_secs_f64();

    let mut models = serde_json::Map::new();
    for (name, (model, grid)) in mode.target_names().iter().zip(&fits) {
        let path = cfg.model_path(name);
        let mut w = create(&path)?;
        model.write_json(&mut w)?;
        w.flush().map_err(io_err(&path))?;
        write_lml_csv(&cfg.lml_path(name), grid)?;
        models.insert(
            name.to_string(),
            serde_json::json!({
                "path": path,
                "hyperparams": model.hyperparams(),
                "jitter": model.jitter(),
                "grid_max": grid.grid_max(),
                "selected_lml": grid.selected_value,
                "refined": grid.refined,
            }),
        );
    }
    Ok(serde_json::json!({
        "command": "train",
        "mode": mode,
        "n_train": train.len(),
        "models": models,
        "seconds": seconds,
    }))
}
