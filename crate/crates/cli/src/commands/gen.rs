use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use surrogate_core::dataset::{generate, write_dataset, DropRecord, Split, DATASET_FORMAT};

use super::{create, write_json};
use crate::config::RunConfig;
use crate::{io_err, Result};

pub const MANIFEST_FORMAT: &str = "surrogate-manifest/v1";

#[derive(Debug, Serialize)]
struct SplitSummary {
    path: String,
    rows: usize,
    dropped: usize,
    substituted_records: usize,
    drops: Vec<DropRecord>,
    /// Wall-clock; the only field that varies between identical runs.
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    format: &'static str,
    dataset_format: &'static str,
    config: &'a RunConfig,
    train: SplitSummary,
    test: SplitSummary,
}

pub fn run(cfg: &RunConfig) -> Result<serde_json::Value> {
    let mut summaries = Vec::with_capacity(2);
    for (split, count) in [(Split::Train, cfg.train_count), (Split::Test, cfg.test_count)] {
        let start = Instant::now();
        let out = generate(cfg.mode, split, count, cfg.seed, &cfg.ranges, &cfg.solver, cfg.exec())?;
        let seconds = start.elapsed().as_secs_f64();
        let path = cfg.data_path(split.as_str());
        let mut w = create(&path)?;
        write_dataset(&out.dataset, &mut w)?;
        w.flush().map_err(io_err(&path))?;
        log::info!("{}: {} rows in {seconds:.2}s", path.display(), out.dataset.len());
        summaries.push(SplitSummary {
            path: path.display().to_string(),
            rows: out.dataset.len(),
            dropped: out.dataset.meta.dropped,
            substituted_records: out.dataset.meta.substituted_records,
            drops: out.drops,
            seconds,
        });
    }
    let test = summaries.pop().expect("two splits");
    let train = summaries.pop().expect("two splits");
    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        dataset_format: DATASET_FORMAT,
        config: cfg,
        train,
        test,
    };
    write_json(&cfg.manifest_path(), &manifest)?;
    Ok(serde_json::json!({
        "command": "gen",
        "mode": cfg.mode,
        "manifest": cfg.manifest_path(),
        "train_rows": manifest.train.rows,
        "test_rows": manifest.test.rows,
        "seconds": manifest.train.seconds + manifest.test.seconds,
    }))
}
