//! One module per subcommand. Each `run` writes its files and returns a
//! JSON summary for stdout.

pub mod bench;
pub mod eval;
pub mod gen;
pub mod sensitivity;
pub mod train;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use surrogate_core::dataset::{read_dataset, Dataset};
use surrogate_core::gpr::TrainedGpr;

use crate::config::{create_parent, RunConfig};
use crate::{io_err, CliError, Result};

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    create_parent(path)?;
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

/// Full-precision text for CSV cells.
pub(crate) fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn load_dataset(cfg: &RunConfig, split: &str) -> Result<Dataset> {
    let path = cfg.data_path(split);
    let file = File::open(&path).map_err(io_err(&path))?;
    let d = read_dataset(BufReader::new(file))?;
    if d.mode() != cfg.mode {
        return Err(CliError::Config(format!(
            "{} holds a {} dataset, but the run is configured for {}",
            path.display(),
            d.mode(),
            cfg.mode
        )));
    }
    Ok(d)
}

/// Models in the mode's target order.
pub(crate) fn load_models(cfg: &RunConfig) -> Result<Vec<TrainedGpr>> {
    cfg.mode
        .target_names()
        .iter()
        .map(|t| {
            let path = cfg.model_path(t);
            let file = File::open(&path).map_err(io_err(&path))?;
            Ok(TrainedGpr::read_json(BufReader::new(file))?)
        })
        .collect()
}
