//! Self-contained JSON model files.
//!
//! The file stores the raw training data, both scalers, the hyperparameters
//! and the jitter the factorization used. Loading refactorizes, which is
//! deterministic, so a reloaded model predicts bit-for-bit like the original.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Hyperparams, Standardizer, TrainedGpr};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "gpr-model/v1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    input_scaler: Standardizer,
    output_scaler: Standardizer,
    hyperparams: Hyperparams,
    jitter: f64,
}

impl TrainedGpr {
    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            dim: self.dim,
            inputs: self.raw_inputs().to_vec(),
            targets: self.raw_targets().to_vec(),
            input_scaler: self.input_scaler.clone(),
            output_scaler: self.output_scaler.clone(),
            hyperparams: self.hyperparams,
            jitter: self.jitter(),
        };
        serde_json::to_writer(w, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(r)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Schema(format!(
                "model format `{}`, expected `{MODEL_FORMAT}`",
                file.format
            )));
        }
        if file.input_scaler.dim() != file.dim || file.output_scaler.dim() != 1 {
            return Err(Error::Schema("scaler dimensions disagree with the model".into()));
        }
        let hp = Hyperparams::new(file.hyperparams.length_scale, file.hyperparams.noise)?;
        super::check_design(&file.inputs, file.dim, &file.targets)?;
        Self::assemble(
            &file.inputs,
            file.dim,
            &file.targets,
            file.input_scaler,
            file.output_scaler,
            hp,
            Some(file.jitter),
        )
    }
}
