use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gpr::TrainedGpr;

/// `⟨|ζ′ − ζ|⟩ / |⟨ζ⟩|`. The magnitude in the denominator keeps the error
/// non-negative for targets that are negative on average, such as Θ.
pub fn relative_error(truth: &[f64], prediction: &[f64]) -> f64 {
    let n = truth.len() as f64;
    let abs: f64 = truth.iter().zip(prediction).map(|(t, p)| (p - t).abs()).sum();
    let mean: f64 = truth.iter().sum::<f64>() / n;
    abs / n / mean.abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub n_train: usize,
    pub n_test: usize,
    pub err: BTreeMap<String, f64>,
    /// Wall-clock of batch prediction over all targets.
    pub timing_seconds: f64,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl EvalReport {
    /// Equality on everything except the wall-clock.
    pub fn same_results(&self, other: &EvalReport) -> bool {
        EvalReport {
            timing_seconds: 0.0,
            ..self.clone()
        } == EvalReport {
            timing_seconds: 0.0,
            ..other.clone()
        }
    }
}

/// One (truth, prediction) pair for scatter plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub target: String,
    pub index: usize,
    pub truth: f64,
    pub prediction: f64,
}

/// Scores one model per target column of `test`, in the mode's target order.
pub fn evaluate(models: &[TrainedGpr], test: &Dataset, exec: Execution) -> Result<(EvalReport, Vec<ScatterPoint>)> {
    let mode = test.mode();
    let targets = mode.target_names();
    if models.len() != targets.len() {
        return Err(Error::Schema(format!(
            "{} models for {} targets of mode {mode}",
            models.len(),
            targets.len()
        )));
    }
    if let Some(m) = models.iter().find(|m| m.dim() != mode.input_dim()) {
        return Err(Error::Schema(format!(
            "model expects {} inputs, {mode} datasets have {}",
            m.dim(),
            mode.input_dim()
        )));
    }
    if test.is_empty() {
        return Err(Error::DegenerateData("empty test set".into()));
    }

    let rows = test.inputs();
    let start = Instant::now();
    let predictions = models
        .iter()
        .map(|m| m.predict_mean_batch(&rows, exec))
        .collect::<Result<Vec<_>>>()?;
    let timing_seconds = start.elapsed().as_secs_f64();

    let mut err = BTreeMap::new();
    let mut scatter = Vec::with_capacity(test.len() * targets.len());
    let mut model_config = serde_json::Map::new();
    for (j, (name, pred)) in targets.iter().zip(&predictions).enumerate() {
        let truth = test.target(j);
        err.insert(name.to_string(), relative_error(&truth, pred));
        scatter.extend(truth.iter().zip(pred).enumerate().map(|(index, (t, p))| ScatterPoint {
            target: name.to_string(),
            index,
            truth: *t,
            prediction: *p,
        }));
        model_config.insert(
            name.to_string(),
            serde_json::json!({ "hyperparams": models[j].hyperparams(), "jitter": models[j].jitter() }),
        );
    }

    let report = EvalReport {
        mode,
        n_train: models[0].len(),
        n_test: test.len(),
        err,
        timing_seconds,
        seed: test.meta.seed,
        config: serde_json::json!({ "models": model_config, "test": &test.meta }),
    };
    Ok((report, scatter))
}
