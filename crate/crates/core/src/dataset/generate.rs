use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta, Mode, RangeSpec, Sampler, Split, ValuationRecord, RNG_DESCRIPTION};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fdsolver::{greeks_at, solve, ExerciseStyle, GridSpec, PayoffKind, PdeProblem, PsorConfig, VarianceSource};
use crate::varswap::{fair_strike, VarSwapInputs};
use crate::volsurface::{DupirePolicy, SurfaceParams, SviSlice};

/// Largest tolerated share of dropped draws.
const MAX_DROP_RATE: f64 = 0.05;

/// Ground-truth pricer settings for the American put.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub n_s: usize,
    pub n_t: usize,
    pub psor: PsorConfig,
    pub dupire_policy: DupirePolicy,
    pub spot: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_s: 200,
            n_t: 200,
            psor: PsorConfig::default(),
            dupire_policy: DupirePolicy::Clamp,
            spot: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn grid(&self, strike: f64) -> GridSpec {
        GridSpec {
            psor: self.psor,
            ..GridSpec::new(self.n_s, self.n_t, strike, self.spot)
        }
    }
}

/// A draw that failed to price, by its position in the sampling stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub draw: usize,
    pub x: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct GenerateOutcome {
    pub dataset: Dataset,
    pub drops: Vec<DropRecord>,
}

/// Targets for one input vector, plus the number of local-variance nodes
/// that needed the cap substitution.
pub fn value_record(mode: Mode, x: &[f64], solver: &SolverConfig) -> Result<(Vec<f64>, usize)> {
    if x.len() != mode.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: mode.input_dim(),
            got: x.len(),
        });
    }
    let slice = SviSlice::new(x[0], x[1], x[2], x[3], x[4])?;
    let (y, substituted) = match mode {
        Mode::VarSwap => (vec![fair_strike(&VarSwapInputs::unit(slice, x[5]))?], 0),
        Mode::AmPut => {
            let (lambda, strike, r) = (x[5], x[6], x[7]);
            let surface = SurfaceParams::new(slice, lambda)?;
            let grid = solver.grid(strike);
            let problem = PdeProblem::with_surface(
                PayoffKind::Put,
                ExerciseStyle::American,
                strike,
                r,
                solver.spot,
                &surface,
                &grid,
                solver.dupire_policy,
            )?;
            let substituted = match &problem.variance {
                VarianceSource::Grid(g) => g.substituted(),
                VarianceSource::Flat(_) => 0,
            };
            let g = greeks_at(&solve(&problem, &grid)?, solver.spot)?;
            (vec![g.value, g.delta, g.gamma, g.theta], substituted)
        }
    };
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite target {v}")));
    }
    Ok((y, substituted))
}

/// Draws and prices `count` records. Failed draws are logged and replaced
/// by continuing the same stream, so the file stays a pure function of the
/// seed and config. More than 5% failures aborts.
pub fn generate(
    mode: Mode,
    split: Split,
    count: usize,
    seed: u64,
    ranges: &RangeSpec,
    solver: &SolverConfig,
    exec: Execution,
) -> Result<GenerateOutcome> {
    ranges.validate()?;
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let mut sampler = Sampler::new(mode, split, seed, ranges);
    let mut records = Vec::with_capacity(count);
    let mut drops = Vec::new();
    let mut substituted_records = 0;
    let mut drawn = 0;
    let limit = (MAX_DROP_RATE * count as f64).floor() as usize;

    while records.len() < count {
        let xs: Vec<Vec<f64>> = (0..count - records.len()).map(|_| sampler.draw()).collect();
        let results = exec.map(&xs, |x| value_record(mode, x, solver));
        for (x, res) in xs.into_iter().zip(results) {
            match res {
                Ok((y, subs)) => {
                    substituted_records += usize::from(subs > 0);
                    records.push(ValuationRecord { x, y });
                }
                Err(e) => {
                    log::warn!("dropping draw {drawn}: {e}");
                    drops.push(DropRecord {
                        draw: drawn,
                        x,
                        reason: e.to_string(),
                    });
                }
            }
            drawn += 1;
        }
        if drops.len() > limit {
            return Err(Error::ExcessiveDrops {
                dropped: drops.len(),
                requested: count,
                rate: 100.0 * drops.len() as f64 / drawn as f64,
                first_reason: drops[0].reason.clone(),
            });
        }
    }

    let meta = DatasetMeta {
        mode,
        split,
        seed,
        rng: RNG_DESCRIPTION.to_string(),
        ranges: *ranges,
        solver: (mode == Mode::AmPut).then_some(*solver),
        requested: count,
        dropped: drops.len(),
        substituted_records,
    };
    Ok(GenerateOutcome {
        dataset: Dataset { meta, records },
        drops,
    })
}
