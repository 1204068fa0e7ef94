//! Risk-factor sampling, ground-truth generation, CSV persistence and
//! surrogate evaluation.

mod eval;
mod generate;
mod io;

pub use eval::{evaluate, relative_error, EvalReport, ScatterPoint};
pub use generate::{generate, value_record, DropRecord, GenerateOutcome, SolverConfig};
pub use io::{read_dataset, write_dataset, DATASET_FORMAT};

use std::fmt;
use std::str::FromStr;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Human-readable identity of the sampling generator, written to file headers.
pub const RNG_DESCRIPTION: &str =
    "ChaCha20 (rand_chacha 0.10) seeded by seed_from_u64; stream 0 = train, 1 = test; u = (next_u64 >> 11) * 2^-53; x = lo + (hi - lo) * u";

/// Which product the pipeline values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(rename = "varswap")]
    VarSwap,
    #[serde(rename = "amput")]
    AmPut,
}

impl Mode {
    pub fn input_names(self) -> &'static [&'static str] {
        match self {
            Mode::VarSwap => &["a_prime", "b", "rho", "m", "sigma", "r"],
            Mode::AmPut => &["a_prime", "b", "rho", "m", "sigma", "lambda", "K", "r"],
        }
    }

    pub fn target_names(self) -> &'static [&'static str] {
        match self {
            Mode::VarSwap => &["K_var"],
            Mode::AmPut => &["V", "delta", "gamma", "theta"],
        }
    }

    pub fn input_dim(self) -> usize {
        self.input_names().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::VarSwap => "varswap",
            Mode::AmPut => "amput",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "varswap" => Ok(Mode::VarSwap),
            "amput" => Ok(Mode::AmPut),
            other => Err(Error::Schema(format!("unknown mode `{other}` (expected varswap or amput)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }
}

/// Closed-open uniform interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

const fn b(lo: f64, hi: f64) -> Bounds {
    Bounds { lo, hi }
}

impl Bounds {
    fn contains(&self, other: &Bounds) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorRange {
    pub train: Bounds,
    pub test: Bounds,
}

const fn fr(train: Bounds, test: Bounds) -> FactorRange {
    FactorRange { train, test }
}

/// Per-factor sampling ranges for both splits. Missing factors deserialize
/// to their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeSpec {
    pub a_prime: FactorRange,
    pub b: FactorRange,
    pub rho: FactorRange,
    pub m: FactorRange,
    pub sigma: FactorRange,
    pub lambda: FactorRange,
    #[serde(rename = "K")]
    pub strike: FactorRange,
    pub r: FactorRange,
}

impl Default for RangeSpec {
    fn default() -> Self {
        Self {
            a_prime: fr(b(0.0, 0.02), b(0.005, 0.015)),
            b: fr(b(0.0, 0.3), b(0.05, 0.25)),
            rho: fr(b(-0.4, 0.8), b(-0.3, 0.7)),
            m: fr(b(-0.2, 0.6), b(-0.1, 0.5)),
            sigma: fr(b(0.0, 1.0), b(0.1, 0.9)),
            lambda: fr(b(0.0, 1.0), b(0.1, 0.9)),
            strike: fr(b(0.85, 1.15), b(0.9, 1.1)),
            r: fr(b(0.0, 0.06), b(0.01, 0.05)),
        }
    }
}

impl RangeSpec {
    /// Range of a factor by its column name.
    pub fn get(&self, name: &str) -> Option<&FactorRange> {
        Mode::AmPut.input_names().contains(&name).then(|| self.factor(name))
    }

    fn factor(&self, name: &str) -> &FactorRange {
        match name {
            "a_prime" => &self.a_prime,
            "b" => &self.b,
            "rho" => &self.rho,
            "m" => &self.m,
            "sigma" => &self.sigma,
            "lambda" => &self.lambda,
            "K" => &self.strike,
            "r" => &self.r,
            _ => unreachable!("factor names come from Mode::input_names"),
        }
    }

    pub fn bounds(&self, mode: Mode, split: Split) -> Vec<Bounds> {
        mode.input_names()
            .iter()
            .map(|n| {
                let f = self.factor(n);
                match split {
                    Split::Train => f.train,
                    Split::Test => f.test,
                }
            })
            .collect()
    }

    /// Every interval is ordered and each test interval nests in its train interval.
    pub fn validate(&self) -> Result<()> {
        for name in Mode::AmPut.input_names() {
            let f = self.factor(name);
            for bd in [f.train, f.test] {
                if !(bd.lo.is_finite() && bd.hi.is_finite() && bd.lo <= bd.hi) {
                    return Err(Error::Schema(format!("range for `{name}` is not an ordered interval")));
                }
            }
            if !f.train.contains(&f.test) {
                return Err(Error::Schema(format!("test range for `{name}` is not inside the train range")));
            }
        }
        Ok(())
    }
}

/// Sampling stream for one split.
pub struct Sampler {
    rng: ChaCha20Rng,
    bounds: Vec<Bounds>,
}

impl Sampler {
    pub fn new(mode: Mode, split: Split, seed: u64, ranges: &RangeSpec) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(split.stream());
        Self {
            rng,
            bounds: ranges.bounds(mode, split),
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Next risk-factor vector, in the mode's column order.
    pub fn draw(&mut self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.bounds.len());
        for i in 0..self.bounds.len() {
            let u = self.uniform();
            let bd = self.bounds[i];
            x.push(bd.lo + (bd.hi - bd.lo) * u);
        }
        x
    }
}

/// `count` risk-factor vectors, deterministic in `seed`.
pub fn sample(mode: Mode, split: Split, count: usize, seed: u64, ranges: &RangeSpec) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let mut s = Sampler::new(mode, split, seed, ranges);
    Ok((0..count).map(|_| s.draw()).collect())
}

/// One input vector and its ground-truth targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationRecord {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Provenance written alongside the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub mode: Mode,
    pub split: Split,
    pub seed: u64,
    pub rng: String,
    pub ranges: RangeSpec,
    pub solver: Option<SolverConfig>,
    pub requested: usize,
    pub dropped: usize,
    /// Records whose local-variance table needed the cap substitution.
    pub substituted_records: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub records: Vec<ValuationRecord>,
}

impl Dataset {
    pub fn mode(&self) -> Mode {
        self.meta.mode
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Row-major inputs.
    pub fn inputs(&self) -> Vec<f64> {
        self.records.iter().flat_map(|r| r.x.iter().copied()).collect()
    }

    /// Column `j` of the targets.
    pub fn target(&self, j: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.y[j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_repeats_and_splits_differ() {
        let r = RangeSpec::default();
        let a = sample(Mode::AmPut, Split::Train, 50, 9, &r).unwrap();
        assert_eq!(a, sample(Mode::AmPut, Split::Train, 50, 9, &r).unwrap());
        assert_ne!(a, sample(Mode::AmPut, Split::Train, 50, 10, &r).unwrap());
        let t = sample(Mode::AmPut, Split::Test, 50, 9, &r).unwrap();
        assert_ne!(a[0], t[0]);
    }

    #[test]
    fn rho_law_of_large_numbers() {
        let xs = sample(Mode::VarSwap, Split::Train, 10_000, 1, &RangeSpec::default()).unwrap();
        let rho: Vec<f64> = xs.iter().map(|x| x[2]).collect();
        let (lo, hi) = rho.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(lo > -0.4 && hi < 0.8);
        let mean = rho.iter().sum::<f64>() / rho.len() as f64;
        assert!((mean - 0.2).abs() < 0.02, "{mean}");
    }

    #[test]
    fn test_draws_nest_in_train_bounds() {
        let r = RangeSpec::default();
        r.validate().unwrap();
        for mode in [Mode::VarSwap, Mode::AmPut] {
            let train = r.bounds(mode, Split::Train);
            for x in sample(mode, Split::Test, 2000, 3, &r).unwrap() {
                for (v, bd) in x.iter().zip(&train) {
                    assert!(*v >= bd.lo && *v < bd.hi);
                }
            }
        }
    }

    #[test]
    fn nesting_violation_is_rejected() {
        let mut r = RangeSpec::default();
        r.b.test.hi = 0.35;
        assert!(r.validate().is_err());
        assert!(sample(Mode::VarSwap, Split::Train, 0, 1, &r).is_err());
    }

    #[test]
    fn modes_parse() {
        assert_eq!("amput".parse::<Mode>().unwrap(), Mode::AmPut);
        assert!("bermudan".parse::<Mode>().is_err());
        assert_eq!(Mode::AmPut.input_dim() + Mode::AmPut.target_names().len(), 12);
        assert_eq!(Mode::VarSwap.input_dim() + Mode::VarSwap.target_names().len(), 7);
    }
}
