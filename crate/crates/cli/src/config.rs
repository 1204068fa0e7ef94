use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use surrogate_core::dataset::{Mode, RangeSpec, SolverConfig};
use surrogate_core::fdsolver::GridSpec;
use surrogate_core::gpr::SearchSpec;
use surrogate_core::Execution;

use crate::{io_err, CliError, CommonArgs, Result};

/// `N_S x N_t`, written `200x200`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSize {
    pub n_s: usize,
    pub n_t: usize,
}

impl fmt::Display for GridSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_s, self.n_t)
    }
}

impl FromStr for GridSize {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let bad = || format!("grid `{s}` is not of the form NxN");
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        Ok(Self {
            n_s: a.trim().parse().map_err(|_| bad())?,
            n_t: b.trim().parse().map_err(|_| bad())?,
        })
    }
}

impl Serialize for GridSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GridSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionChoice {
    Parallel,
    Sequential,
}

impl From<ExecutionChoice> for Execution {
    fn from(c: ExecutionChoice) -> Self {
        match c {
            ExecutionChoice::Parallel => Execution::Parallel,
            ExecutionChoice::Sequential => Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Reference grids for the American put.
    pub grids: Vec<GridSize>,
    /// Per-grid wall-clock budget; the full-set time is extrapolated from it.
    pub budget_seconds: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            grids: [200, 500, 1000].map(|n| GridSize { n_s: n, n_t: n }).to_vec(),
            budget_seconds: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    /// Factors to sweep; `None` sweeps every factor of the mode.
    pub factors: Option<Vec<String>>,
    pub points: usize,
    /// Baseline overrides by factor name.
    pub baseline: BTreeMap<String, f64>,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            factors: None,
            points: 50,
            baseline: BTreeMap::new(),
        }
    }
}

/// The TOML file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    mode: Option<Mode>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    train_count: Option<usize>,
    test_count: Option<usize>,
    execution: Option<ExecutionChoice>,
    ranges: Option<RangeSpec>,
    solver: Option<SolverConfig>,
    search: Option<SearchSpec>,
    bench: Option<BenchConfig>,
    sensitivity: Option<SensitivityConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub out: PathBuf,
    pub train_count: usize,
    pub test_count: usize,
    pub execution: ExecutionChoice,
    pub ranges: RangeSpec,
    pub solver: SolverConfig,
    pub search: SearchSpec,
    pub bench: BenchConfig,
    pub sensitivity: SensitivityConfig,
}

pub const DEFAULT_SEED: u64 = 42;

impl RunConfig {
    /// Defaults for `mode`: 2000/2000 rows with σ_g pinned at zero for the
    /// variance swap, 5000/2000 rows with a σ_g search for the put.
    pub fn defaults(mode: Mode) -> Self {
        let (train_count, test_count, search) = match mode {
            Mode::VarSwap => (2000, 2000, SearchSpec::pinned_noise()),
            Mode::AmPut => (5000, 2000, SearchSpec::with_noise()),
        };
        Self {
            mode,
            seed: DEFAULT_SEED,
            out: PathBuf::from("runs"),
            train_count,
            test_count,
            execution: ExecutionChoice::Parallel,
            ranges: RangeSpec::default(),
            solver: SolverConfig::default(),
            search,
            bench: BenchConfig::default(),
            sensitivity: SensitivityConfig::default(),
        }
    }

    /// File values override mode defaults; flags override both.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                toml::from_str::<ConfigFile>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        let mode = args.mode.or(file.mode).unwrap_or(Mode::VarSwap);
        let mut cfg = Self::defaults(mode);
        cfg.seed = args.seed.or(file.seed).unwrap_or(cfg.seed);
        cfg.out = args.out.clone().or(file.out).unwrap_or(cfg.out);
        cfg.train_count = file.train_count.unwrap_or(cfg.train_count);
        cfg.test_count = file.test_count.unwrap_or(cfg.test_count);
        cfg.execution = file.execution.unwrap_or(cfg.execution);
        if args.sequential {
            cfg.execution = ExecutionChoice::Sequential;
        }
        cfg.ranges = file.ranges.unwrap_or(cfg.ranges);
        cfg.solver = file.solver.unwrap_or(cfg.solver);
        cfg.search = file.search.unwrap_or(cfg.search);
        cfg.bench = file.bench.unwrap_or(cfg.bench);
        cfg.sensitivity = file.sensitivity.unwrap_or(cfg.sensitivity);
        if let Some(first) = args.grid.first() {
            cfg.solver.n_s = first.n_s;
            cfg.solver.n_t = first.n_t;
            cfg.bench.grids = args.grid.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn exec(&self) -> Execution {
        self.execution.into()
    }

    /// Checks every module precondition before any work starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.train_count < 2 || self.test_count < 1 {
            return bad("train_count must be >= 2 and test_count >= 1".into());
        }
        self.ranges.validate()?;
        self.search.validate()?;
        let widest_strike = self.ranges.strike.train.hi.max(self.solver.spot);
        self.solver.grid(widest_strike).validate(widest_strike)?;
        if self.bench.grids.is_empty() {
            return bad("bench needs at least one grid".into());
        }
        for g in &self.bench.grids {
            GridSpec::new(g.n_s, g.n_t, widest_strike, self.solver.spot).validate(widest_strike)?;
        }
        if self.bench.budget_seconds.is_nan() || self.bench.budget_seconds <= 0.0 {
            return bad("bench budget must be positive".into());
        }
        if self.sensitivity.points < 2 {
            return bad("sensitivity needs at least 2 points per sweep".into());
        }
        for name in self.sensitivity.baseline.keys() {
            if !self.mode.input_names().contains(&name.as_str()) {
                return bad(format!("baseline factor `{name}` is not an input of mode {}", self.mode));
            }
        }
        if let Some(factors) = &self.sensitivity.factors {
            for f in factors {
                if !self.mode.input_names().contains(&f.as_str()) {
                    return bad(format!("unknown factor `{f}` for mode {}", self.mode));
                }
            }
        }
        Ok(())
    }

    pub fn data_path(&self, split: &str) -> PathBuf {
        self.out.join("data").join(format!("{}_{split}.csv", self.mode))
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out.join("data").join(format!("{}_manifest.json", self.mode))
    }

    pub fn model_path(&self, target: &str) -> PathBuf {
        self.out.join("models").join(format!("{}_{target}.json", self.mode))
    }

    pub fn lml_path(&self, target: &str) -> PathBuf {
        self.out.join("lml").join(format!("{}_{target}.csv", self.mode))
    }

    pub fn report_path(&self, name: &str) -> PathBuf {
        self.out.join("reports").join(format!("{}_{name}", self.mode))
    }

    pub fn sensitivity_dir(&self) -> PathBuf {
        self.out.join("sensitivity")
    }
}

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(())
}
