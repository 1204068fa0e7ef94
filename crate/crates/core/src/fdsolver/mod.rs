//! Finite-difference pricing of European and American options under local
//! volatility.
//!
//! The Black–Scholes operator
//! `L = ½σ²_loc(S,t) S² ∂²/∂S² + rS ∂/∂S − r`
//! is discretized with central differences on a uniform grid `S_i = i·ΔS`,
//! `i = 0..=n_s`, with Dirichlet values at both ends. Time is marched
//! backward from `T` with the θ-scheme
//!
//! ```text
//! (I + θΔt A) V^{n+1} = (I − (1−θ)Δt A) V^n + β^n,   A = −L_h
//! ```
//!
//! where `n+1` denotes the earlier time level. The first `rannacher_steps`
//! steps are each replaced by two fully implicit half steps. American
//! exercise is imposed with projected SOR; the European mode solves the
//! same tridiagonal systems directly.

mod greeks;
mod tridiag;

pub use greeks::{greeks_at, Greeks};
pub use tridiag::{natural_residual, psor, PsorConfig, PsorReport, Tridiagonal};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volsurface::{local_variance_grid, DupirePolicy, LocalVarianceGrid, SurfaceParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffKind {
    Put,
    Call,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExerciseStyle {
    American,
    European,
}

impl PayoffKind {
    pub fn payoff(self, s: f64, strike: f64) -> f64 {
        match self {
            PayoffKind::Put => (strike - s).max(0.0),
            PayoffKind::Call => (s - strike).max(0.0),
        }
    }
}

/// Diffusion coefficient of the pricing PDE.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceSource {
    Flat(f64),
    Grid(LocalVarianceGrid),
}

impl VarianceSource {
    fn sample_into(&self, t: f64, s: &[f64], out: &mut [f64]) {
        match self {
            VarianceSource::Flat(v) => out.fill(*v),
            VarianceSource::Grid(g) => g.sample_into(t, s, out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeProblem {
    pub kind: PayoffKind,
    pub style: ExerciseStyle,
    pub strike: f64,
    pub rate: f64,
    pub maturity: f64,
    pub variance: VarianceSource,
}

impl PdeProblem {
    pub fn flat(kind: PayoffKind, style: ExerciseStyle, strike: f64, rate: f64, variance: f64) -> Self {
        Self {
            kind,
            style,
            strike,
            rate,
            maturity: 1.0,
            variance: VarianceSource::Flat(variance),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "strike",
                value: self.strike,
                reason: "must be positive",
            });
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::ZeroMaturity);
        }
        if !self.rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "rate",
                value: self.rate,
                reason: "must be finite",
            });
        }
        if let VarianceSource::Flat(v) = self.variance {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "variance",
                    value: v,
                    reason: "must be finite and non-negative",
                });
            }
        }
        Ok(())
    }

    /// Dirichlet values `(V(0, t), V(S_max, t))`.
    fn boundary_values(&self, t: f64, s_max: f64) -> (f64, f64) {
        let discounted = self.strike * (-self.rate * (self.maturity - t)).exp();
        match self.kind {
            PayoffKind::Put => {
                let at_zero = match self.style {
                    ExerciseStyle::American => self.strike,
                    ExerciseStyle::European => discounted,
                };
                (at_zero, 0.0)
            }
            PayoffKind::Call => (0.0, (s_max - discounted).max(0.0)),
        }
    }
}

impl PdeProblem {
    /// A unit-maturity problem whose diffusion coefficient is the Dupire local
    /// variance of `surface`, tabulated on exactly the nodes `grid` samples.
    #[allow(clippy::too_many_arguments)]
    pub fn with_surface(
        kind: PayoffKind,
        style: ExerciseStyle,
        strike: f64,
        rate: f64,
        spot: f64,
        surface: &SurfaceParams,
        grid: &GridSpec,
        policy: DupirePolicy,
    ) -> Result<Self> {
        let maturity = 1.0;
        let table = local_variance_grid(
            surface,
            spot,
            rate,
            &grid.interior_nodes(),
            &grid.time_levels(maturity),
            policy,
        )?;
        Ok(Self {
            kind,
            style,
            strike,
            rate,
            maturity,
            variance: VarianceSource::Grid(table),
        })
    }
}

/// Discretization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_s: usize,
    pub n_t: usize,
    pub s_max: f64,
    pub theta: f64,
    pub rannacher_steps: usize,
    pub psor: PsorConfig,
}

impl GridSpec {
    /// Crank–Nicolson with two Rannacher steps and `S_max = 3·max(K, S0)`.
    pub fn new(n_s: usize, n_t: usize, strike: f64, spot: f64) -> Self {
        Self {
            n_s,
            n_t,
            s_max: 3.0 * strike.max(spot),
            theta: 0.5,
            rannacher_steps: 2,
            psor: PsorConfig::default(),
        }
    }

    pub fn ds(&self) -> f64 {
        self.s_max / self.n_s as f64
    }

    pub fn validate(&self, strike: f64) -> Result<()> {
        let bad = |name, value: f64, reason| Err(Error::InvalidParameter { name, value, reason });
        if self.n_s < 16 {
            return bad("n_s", self.n_s as f64, "need at least 16 price intervals");
        }
        if self.n_t < 16 {
            return bad("n_t", self.n_t as f64, "need at least 16 time steps");
        }
        if !(self.s_max > strike) {
            return bad("s_max", self.s_max, "grid must extend beyond the strike");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return bad("theta", self.theta, "must lie in [0, 1]");
        }
        if self.rannacher_steps > self.n_t {
            return bad("rannacher_steps", self.rannacher_steps as f64, "exceeds the number of time steps");
        }
        Ok(())
    }

    /// All price nodes `S_0..=S_{n_s}`.
    pub fn price_nodes(&self) -> Vec<f64> {
        let ds = self.ds();
        (0..=self.n_s).map(|i| i as f64 * ds).collect()
    }

    /// Interior price nodes `S_1..S_{n_s-1}`, where the diffusion coefficient is needed.
    pub fn interior_nodes(&self) -> Vec<f64> {
        let ds = self.ds();
        (1..self.n_s).map(|i| i as f64 * ds).collect()
    }

    /// Every time at which the solver samples the diffusion coefficient,
    /// ascending: the regular levels plus the Rannacher half steps.
    pub fn time_levels(&self, maturity: f64) -> Vec<f64> {
        let mut times: Vec<f64> = self.schedule(maturity).iter().map(|s| s.t_new).collect();
        times.push(maturity);
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// Backward sub-steps, from `T` down to 0.
    fn schedule(&self, maturity: f64) -> Vec<SubStep> {
        let dt = maturity / self.n_t as f64;
        let level = |n: usize| if n == self.n_t { maturity } else { n as f64 * dt };
        let mut steps = Vec::with_capacity(self.n_t + self.rannacher_steps);
        for n in (0..self.n_t).rev() {
            let (t_old, t_new) = (level(n + 1), level(n));
            if self.n_t - n <= self.rannacher_steps {
                let mid = 0.5 * (t_old + t_new);
                steps.push(SubStep {
                    t_old,
                    t_new: mid,
                    theta: 1.0,
                    level: None,
                });
                steps.push(SubStep {
                    t_old: mid,
                    t_new,
                    theta: 1.0,
                    level: Some(n),
                });
            } else {
                steps.push(SubStep {
                    t_old,
                    t_new,
                    theta: self.theta,
                    level: Some(n),
                });
            }
        }
        steps
    }
}

#[derive(Debug, Clone, Copy)]
struct SubStep {
    t_old: f64,
    t_new: f64,
    theta: f64,
    /// Regular time level reached at the end of this sub-step.
    level: Option<usize>,
}

/// Discretized `L_h` on the interior nodes plus its coupling to the
/// Dirichlet values: `(L V)_interior = op · V_interior + beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialOperator {
    pub op: Tridiagonal,
    pub beta: Vec<f64>,
}

/// Builds `L_h` at time `t` for interior nodes with local variance `variance`.
pub fn build_operator(problem: &PdeProblem, grid: &GridSpec, t: f64, variance: &[f64]) -> SpatialOperator {
    let n = grid.n_s - 1;
    let mut op = Tridiagonal::zeros(n);
    let mut beta = vec![0.0; n];
    fill_operator(problem.rate, variance, &mut op);
    let (v_lo, v_hi) = problem.boundary_values(t, grid.s_max);
    beta[0] = lower_coefficient(problem.rate, variance[0], 1) * v_lo;
    beta[n - 1] += upper_coefficient(problem.rate, variance[n - 1], n) * v_hi;
    SpatialOperator { op, beta }
}

// With S_i = i·ΔS the ΔS factors cancel: ½σ²S²/ΔS² = ½σ²i², rS/(2ΔS) = ri/2.
fn lower_coefficient(r: f64, var: f64, i: usize) -> f64 {
    let i = i as f64;
    0.5 * var * i * i - 0.5 * r * i
}

fn upper_coefficient(r: f64, var: f64, i: usize) -> f64 {
    let i = i as f64;
    0.5 * var * i * i + 0.5 * r * i
}

fn fill_operator(r: f64, variance: &[f64], op: &mut Tridiagonal) {
    for (j, &v) in variance.iter().enumerate() {
        let i = j + 1;
        let fi = i as f64;
        op.lower[j] = lower_coefficient(r, v, i);
        op.diag[j] = -v * fi * fi - r;
        op.upper[j] = upper_coefficient(r, v, i);
    }
}

/// Assembles one θ-step: returns the system matrix `I − θΔt L_new` and the
/// right-hand side `(I + (1−θ)Δt L_old) V_old + Δt(θβ_new + (1−θ)β_old)`.
pub fn step_system(
    v_old: &[f64],
    old: &SpatialOperator,
    new: &SpatialOperator,
    dt: f64,
    theta: f64,
) -> (Tridiagonal, Vec<f64>) {
    let n = v_old.len();
    let mut explicit = Tridiagonal::zeros(n);
    explicit.set_identity_plus((1.0 - theta) * dt, &old.op);
    let mut rhs = vec![0.0; n];
    explicit.apply(v_old, &mut rhs);
    for (j, r) in rhs.iter_mut().enumerate() {
        *r += dt * (theta * new.beta[j] + (1.0 - theta) * old.beta[j]);
    }
    let mut implicit = Tridiagonal::zeros(n);
    implicit.set_identity_plus(-theta * dt, &new.op);
    (implicit, rhs)
}

/// Result of a backward sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub kind: PayoffKind,
    pub style: ExerciseStyle,
    pub strike: f64,
    pub s_nodes: Vec<f64>,
    pub t_nodes: Vec<f64>,
    /// `V_i^n`, row-major by time level (`n = 0` is `t = 0`).
    pub values: Vec<f64>,
    /// Early-exercise boundary at each regular level: the largest (put) or
    /// smallest (call) node where the constraint binds. `None` when nothing
    /// binds or at maturity.
    pub exercise_boundary: Vec<Option<f64>>,
    /// Total PSOR sweeps over the whole solve.
    pub psor_sweeps: usize,
}

impl PdeSolution {
    pub fn level(&self, n: usize) -> &[f64] {
        let m = self.s_nodes.len();
        &self.values[n * m..(n + 1) * m]
    }

    pub fn dt(&self) -> f64 {
        self.t_nodes[1] - self.t_nodes[0]
    }

    pub fn ds(&self) -> f64 {
        self.s_nodes[1] - self.s_nodes[0]
    }

    /// Nodal `(Δ, Γ)` at time level `n` on the interior nodes by central differences.
    pub fn nodal_delta_gamma(&self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let v = self.level(n);
        let ds = self.ds();
        let m = v.len();
        let delta = (1..m - 1).map(|i| (v[i + 1] - v[i - 1]) / (2.0 * ds)).collect();
        let gamma = (1..m - 1)
            .map(|i| (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (ds * ds))
            .collect();
        (delta, gamma)
    }
}

/// Marches the problem from maturity back to `t = 0`.
pub fn solve(problem: &PdeProblem, grid: &GridSpec) -> Result<PdeSolution> {
    problem.validate()?;
    grid.validate(problem.strike)?;

    let n_s = grid.n_s;
    let n_int = n_s - 1;
    let s_nodes = grid.price_nodes();
    let interior = grid.interior_nodes();
    let dt_regular = problem.maturity / grid.n_t as f64;
    let t_nodes: Vec<f64> = (0..=grid.n_t)
        .map(|n| if n == grid.n_t { problem.maturity } else { n as f64 * dt_regular })
        .collect();

    let payoff: Vec<f64> = s_nodes.iter().map(|&s| problem.kind.payoff(s, problem.strike)).collect();
    let floor = &payoff[1..n_s];
    let american = problem.style == ExerciseStyle::American;

    let mut values = vec![0.0; (grid.n_t + 1) * (n_s + 1)];
    let mut exercise_boundary = vec![None; grid.n_t + 1];
    {
        let last = &mut values[grid.n_t * (n_s + 1)..];
        last.copy_from_slice(&payoff);
        let (lo, hi) = problem.boundary_values(problem.maturity, grid.s_max);
        last[0] = lo;
        last[n_s] = hi;
    }

    let mut var_old = vec![0.0; n_int];
    let mut var_new = vec![0.0; n_int];
    problem.variance.sample_into(problem.maturity, &interior, &mut var_old);
    let mut old = build_operator(problem, grid, problem.maturity, &var_old);

    let mut v: Vec<f64> = values[grid.n_t * (n_s + 1) + 1..grid.n_t * (n_s + 1) + n_s].to_vec();
    let mut next = vec![0.0; n_int];
    let mut scratch = vec![0.0; n_int];
    let mut binding = vec![false; n_int];
    let mut psor_sweeps = 0;

    for step in grid.schedule(problem.maturity) {
        let dt = step.t_old - step.t_new;
        problem.variance.sample_into(step.t_new, &interior, &mut var_new);
        let new = build_operator(problem, grid, step.t_new, &var_new);
        let (system, rhs) = step_system(&v, &old, &new, dt, step.theta);

        if american {
            next.copy_from_slice(&v);
            let report = psor(&system, &rhs, floor, &mut next, &mut binding, &grid.psor)?;
            psor_sweeps += report.sweeps;
        } else {
            system.solve(&rhs, &mut next, &mut scratch)?;
        }
        std::mem::swap(&mut v, &mut next);
        old = new;
        std::mem::swap(&mut var_old, &mut var_new);

        if let Some(n) = step.level {
            let row = &mut values[n * (n_s + 1)..(n + 1) * (n_s + 1)];
            let (lo, hi) = problem.boundary_values(t_nodes[n], grid.s_max);
            row[0] = lo;
            row[1..n_s].copy_from_slice(&v);
            row[n_s] = hi;
            if american {
                exercise_boundary[n] = boundary_node(problem.kind, &binding, &interior);
            }
        }
    }

    Ok(PdeSolution {
        kind: problem.kind,
        style: problem.style,
        strike: problem.strike,
        s_nodes,
        t_nodes,
        values,
        exercise_boundary,
        psor_sweeps,
    })
}

fn boundary_node(kind: PayoffKind, binding: &[bool], interior: &[f64]) -> Option<f64> {
    let mut active = binding.iter().zip(interior).filter(|(b, _)| **b).map(|(_, s)| *s);
    match kind {
        PayoffKind::Put => active.next_back(),
        PayoffKind::Call => active.next(),
    }
}
