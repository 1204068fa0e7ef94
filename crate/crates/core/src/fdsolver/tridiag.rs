use crate::error::{Error, Result};

/// Tridiagonal matrix stored by bands. `lower[0]` and `upper[n-1]` are unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = self · x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Overwrites `self` with `I + scale · other`.
    pub fn set_identity_plus(&mut self, scale: f64, other: &Tridiagonal) {
        for i in 0..self.len() {
            self.lower[i] = scale * other.lower[i];
            self.diag[i] = 1.0 + scale * other.diag[i];
            self.upper[i] = scale * other.upper[i];
        }
    }

    /// Thomas algorithm. `scratch` must have the matrix length.
    pub fn solve(&self, rhs: &[f64], x: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Ok(());
        }
        let mut pivot = self.diag[0];
        if pivot == 0.0 {
            return Err(Error::SingularMatrix { row: 0 });
        }
        x[0] = rhs[0] / pivot;
        for i in 1..n {
            scratch[i] = self.upper[i - 1] / pivot;
            pivot = self.diag[i] - self.lower[i] * scratch[i];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularMatrix { row: i });
            }
            x[i] = (rhs[i] - self.lower[i] * x[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            x[i] -= scratch[i + 1] * x[i + 1];
        }
        Ok(())
    }
}

/// Projected SOR settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PsorConfig {
    pub omega: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PsorConfig {
    fn default() -> Self {
        Self {
            omega: 1.2,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

/// Outcome of a converged PSOR solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsorReport {
    pub sweeps: usize,
    pub residual: f64,
}

/// Solves the linear complementarity problem
/// `M x ≥ rhs, x ≥ floor, (M x - rhs)ᵢ (x - floor)ᵢ = 0` by projected SOR.
///
/// `x` is the warm start on entry. Convergence is measured by the max-norm
/// of the natural residual `min(M x - rhs, x - floor)`. On return `binding[i]`
/// is true where the last sweep's unconstrained update fell below the floor.
pub fn psor(
    m: &Tridiagonal,
    rhs: &[f64],
    floor: &[f64],
    x: &mut [f64],
    binding: &mut [bool],
    cfg: &PsorConfig,
) -> Result<PsorReport> {
    if !(cfg.omega > 0.0 && cfg.omega < 2.0) {
        return Err(Error::InvalidParameter {
            name: "omega",
            value: cfg.omega,
            reason: "relaxation factor must lie in (0, 2)",
        });
    }
    let n = m.len();
    for (xi, fi) in x.iter_mut().zip(floor) {
        *xi = xi.max(*fi);
    }
    let mut residual = f64::INFINITY;
    for sweep in 1..=cfg.max_iter {
        let mut max_change = 0.0f64;
        for i in 0..n {
            let mut off = 0.0;
            if i > 0 {
                off += m.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                off += m.upper[i] * x[i + 1];
            }
            let gauss_seidel = (rhs[i] - off) / m.diag[i];
            let candidate = x[i] + cfg.omega * (gauss_seidel - x[i]);
            binding[i] = candidate < floor[i] - BINDING_SLACK;
            let next = candidate.max(floor[i]);
            max_change = max_change.max((next - x[i]).abs());
            x[i] = next;
        }
        if max_change < cfg.tol {
            residual = natural_residual(m, rhs, floor, x);
            if residual < cfg.tol {
                return Ok(PsorReport { sweeps: sweep, residual });
            }
        }
    }
    Err(Error::PsorNonConvergence {
        iterations: cfg.max_iter,
        residual,
    })
}

/// Shortfall below the floor that counts as an active constraint rather than
/// rounding noise.
const BINDING_SLACK: f64 = 1e-12;

/// `max_i |min((M x - rhs)_i, x_i - floor_i)|`
pub fn natural_residual(m: &Tridiagonal, rhs: &[f64], floor: &[f64], x: &[f64]) -> f64 {
    let n = m.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut mx = m.diag[i] * x[i];
        if i > 0 {
            mx += m.lower[i] * x[i - 1];
        }
        if i + 1 < n {
            mx += m.upper[i] * x[i + 1];
        }
        worst = worst.max((mx - rhs[i]).min(x[i] - floor[i]).abs());
    }
    worst
}
