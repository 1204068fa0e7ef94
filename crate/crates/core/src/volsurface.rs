//! SVI total-variance slices, the one-factor term structure and the Dupire
//! local variance derived from them.
//!
//! A slice is stored in the `a'` parameterization, where
//! `a' = a + b·σ·√(1-ρ²)` is the minimum of the slice. Any admissible
//! slice (`a' ≥ 0`) therefore has non-negative total variance everywhere.
//!
//! The surface is `w(k, T) = w(k)·f(T; λ)` with `f(T; λ) = T·e^{λ(1-T)}`,
//! defined on `T ∈ [0, 1]` with `λ ∈ [0, 1]`.
//!
//! The Dupire denominator uses `½ ∂²w/∂k²` for its curvature term (the
//! usual Gatheral form). All derivatives are analytic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum maturity of the surface, in years.
pub const T_MAX: f64 = 1.0;

/// Lower clamp applied to local variance before it reaches the PDE solver.
pub const LOCAL_VARIANCE_FLOOR: f64 = 1e-8;
/// Upper clamp applied to local variance before it reaches the PDE solver.
pub const LOCAL_VARIANCE_CAP: f64 = 4.0;
/// Below this total variance the Dupire ratio is replaced by `∂w/∂T`.
pub const DEGENERATE_W: f64 = 1e-10;

/// One maturity slice of SVI total variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviSlice {
    a_prime: f64,
    b: f64,
    rho: f64,
    m: f64,
    sigma: f64,
}

/// Total variance and its first two log-moneyness derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceDerivatives {
    pub w: f64,
    pub dw_dk: f64,
    pub d2w_dk2: f64,
}

impl SviSlice {
    pub fn new(a_prime: f64, b: f64, rho: f64, m: f64, sigma: f64) -> Result<Self> {
        let check = |name, value: f64, ok: bool, reason| {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value, reason })
            }
        };
        check("a_prime", a_prime, a_prime >= 0.0, "must be >= 0")?;
        check("b", b, b >= 0.0, "must be >= 0")?;
        check("rho", rho, rho > -1.0 && rho < 1.0, "must lie in (-1, 1)")?;
        check("m", m, true, "must be finite")?;
        check("sigma", sigma, sigma > 0.0, "must be > 0")?;
        Ok(Self {
            a_prime,
            b,
            rho,
            m,
            sigma,
        })
    }

    /// Builds a slice from the raw SVI vertical offset `a`.
    pub fn from_raw(a: f64, b: f64, rho: f64, m: f64, sigma: f64) -> Result<Self> {
        let shift = b * sigma * (1.0 - rho * rho).max(0.0).sqrt();
        Self::new(a + shift, b, rho, m, sigma)
    }

    /// A slice with constant total variance `a'`.
    pub fn flat(a_prime: f64) -> Result<Self> {
        Self::new(a_prime, 0.0, 0.0, 0.0, 1.0)
    }

    pub fn a_prime(&self) -> f64 {
        self.a_prime
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Raw SVI offset `a = a' - b·σ·√(1-ρ²)`.
    pub fn raw_a(&self) -> f64 {
        self.a_prime - self.b * self.sigma * (1.0 - self.rho * self.rho).sqrt()
    }

    /// Total variance `w(k)` at log-moneyness `k`.
    pub fn total_variance(&self, k: f64) -> f64 {
        let x = k - self.m;
        let root = (x * x + self.sigma * self.sigma).sqrt();
        // Written around the vertex so that w >= a' - rounding, never below.
        let w = self.a_prime
            + self.b * (self.rho * x + root - self.sigma * (1.0 - self.rho * self.rho).sqrt());
        w.max(0.0)
    }

    pub fn derivatives(&self, k: f64) -> SliceDerivatives {
        let x = k - self.m;
        let s2 = self.sigma * self.sigma;
        let root = (x * x + s2).sqrt();
        SliceDerivatives {
            w: self.total_variance(k),
            dw_dk: self.b * (self.rho + x / root),
            d2w_dk2: self.b * s2 / (root * root * root),
        }
    }
}

/// Term-structure factor `f(T; λ) = T·e^{λ(1-T)}`.
pub fn term_factor(t: f64, lambda: f64) -> Result<f64> {
    check_maturity(t)?;
    check_lambda(lambda)?;
    Ok(term_factor_unchecked(t, lambda))
}

fn term_factor_unchecked(t: f64, lambda: f64) -> f64 {
    t * (lambda * (1.0 - t)).exp()
}

/// `df/dT = e^{λ(1-T)}·(1 - λT)`.
fn term_factor_slope(t: f64, lambda: f64) -> f64 {
    (lambda * (1.0 - t)).exp() * (1.0 - lambda * t)
}

fn check_maturity(t: f64) -> Result<()> {
    if (0.0..=T_MAX).contains(&t) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "T",
            value: t,
            reason: "maturity must lie in [0, T_max]",
        })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0 / T_MAX).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "term-structure decay must lie in [0, 1/T_max]",
        })
    }
}

/// Full surface: an SVI slice scaled by the one-factor term structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    slice: SviSlice,
    lambda: f64,
}

/// Total variance on the surface and the partial derivatives Dupire needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceDerivatives {
    pub w: f64,
    pub dw_dk: f64,
    pub d2w_dk2: f64,
    pub dw_dt: f64,
}

/// How [`local_variance_grid`] reacts to a non-positive Dupire denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DupirePolicy {
    /// Fail with [`Error::ButterflyViolation`].
    Strict,
    /// Substitute the variance cap (the limit as the denominator falls to zero).
    #[default]
    Clamp,
}

impl SurfaceParams {
    pub fn new(slice: SviSlice, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { slice, lambda })
    }

    pub fn slice(&self) -> &SviSlice {
        &self.slice
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn total_variance(&self, k: f64, t: f64) -> Result<f64> {
        check_maturity(t)?;
        Ok(self.slice.total_variance(k) * term_factor_unchecked(t, self.lambda))
    }

    /// Analytic derivatives of `w(k, T)`. `t` must already be in range.
    pub fn derivatives(&self, k: f64, t: f64) -> SurfaceDerivatives {
        let s = self.slice.derivatives(k);
        let f = term_factor_unchecked(t, self.lambda);
        SurfaceDerivatives {
            w: s.w * f,
            dw_dk: s.dw_dk * f,
            d2w_dk2: s.d2w_dk2 * f,
            dw_dt: s.w * term_factor_slope(t, self.lambda),
        }
    }

    /// Dupire local variance `v_L(k, T)`, unclamped.
    pub fn local_variance(&self, k: f64, t: f64) -> Result<f64> {
        check_maturity(t)?;
        let d = self.derivatives(k, t);
        dupire_ratio(k, t, &d)
    }

    /// At-the-money Black–Scholes volatility `√(w(0, T)/T)`.
    pub fn atm_bs_vol(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(Error::ZeroMaturity);
        }
        Ok((self.total_variance(0.0, t)? / t).sqrt())
    }
}

/// Dupire ratio from precomputed surface derivatives.
pub fn dupire_ratio(k: f64, t: f64, d: &SurfaceDerivatives) -> Result<f64> {
    if d.w < DEGENERATE_W {
        return Ok(d.dw_dt);
    }
    let denominator = dupire_denominator(k, d);
    if denominator <= 0.0 {
        return Err(Error::ButterflyViolation { k, t, denominator });
    }
    Ok(d.dw_dt / denominator)
}

fn dupire_denominator(k: f64, d: &SurfaceDerivatives) -> f64 {
    let w = d.w;
    let wk = d.dw_dk;
    1.0 - k / w * wk - 0.25 * (0.25 + 1.0 / w - k * k / (w * w)) * wk * wk + 0.5 * d.d2w_dk2
}

/// Local variance sampled on a `(t, S)` grid. `values` is row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalVarianceGrid {
    s_values: Vec<f64>,
    t_values: Vec<f64>,
    values: Vec<f64>,
    substituted: usize,
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite()) && xs.windows(2).all(|w| w[0] < w[1])
}

impl LocalVarianceGrid {
    pub fn new(s_values: Vec<f64>, t_values: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if s_values.is_empty() || t_values.is_empty() {
            return Err(Error::Domain("local-variance grid axes must be non-empty".into()));
        }
        if !strictly_increasing(&s_values) || !strictly_increasing(&t_values) {
            return Err(Error::Domain("local-variance grid axes must be strictly increasing".into()));
        }
        let expected = s_values.len() * t_values.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("local variance {v} is not a finite non-negative value")));
        }
        Ok(Self {
            s_values,
            t_values,
            values,
            substituted: 0,
        })
    }

    /// Nodes where a non-positive Dupire denominator was replaced by the cap.
    pub fn substituted(&self) -> usize {
        self.substituted
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }
    pub fn t_values(&self) -> &[f64] {
        &self.t_values
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, t_index: usize) -> &[f64] {
        let n = self.s_values.len();
        &self.values[t_index * n..(t_index + 1) * n]
    }

    pub fn at(&self, t_index: usize, s_index: usize) -> f64 {
        self.values[t_index * self.s_values.len() + s_index]
    }

    /// Local variance at time `t` on the nodes `s`, bilinear in `(t, S)`
    /// with flat extrapolation beyond the axes.
    pub fn sample_into(&self, t: f64, s: &[f64], out: &mut [f64]) {
        let (i0, i1, wt) = bracket(&self.t_values, t);
        let same_axis = s.len() == self.s_values.len() && s.iter().zip(&self.s_values).all(|(a, b)| a == b);
        if same_axis {
            let (r0, r1) = (self.row(i0), self.row(i1));
            for (o, (a, b)) in out.iter_mut().zip(r0.iter().zip(r1)) {
                *o = a + wt * (b - a);
            }
            return;
        }
        for (o, &si) in out.iter_mut().zip(s) {
            let (j0, j1, ws) = bracket(&self.s_values, si);
            let lo = self.at(i0, j0) + ws * (self.at(i0, j1) - self.at(i0, j0));
            let hi = self.at(i1, j0) + ws * (self.at(i1, j1) - self.at(i1, j0));
            *o = lo + wt * (hi - lo);
        }
    }
}

/// Indices bracketing `x` and the linear weight of the upper one.
fn bracket(axis: &[f64], x: f64) -> (usize, usize, f64) {
    let n = axis.len();
    if n == 1 || x <= axis[0] {
        return (0, 0, 0.0);
    }
    if x >= axis[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = axis.partition_point(|&a| a <= x);
    let lo = hi - 1;
    if axis[lo] == x {
        return (lo, lo, 0.0);
    }
    (lo, hi, (x - axis[lo]) / (axis[hi] - axis[lo]))
}

/// Log-moneyness of stock level `s` at time `t` against the forward `s0·e^{rt}`.
pub fn forward_log_moneyness(s: f64, s0: f64, r: f64, t: f64) -> f64 {
    (s / s0).ln() - r * t
}

/// Samples `σ²_loc(S, t) = v_L(ln(S / S0·e^{rt}), t)` on the given axes and
/// clamps it to `[LOCAL_VARIANCE_FLOOR, LOCAL_VARIANCE_CAP]`.
pub fn local_variance_grid(
    params: &SurfaceParams,
    s0: f64,
    r: f64,
    s_values: &[f64],
    t_values: &[f64],
    policy: DupirePolicy,
) -> Result<LocalVarianceGrid> {
    if !(s0 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "s0",
            value: s0,
            reason: "spot must be positive",
        });
    }
    if let Some(&s) = s_values.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "S",
            value: s,
            reason: "grid stock prices must be positive",
        });
    }
    for &t in t_values {
        check_maturity(t)?;
    }
    let mut values = Vec::with_capacity(s_values.len() * t_values.len());
    let mut substituted = 0;
    for &t in t_values {
        for &s in s_values {
            let k = forward_log_moneyness(s, s0, r, t);
            let d = params.derivatives(k, t);
            let v = match dupire_ratio(k, t, &d) {
                Ok(v) => v,
                Err(e) => match policy {
                    DupirePolicy::Strict => return Err(e),
                    DupirePolicy::Clamp => {
                        substituted += 1;
                        LOCAL_VARIANCE_CAP
                    }
                },
            };
            values.push(v.clamp(LOCAL_VARIANCE_FLOOR, LOCAL_VARIANCE_CAP));
        }
    }
    let mut grid = LocalVarianceGrid::new(s_values.to_vec(), t_values.to_vec(), values)?;
    grid.substituted = substituted;
    Ok(grid)
}
