//! Variance-swap fair strike by static replication with out-of-the-money
//! European options priced off an SVI slice.
//!
//! ```text
//! K_var = 2/T · [ rT + 1 - e^{rT}
//!                 + e^{rT} ( ∫_0^{S0} P(K)/K² dK + ∫_{S0}^∞ C(K)/K² dK ) ]
//! ```
//!
//! Both integrals are taken in log-strike `x = ln(K/S0)`, where
//! `dK/K² = dx/K`, with composite Simpson on `[-10, 0]` and `[0, 10]`. The
//! node count doubles until successive estimates agree to [`TOLERANCE`].

use crate::analytics::{bs_call, bs_put, EuropeanQuote};
use crate::error::{Error, Result};
use crate::volsurface::SviSlice;

/// Half-width of the log-strike integration window.
pub const LOG_STRIKE_BOUND: f64 = 10.0;
/// Convergence threshold between successive refinements (variance units).
pub const TOLERANCE: f64 = 1e-8;
const START_INTERVALS: usize = 1 << 12;
const MAX_INTERVALS: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarSwapInputs {
    pub slice: SviSlice,
    pub rate: f64,
    pub maturity: f64,
    pub spot: f64,
}

impl VarSwapInputs {
    /// Unit maturity and unit spot, as used throughout the dataset pipeline.
    pub fn unit(slice: SviSlice, rate: f64) -> Self {
        Self {
            slice,
            rate,
            maturity: 1.0,
            spot: 1.0,
        }
    }
}

/// Black–Scholes volatility at strike `K` read off the slice:
/// `σ_bs = √(w(ln(K / S0·e^{rT})) / T)`.
pub fn strike_vol(strike: f64, slice: &SviSlice, rate: f64, maturity: f64, spot: f64) -> Result<f64> {
    if !(strike > 0.0) {
        return Err(Error::InvalidParameter {
            name: "strike",
            value: strike,
            reason: "must be positive",
        });
    }
    if !(maturity > 0.0) {
        return Err(Error::ZeroMaturity);
    }
    let k = (strike / spot).ln() - rate * maturity;
    Ok((slice.total_variance(k) / maturity).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Wing {
    Puts,
    Calls,
}

/// Integrand in log-strike: OTM option price divided by strike.
fn otm_integrand(x: f64, wing: Wing, inputs: &VarSwapInputs) -> Result<f64> {
    let strike = inputs.spot * x.exp();
    let vol = strike_vol(strike, &inputs.slice, inputs.rate, inputs.maturity, inputs.spot)?;
    let q = EuropeanQuote {
        spot: inputs.spot,
        strike,
        rate: inputs.rate,
        vol,
        maturity: inputs.maturity,
    };
    let price = match wing {
        Wing::Puts => bs_put(&q)?,
        Wing::Calls => bs_call(&q)?,
    };
    Ok(price / strike)
}

/// Incremental composite Simpson over `[a, b]`. Keeps the endpoint, even and
/// odd sums so each doubling only evaluates the new midpoints.
struct Simpson<'a> {
    a: f64,
    b: f64,
    n: usize,
    ends: f64,
    even: f64,
    odd: f64,
    f: &'a dyn Fn(f64) -> Result<f64>,
}

impl<'a> Simpson<'a> {
    fn new(a: f64, b: f64, n: usize, f: &'a dyn Fn(f64) -> Result<f64>) -> Result<Self> {
        let h = (b - a) / n as f64;
        let mut even = 0.0;
        let mut odd = 0.0;
        for i in 1..n {
            let v = f(a + i as f64 * h)?;
            if i % 2 == 0 {
                even += v;
            } else {
                odd += v;
            }
        }
        Ok(Self {
            a,
            b,
            n,
            ends: f(a)? + f(b)?,
            even,
            odd,
            f,
        })
    }

    fn value(&self) -> f64 {
        let h = (self.b - self.a) / self.n as f64;
        h / 3.0 * (self.ends + 4.0 * self.odd + 2.0 * self.even)
    }

    fn refine(&mut self) -> Result<()> {
        let n = 2 * self.n;
        let h = (self.b - self.a) / n as f64;
        let mut odd = 0.0;
        for i in (1..n).step_by(2) {
            odd += (self.f)(self.a + i as f64 * h)?;
        }
        self.even += self.odd;
        self.odd = odd;
        self.n = n;
        Ok(())
    }
}

/// Fair variance strike (annualized variance units).
pub fn fair_strike(inputs: &VarSwapInputs) -> Result<f64> {
    if !(inputs.maturity > 0.0) {
        return Err(Error::ZeroMaturity);
    }
    if !(inputs.spot > 0.0) || !inputs.rate.is_finite() {
        return Err(Error::Domain("variance swap needs a positive spot and a finite rate".into()));
    }
    let put_wing = |x: f64| otm_integrand(x, Wing::Puts, inputs);
    let call_wing = |x: f64| otm_integrand(x, Wing::Calls, inputs);
    let half = START_INTERVALS / 2;
    let mut puts = Simpson::new(-LOG_STRIKE_BOUND, 0.0, half, &put_wing)?;
    let mut calls = Simpson::new(0.0, LOG_STRIKE_BOUND, half, &call_wing)?;

    let (r, t) = (inputs.rate, inputs.maturity);
    let growth = (r * t).exp();
    let combine = |strip: f64| 2.0 / t * (r * t + 1.0 - growth + growth * strip);

    let mut previous = combine(puts.value() + calls.value());
    loop {
        puts.refine()?;
        calls.refine()?;
        let current = combine(puts.value() + calls.value());
        let change = (current - previous).abs();
        let intervals = puts.n + calls.n;
        if change < TOLERANCE {
            return Ok(current);
        }
        if intervals >= MAX_INTERVALS {
            return Err(Error::IntegrationNonConvergence { intervals, change });
        }
        previous = current;
    }
}
