//! Black–Scholes closed forms for European options (no dividends).

use crate::error::{Error, Result};

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Inputs to a European Black–Scholes price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EuropeanQuote {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub vol: f64,
    pub maturity: f64,
}

impl EuropeanQuote {
    fn validate(&self) -> Result<()> {
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        if !(self.spot > 0.0 && self.spot.is_finite()) {
            return bad("spot", self.spot, "must be positive");
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return bad("strike", self.strike, "must be positive");
        }
        if !(self.vol >= 0.0) {
            return bad("vol", self.vol, "must be non-negative");
        }
        if !(self.maturity >= 0.0) {
            return bad("maturity", self.maturity, "must be non-negative");
        }
        if !self.rate.is_finite() {
            return bad("rate", self.rate, "must be finite");
        }
        Ok(())
    }

    /// `(d1, d2)`, or `None` when `σ√T` vanishes.
    fn d1_d2(&self) -> Option<(f64, f64)> {
        let sd = self.vol * self.maturity.sqrt();
        if sd <= 0.0 {
            return None;
        }
        let d1 = ((self.spot / self.strike).ln() + (self.rate + 0.5 * self.vol * self.vol) * self.maturity) / sd;
        Some((d1, d1 - sd))
    }

    fn discounted_strike(&self) -> f64 {
        self.strike * (-self.rate * self.maturity).exp()
    }
}

/// European call `S N(d1) - K e^{-rT} N(d2)`.
pub fn bs_call(q: &EuropeanQuote) -> Result<f64> {
    q.validate()?;
    let df_k = q.discounted_strike();
    Ok(match q.d1_d2() {
        Some((d1, d2)) => (q.spot * norm_cdf(d1) - df_k * norm_cdf(d2)).max(0.0),
        None => (q.spot - df_k).max(0.0),
    })
}

/// European put `K e^{-rT} N(-d2) - S N(-d1)`.
pub fn bs_put(q: &EuropeanQuote) -> Result<f64> {
    q.validate()?;
    let df_k = q.discounted_strike();
    Ok(match q.d1_d2() {
        Some((d1, d2)) => (df_k * norm_cdf(-d2) - q.spot * norm_cdf(-d1)).max(0.0),
        None => (df_k - q.spot).max(0.0),
    })
}
