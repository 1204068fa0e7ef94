use serde::{Deserialize, Serialize};

use super::PdeSolution;
use crate::error::{Error, Result};

/// Value and sensitivities at one spot, `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Greeks {
    pub value: f64,
    pub delta: f64,
    pub gamma: f64,
    /// `∂V/∂t` in calendar time, per year.
    pub theta: f64,
}

/// Reads `(V, Δ, Γ, Θ)` at `s0` off the solution.
///
/// Δ and Γ are central differences at the two nodes bracketing `s0`,
/// blended linearly. V is read with the cubic through the four nearest
/// nodes, and Θ is the forward difference of that value between the first
/// two time levels.
pub fn greeks_at(sol: &PdeSolution, s0: f64) -> Result<Greeks> {
    let ds = sol.ds();
    let last = sol.s_nodes.len() - 1;
    let lo = sol.s_nodes[1];
    let hi = sol.s_nodes[last - 1];
    if !(s0 >= lo && s0 <= hi) {
        return Err(Error::SpotOutOfGrid { spot: s0, lo, hi });
    }
    let i = (((s0 / ds).floor() as usize).max(1)).min(last - 2);
    let w = (s0 - sol.s_nodes[i]) / ds;
    let lerp = |a: f64, b: f64| (1.0 - w) * a + w * b;

    let v0 = sol.level(0);
    let v1 = sol.level(1);
    let delta_at = |j: usize| (v0[j + 1] - v0[j - 1]) / (2.0 * ds);
    let gamma_at = |j: usize| (v0[j + 1] - 2.0 * v0[j] + v0[j - 1]) / (ds * ds);

    let value = cubic(&v0[i - 1..i + 3], w);
    let later = cubic(&v1[i - 1..i + 3], w);
    Ok(Greeks {
        value,
        delta: lerp(delta_at(i), delta_at(i + 1)),
        gamma: lerp(gamma_at(i), gamma_at(i + 1)),
        theta: (later - value) / sol.dt(),
    })
}

/// Lagrange cubic through unit-spaced nodes at `-1, 0, 1, 2`, evaluated at `w ∈ [0, 1]`.
fn cubic(v: &[f64], w: f64) -> f64 {
    let (a, b, c) = (w + 1.0, w - 1.0, w - 2.0);
    -w * b * c / 6.0 * v[0] + a * b * c / 2.0 * v[1] - a * w * c / 2.0 * v[2] + a * w * b / 6.0 * v[3]
}
