//! Grid search over `(l_g, σ_g)` followed by a golden-section pass per axis.

use serde::{Deserialize, Serialize};

use super::linalg::{factorize, SquaredDistances};
use super::Hyperparams;
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Memory the concurrent grid evaluations may hold in Gram matrices.
const GRAM_MEMORY_BUDGET: usize = 2 << 30;
const GOLDEN_ITERATIONS: usize = 12;

/// `points` log-spaced values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogAxis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl LogAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.log10(), self.hi.log10());
        let step = (b - a) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.hi
                } else {
                    10f64.powf(a + step * i as f64)
                }
            })
            .collect()
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.lo > 0.0 && self.hi >= self.lo && self.hi.is_finite() && self.points >= 1) {
            return Err(Error::InvalidParameter {
                name,
                value: self.lo,
                reason: "axis needs 0 < lo <= hi and at least one point",
            });
        }
        Ok(())
    }
}

/// Hyperparameter search. `noise = None` pins σ_g to zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub length_scale: LogAxis,
    pub noise: Option<LogAxis>,
    pub refine: bool,
}

impl SearchSpec {
    const LENGTH_SCALES: LogAxis = LogAxis {
        lo: 0.1,
        hi: 31.622776601683793,
        points: 40,
    };

    /// Length scale only, σ_g = 0.
    pub fn pinned_noise() -> Self {
        Self {
            length_scale: Self::LENGTH_SCALES,
            noise: None,
            refine: true,
        }
    }

    /// Length scale and σ_g ∈ {0} ∪ [1e-6, 1] (standardized target units).
    pub fn with_noise() -> Self {
        Self {
            length_scale: Self::LENGTH_SCALES,
            noise: Some(LogAxis {
                lo: 1e-6,
                hi: 1.0,
                points: 31,
            }),
            refine: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.length_scale.validate("length_scale")?;
        if let Some(axis) = &self.noise {
            axis.validate("noise")?;
        }
        Ok(())
    }

    pub fn noise_values(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        if let Some(axis) = &self.noise {
            v.extend(axis.values());
        }
        v
    }
}

/// LML over the search grid for one target, plus the selected point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmlGrid {
    pub length_scales: Vec<f64>,
    pub noises: Vec<f64>,
    /// Row-major by noise: `values[j * length_scales.len() + i]`.
    /// Failed factorizations are `-inf`.
    pub values: Vec<f64>,
    /// `(noise index, length-scale index)` of the grid maximum.
    pub argmax: (usize, usize),
    /// Chosen hyperparameters: the grid maximum or a better refined point.
    pub selected: Hyperparams,
    pub selected_value: f64,
    pub refined: bool,
}

impl LmlGrid {
    pub fn at(&self, noise_index: usize, length_index: usize) -> f64 {
        self.values[noise_index * self.length_scales.len() + length_index]
    }

    pub fn grid_max(&self) -> f64 {
        self.at(self.argmax.0, self.argmax.1)
    }

    pub fn grid_best(&self) -> Hyperparams {
        Hyperparams {
            length_scale: self.length_scales[self.argmax.1],
            noise: self.noises[self.argmax.0],
        }
    }
}

fn score(d: &SquaredDistances, hp: &Hyperparams, ys: &[&[f64]]) -> Vec<f64> {
    match factorize(d, hp) {
        Ok(f) => ys
            .iter()
            .map(|y| {
                let v = f.log_marginal_likelihood(y);
                if v.is_finite() {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect(),
        Err(_) => vec![f64::NEG_INFINITY; ys.len()],
    }
}

/// Scores every grid point for every target, sharing each factorization.
pub fn grid_search(d: &SquaredDistances, ys: &[&[f64]], spec: &SearchSpec, exec: Execution) -> Vec<LmlGrid> {
    let ls = spec.length_scale.values();
    let noises = spec.noise_values();
    let points: Vec<Hyperparams> = noises
        .iter()
        .flat_map(|&noise| ls.iter().map(move |&length_scale| Hyperparams { length_scale, noise }))
        .collect();

    let gram_bytes = (d.len() * d.len() * 8).max(1);
    let concurrent = exec.workers().min(GRAM_MEMORY_BUDGET / gram_bytes).max(1);
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for batch in points.chunks(concurrent) {
        scores.extend(exec.map(batch, |hp| score(d, hp, ys)));
    }

    (0..ys.len())
        .map(|t| {
            let values: Vec<f64> = scores.iter().map(|s| s[t]).collect();
            let mut best = 0;
            for (k, v) in values.iter().enumerate() {
                if *v > values[best] {
                    best = k;
                }
            }
            let argmax = (best / ls.len(), best % ls.len());
            let selected = points[best];
            LmlGrid {
                length_scales: ls.clone(),
                noises: noises.clone(),
                selected_value: values[best],
                values,
                argmax,
                selected,
                refined: false,
            }
        })
        .collect()
}

/// Golden-section maximization of `f` over `[a, b]`.
fn golden_max(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..GOLDEN_ITERATIONS {
        if fc >= fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    if fc >= fe {
        (c, fc)
    } else {
        (e, fe)
    }
}

fn bracket(axis: &[f64], i: usize) -> (f64, f64) {
    let lo = axis[i.saturating_sub(1)];
    let hi = axis[(i + 1).min(axis.len() - 1)];
    (lo.ln(), hi.ln())
}

/// One golden-section pass along log l_g, then along log σ_g when the grid
/// picked a positive noise. Keeps the result only if it is no worse than
/// the grid maximum; records the choice in `grid`.
pub fn refine(d: &SquaredDistances, y: &[f64], grid: &mut LmlGrid, spec: &SearchSpec) -> Hyperparams {
    let mut best = grid.grid_best();
    let mut best_value = grid.grid_max();
    if !spec.refine || !best_value.is_finite() {
        return best;
    }
    let lml = |hp: Hyperparams| score(d, &hp, &[y])[0];

    let (a, b) = bracket(&grid.length_scales, grid.argmax.1);
    if b > a {
        let (x, v) = golden_max(a, b, |x| lml(Hyperparams { length_scale: x.exp(), ..best }));
        if v >= best_value {
            best = Hyperparams {
                length_scale: x.exp(),
                ..best
            };
            best_value = v;
            grid.refined = true;
        }
    }

    let j = grid.argmax.0;
    if j > 0 {
        // Index 0 of the noise axis is the exact zero; bracket within the positive part.
        let positive = &grid.noises[1..];
        let (a, b) = bracket(positive, j - 1);
        if b > a {
            let (x, v) = golden_max(a, b, |x| lml(Hyperparams { noise: x.exp(), ..best }));
            if v >= best_value {
                best = Hyperparams { noise: x.exp(), ..best };
                best_value = v;
                grid.refined = true;
            }
        }
    }
    grid.selected = best;
    grid.selected_value = best_value;
    best
}
