//! Exact Gaussian-process regression with an isotropic RBF kernel.
//!
//! Inputs are standardized per dimension and the target is centred and
//! scaled before fitting, so the length scale and noise level live in
//! standardized units. Training solves `(K + (σ_g² + jitter) I) α = y` by
//! Cholesky; the factor is kept for posterior variance queries.

mod linalg;
mod search;
mod serde_io;

pub use search::{LmlGrid, LogAxis, SearchSpec};
pub use serde_io::MODEL_FORMAT;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use linalg::{factorize, refined_solve, Factor, SquaredDistances};

/// Kernel length scale and observation-noise level, in standardized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub length_scale: f64,
    pub noise: f64,
}

impl Hyperparams {
    pub fn new(length_scale: f64, noise: f64) -> Result<Self> {
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "length_scale",
                value: length_scale,
                reason: "must be positive",
            });
        }
        if !(noise >= 0.0 && noise.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise",
                value: noise,
                reason: "must be non-negative",
            });
        }
        Ok(Self { length_scale, noise })
    }
}

/// `exp(−‖x − x′‖² / (2 l²))`.
pub fn kernel(x: &[f64], x2: &[f64], length_scale: f64) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x2.len(),
        });
    }
    Ok(rbf(squared_distance(x, x2), length_scale))
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

#[inline]
fn rbf(d2: f64, length_scale: f64) -> f64 {
    (d2 * (-1.0 / (2.0 * length_scale * length_scale))).exp()
}

/// Per-dimension affine map `z = (x − shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Mean and population standard deviation of each column of the
    /// row-major `rows`. Constant columns get unit scale.
    pub fn fit(rows: &[f64], dim: usize) -> Self {
        let n = (rows.len() / dim) as f64;
        let mut shift = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for (s, x) in shift.iter_mut().zip(row) {
                *s += x;
            }
        }
        shift.iter_mut().for_each(|s| *s /= n);
        let mut scale = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for ((v, x), m) in scale.iter_mut().zip(row).zip(&shift) {
                *v += (x - m) * (x - m);
            }
        }
        for v in scale.iter_mut() {
            let sd = (*v / n).sqrt();
            *v = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        }
        Self { shift, scale }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, rows: &[f64]) -> Vec<f64> {
        let mut out = rows.to_vec();
        for row in out.chunks_exact_mut(self.dim()) {
            self.apply_in_place(row);
        }
        out
    }

    fn apply_in_place(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.shift).zip(&self.scale) {
            *x = (*x - m) / s;
        }
    }

    pub fn invert(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.shift).zip(&self.scale) {
            *x = *x * s + m;
        }
    }
}

/// Posterior mean and variance of the latent function, in target units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// A fitted regressor; immutable and safe to share between threads.
#[derive(Debug, Clone)]
pub struct TrainedGpr {
    dim: usize,
    raw_inputs: Vec<f64>,
    raw_targets: Vec<f64>,
    inputs: Vec<f64>,
    input_scaler: Standardizer,
    output_scaler: Standardizer,
    hyperparams: Hyperparams,
    factor: Factor,
    alpha: Vec<f64>,
}

fn check_design(rows: &[f64], dim: usize, targets: &[f64]) -> Result<usize> {
    if dim == 0 || !rows.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim.max(1),
            got: rows.len(),
        });
    }
    let n = rows.len() / dim;
    if targets.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: targets.len(),
        });
    }
    if n == 0 {
        return Err(Error::DegenerateData("no training rows".into()));
    }
    if let Some(v) = rows.iter().chain(targets).find(|v| !v.is_finite()) {
        return Err(Error::DegenerateData(format!("non-finite value {v} in training data")));
    }
    Ok(n)
}

/// Log marginal likelihood of `targets` under a zero-mean GP on `rows`
/// (row-major, `dim` columns), taken as given without standardization:
/// `−½ yᵀ(K + σ²I)⁻¹y − ½ log det(K + σ²I) − (n/2) log 2π`.
///
/// The diagonal also carries the numerical jitter, escalated on failure.
pub fn log_marginal_likelihood(rows: &[f64], dim: usize, targets: &[f64], hp: &Hyperparams) -> Result<f64> {
    check_design(rows, dim, targets)?;
    let distances = SquaredDistances::new(rows, dim);
    let factor = factorize(&distances, hp)?;
    Ok(factor.log_marginal_likelihood(targets))
}

impl TrainedGpr {
    /// Fits one target, returning the model and the hyperparameter landscape.
    pub fn fit(rows: &[f64], dim: usize, targets: &[f64], spec: &SearchSpec, exec: Execution) -> Result<(Self, LmlGrid)> {
        let mut out = Self::fit_many(rows, dim, &[targets.to_vec()], spec, exec)?;
        Ok(out.pop().expect("one target in, one model out"))
    }

    /// Fits several targets on shared inputs. The hyperparameter grid is
    /// factorized once per point and scored for every target.
    pub fn fit_many(
        rows: &[f64],
        dim: usize,
        targets: &[Vec<f64>],
        spec: &SearchSpec,
        exec: Execution,
    ) -> Result<Vec<(Self, LmlGrid)>> {
        spec.validate()?;
        let mut n = 0;
        for t in targets {
            n = check_design(rows, dim, t)?;
        }
        if n < 2 {
            return Err(Error::DegenerateData("need at least two training rows".into()));
        }
        let input_scaler = Standardizer::fit(rows, dim);
        let constant = (0..dim).all(|j| rows.chunks_exact(dim).all(|r| r[j] == rows[j]));
        if constant {
            return Err(Error::DegenerateData("every input dimension is constant".into()));
        }
        let inputs = input_scaler.apply(rows);
        let scaled: Vec<(Standardizer, Vec<f64>)> = targets
            .iter()
            .map(|t| {
                let s = Standardizer::fit(t, 1);
                let z = s.apply(t);
                (s, z)
            })
            .collect();
        let distances = SquaredDistances::new(&inputs, dim);
        let ys: Vec<&[f64]> = scaled.iter().map(|(_, z)| z.as_slice()).collect();
        let grids = search::grid_search(&distances, &ys, spec, exec);

        let mut models = Vec::with_capacity(targets.len());
        for ((mut grid, (output_scaler, z)), raw) in grids.into_iter().zip(scaled).zip(targets) {
            let hp = search::refine(&distances, &z, &mut grid, spec);
            let factor = factorize(&distances, &hp)?;
            let alpha = refined_solve(&distances, &hp, &factor, &z);
            models.push((
                Self {
                    dim,
                    raw_inputs: rows.to_vec(),
                    raw_targets: raw.clone(),
                    inputs: inputs.clone(),
                    input_scaler: input_scaler.clone(),
                    output_scaler,
                    hyperparams: hp,
                    factor,
                    alpha,
                },
                grid,
            ));
        }
        Ok(models)
    }

    /// Fits with fixed hyperparameters, no search.
    pub fn with_hyperparams(rows: &[f64], dim: usize, targets: &[f64], hp: Hyperparams) -> Result<Self> {
        check_design(rows, dim, targets)?;
        let input_scaler = Standardizer::fit(rows, dim);
        let output_scaler = Standardizer::fit(targets, 1);
        Self::assemble(rows, dim, targets, input_scaler, output_scaler, hp, None)
    }

    fn assemble(
        rows: &[f64],
        dim: usize,
        targets: &[f64],
        input_scaler: Standardizer,
        output_scaler: Standardizer,
        hp: Hyperparams,
        jitter: Option<f64>,
    ) -> Result<Self> {
        let inputs = input_scaler.apply(rows);
        let z = output_scaler.apply(targets);
        let distances = SquaredDistances::new(&inputs, dim);
        let factor = match jitter {
            Some(j) => linalg::factorize_with_jitter(&distances, &hp, j)?,
            None => factorize(&distances, &hp)?,
        };
        let alpha = refined_solve(&distances, &hp, &factor, &z);
        Ok(Self {
            dim,
            raw_inputs: rows.to_vec(),
            raw_targets: targets.to_vec(),
            inputs,
            input_scaler,
            output_scaler,
            hyperparams: hp,
            factor,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn hyperparams(&self) -> Hyperparams {
        self.hyperparams
    }

    /// Diagonal jitter the final factorization needed.
    pub fn jitter(&self) -> f64 {
        self.factor.jitter
    }

    pub fn input_scaler(&self) -> &Standardizer {
        &self.input_scaler
    }

    pub fn output_scaler(&self) -> &Standardizer {
        &self.output_scaler
    }

    /// `(K + σ²I)⁻¹ y` in standardized units, refined against the
    /// unjittered matrix.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// LML of this model's standardized training data at `hp`, evaluated
    /// exactly as the grid search does.
    pub fn log_marginal_likelihood(&self, hp: &Hyperparams) -> Result<f64> {
        let z = self.output_scaler.apply(&self.raw_targets);
        let distances = SquaredDistances::new(&self.inputs, self.dim);
        Ok(factorize(&distances, hp)?.log_marginal_likelihood(&z))
    }

    fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut z = x.to_vec();
        self.input_scaler.apply_in_place(&mut z);
        Ok(z)
    }

    fn cross_kernel(&self, z: &[f64]) -> Vec<f64> {
        let l = self.hyperparams.length_scale;
        self.inputs
            .chunks_exact(self.dim)
            .map(|row| rbf(squared_distance(row, z), l))
            .collect()
    }

    fn destandardize(&self, mean: f64) -> f64 {
        mean * self.output_scaler.scale[0] + self.output_scaler.shift[0]
    }

    /// Posterior mean only.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        let z = self.standardize(x)?;
        let k = self.cross_kernel(&z);
        let mean: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        Ok(self.destandardize(mean))
    }

    /// Posterior mean and variance of the latent function at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let z = self.standardize(x)?;
        let k = self.cross_kernel(&z);
        let mean: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let explained = self.factor.quadratic_form(&k);
        let variance = (1.0 - explained).max(0.0);
        let s = self.output_scaler.scale[0];
        Ok(Prediction {
            mean: self.destandardize(mean),
            variance: variance * s * s,
        })
    }

    /// Means for row-major `rows`; identical to repeated [`Self::predict_mean`].
    pub fn predict_mean_batch(&self, rows: &[f64], exec: Execution) -> Result<Vec<f64>> {
        let chunks: Vec<&[f64]> = self.batch_rows(rows)?;
        exec.map(&chunks, |x| self.predict_mean(x)).into_iter().collect()
    }

    /// Full predictions for row-major `rows`; identical to repeated [`Self::predict`].
    pub fn predict_batch(&self, rows: &[f64], exec: Execution) -> Result<Vec<Prediction>> {
        let chunks: Vec<&[f64]> = self.batch_rows(rows)?;
        exec.map(&chunks, |x| self.predict(x)).into_iter().collect()
    }

    fn batch_rows<'a>(&self, rows: &'a [f64]) -> Result<Vec<&'a [f64]>> {
        if !rows.len().is_multiple_of(self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rows.len() % self.dim,
            });
        }
        Ok(rows.chunks_exact(self.dim).collect())
    }

    pub(crate) fn raw_inputs(&self) -> &[f64] {
        &self.raw_inputs
    }

    pub(crate) fn raw_targets(&self) -> &[f64] {
        &self.raw_targets
    }
}

impl Factor {
    fn quadratic_form(&self, k: &[f64]) -> f64 {
        let mut v = Mat::from_fn(k.len(), 1, |i, _| k[i]);
        linalg::forward_substitute(&self.lower, &mut v);
        (0..k.len()).map(|i| v[(i, 0)] * v[(i, 0)]).sum()
    }
}
