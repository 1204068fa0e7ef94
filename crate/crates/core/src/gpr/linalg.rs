use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::cholesky::llt::factor::{cholesky_in_place, cholesky_in_place_scratch, LltRegularization};
use faer::linalg::cholesky::llt::solve::solve_in_place;
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par};

use super::{squared_distance, Hyperparams};
use crate::error::{Error, Result};

/// Diagonal jitter ladder: start here and multiply by 10 on failure.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-6;

/// Strictly-lower pairwise squared distances, packed by column.
pub struct SquaredDistances {
    n: usize,
    packed: Vec<f64>,
}

impl SquaredDistances {
    pub fn new(rows: &[f64], dim: usize) -> Self {
        let n = rows.len() / dim;
        let mut packed = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for j in 0..n {
            let xj = &rows[j * dim..(j + 1) * dim];
            for i in j + 1..n {
                packed.push(squared_distance(&rows[i * dim..(i + 1) * dim], xj));
            }
        }
        Self { n, packed }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn column(&self, j: usize) -> &[f64] {
        let start = j * (2 * self.n - j - 1) / 2;
        &self.packed[start..start + self.n - j - 1]
    }

    /// Lower triangle of `K + diag · I`; the strict upper triangle is zero.
    fn gram(&self, length_scale: f64, diag: f64) -> Mat<f64> {
        let n = self.n;
        let mut m = Mat::<f64>::zeros(n, n);
        let c = -1.0 / (2.0 * length_scale * length_scale);
        for j in 0..n {
            let mut col = m.col_mut(j);
            col[j] = 1.0 + diag;
            for (off, d2) in self.column(j).iter().enumerate() {
                col[j + 1 + off] = (d2 * c).exp();
            }
        }
        m
    }
}

impl SquaredDistances {
    /// `(K + σ² I) v` without forming the matrix.
    pub fn gram_product(&self, hp: &Hyperparams, v: &[f64]) -> Vec<f64> {
        let c = -1.0 / (2.0 * hp.length_scale * hp.length_scale);
        let diag = 1.0 + hp.noise * hp.noise;
        let mut out: Vec<f64> = v.iter().map(|x| diag * x).collect();
        for j in 0..self.n {
            let mut acc = 0.0;
            for (off, d2) in self.column(j).iter().enumerate() {
                let i = j + 1 + off;
                let k = (d2 * c).exp();
                acc += k * v[i];
                out[i] += k * v[j];
            }
            out[j] += acc;
        }
        out
    }
}

const REFINEMENT_STEPS: usize = 20;

/// Solves `(K + σ² I) α = y` using the jittered factor as a preconditioner
/// for iterative refinement, which removes the bias the jitter introduces.
pub fn refined_solve(d: &SquaredDistances, hp: &Hyperparams, factor: &Factor, y: &[f64]) -> Vec<f64> {
    let residual = |alpha: &[f64]| -> Vec<f64> {
        let k_alpha = d.gram_product(hp, alpha);
        y.iter().zip(&k_alpha).map(|(a, b)| a - b).collect()
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut alpha = factor.solve(y);
    let mut r = residual(&alpha);
    let mut r_norm = norm(&r);
    for _ in 0..REFINEMENT_STEPS {
        let correction = factor.solve(&r);
        let candidate: Vec<f64> = alpha.iter().zip(&correction).map(|(a, c)| a + c).collect();
        let r_next = residual(&candidate);
        let next_norm = norm(&r_next);
        if !(next_norm < r_norm) {
            if next_norm < r_norm {
                alpha = candidate;
            }
            break;
        }
        alpha = candidate;
        r = r_next;
        r_norm = next_norm;
    }
    alpha
}

/// Cholesky factor of `K + (σ² + jitter) I`.
#[derive(Debug, Clone)]
pub struct Factor {
    pub lower: Mat<f64>,
    pub jitter: f64,
}

/// Factorizes with the jitter ladder; fails once `JITTER_MAX` is exhausted.
pub fn factorize(d: &SquaredDistances, hp: &Hyperparams) -> Result<Factor> {
    let mut jitter = JITTER_START;
    loop {
        if let Ok(f) = factorize_with_jitter(d, hp, jitter) {
            return Ok(f);
        }
        if jitter >= JITTER_MAX {
            return Err(Error::Factorization { jitter });
        }
        jitter *= 10.0;
    }
}

/// One factorization attempt at a fixed jitter.
pub fn factorize_with_jitter(d: &SquaredDistances, hp: &Hyperparams, jitter: f64) -> Result<Factor> {
    let n = d.len();
    let mut a = d.gram(hp.length_scale, hp.noise * hp.noise + jitter);
    let mut buf = MemBuffer::new(cholesky_in_place_scratch::<f64>(n, Par::Seq, Default::default()));
    let stack = MemStack::new(&mut buf);
    cholesky_in_place(a.as_mut(), LltRegularization::default(), Par::Seq, stack, Default::default())
        .map_err(|_| Error::Factorization { jitter })?;
    if (0..n).any(|i| !(a[(i, i)] > 0.0 && a[(i, i)].is_finite())) {
        return Err(Error::Factorization { jitter });
    }
    Ok(Factor { lower: a, jitter })
}

impl Factor {
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(y.len(), 1, |i, _| y[i]);
        let mut buf = MemBuffer::new(StackReq::EMPTY);
        solve_in_place(self.lower.as_ref(), rhs.as_mut(), Par::Seq, MemStack::new(&mut buf));
        (0..y.len()).map(|i| rhs[(i, 0)]).collect()
    }

    pub fn half_log_det(&self) -> f64 {
        (0..self.lower.nrows()).map(|i| self.lower[(i, i)].ln()).sum()
    }

    pub fn log_marginal_likelihood(&self, y: &[f64]) -> f64 {
        let alpha = self.solve(y);
        let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
        let n = y.len() as f64;
        -0.5 * fit - self.half_log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// `v ← L⁻¹ v`.
pub fn forward_substitute(lower: &Mat<f64>, v: &mut Mat<f64>) {
    solve_lower_triangular_in_place(lower.as_ref(), v.as_mut(), Par::Seq);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpr::rbf;

    #[test]
    fn packed_columns_address_pairs() {
        let rows = [0.0, 1.0, 3.0, 6.0];
        let d = SquaredDistances::new(&rows, 1);
        assert_eq!(d.column(0), &[1.0, 9.0, 36.0]);
        assert_eq!(d.column(1), &[4.0, 25.0]);
        assert_eq!(d.column(2), &[9.0]);
        assert!(d.column(3).is_empty());
    }

    #[test]
    fn duplicate_rows_need_jitter_or_noise() {
        let rows = [0.5, 0.5, 0.5];
        let d = SquaredDistances::new(&rows, 1);
        let f = factorize(&d, &Hyperparams { length_scale: 1.0, noise: 0.0 }).unwrap();
        assert!(f.jitter >= JITTER_START);
        let y = [1.0, 1.0, 1.0];
        let alpha = f.solve(&y);
        let k_alpha: f64 = alpha.iter().sum::<f64>() + f.jitter * alpha[0];
        assert!((k_alpha - 1.0).abs() < 1e-6);
    }

    #[test]
    fn refinement_removes_jitter_bias() {
        let rows: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let d = SquaredDistances::new(&rows, 1);
        let hp = Hyperparams { length_scale: 0.2, noise: 0.0 };
        let f = factorize(&d, &hp).unwrap();
        let y: Vec<f64> = rows.iter().map(|x| (3.0 * x).sin()).collect();
        let err = |a: &[f64]| {
            let k = d.gram_product(&hp, a);
            k.iter().zip(&y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
        };
        let plain = f.solve(&y);
        let refined = refined_solve(&d, &hp, &f, &y);
        assert!(err(&plain) > 1e-9, "{}", err(&plain));
        assert!(err(&refined) < 1e-12, "{}", err(&refined));
    }

    #[test]
    fn gram_product_matches_dense() {
        let rows = [0.0, 0.4, 1.1, 1.5];
        let d = SquaredDistances::new(&rows, 1);
        let hp = Hyperparams { length_scale: 0.9, noise: 0.2 };
        let v = [1.0, -2.0, 0.5, 3.0];
        let got = d.gram_product(&hp, &v);
        for i in 0..4 {
            let want: f64 = (0..4)
                .map(|j| (rbf((rows[i] - rows[j]).powi(2), 0.9) + if i == j { 0.04 } else { 0.0 }) * v[j])
                .sum();
            assert!((got[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn solve_inverts_the_gram_matrix() {
        let rows = [0.0, 0.3, 0.9, 1.4, 2.2];
        let d = SquaredDistances::new(&rows, 1);
        let hp = Hyperparams { length_scale: 0.7, noise: 0.1 };
        let f = factorize(&d, &hp).unwrap();
        let y = [1.0, -0.5, 0.2, 0.8, -1.1];
        let alpha = f.solve(&y);
        for i in 0..5 {
            let mut acc = 0.0;
            for j in 0..5 {
                let k = rbf((rows[i] - rows[j]) * (rows[i] - rows[j]), 0.7);
                acc += (k + if i == j { 0.01 + f.jitter } else { 0.0 }) * alpha[j];
            }
            assert!((acc - y[i]).abs() < 1e-12);
        }
    }
}
