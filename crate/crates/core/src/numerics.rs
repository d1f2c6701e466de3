//! Dense numeric kernels shared by every model in the crate.
//!
//! Everything is `f64`. Randomness goes through [`SeededRng`] (ChaCha8), so a
//! seed fixes every draw on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The one generator used for initialization, shuffling and sampling.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::shape(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    /// `out += self * x`
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, x);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_acc(x, &mut out);
        out
    }

    /// `out += selfᵀ * y`
    pub fn t_matvec_acc(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if yi != 0.0 {
                axpy(yi, row, out);
            }
        }
    }

    /// `self += scale * a bᵀ`
    pub fn add_outer(&mut self, a: &[f64], b: &[f64], scale: f64) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (&ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if ai != 0.0 {
                axpy(scale * ai, b, row);
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Index of the maximum; ties resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

pub fn sigmoid_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| sigmoid(x)).collect()
}

pub fn tanh_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.tanh()).collect()
}

/// `ln Σ exp(v_i)`, shifted by the maximum so large magnitudes do not overflow.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Empty("log_sum_exp of an empty vector"));
    }
    Ok(log_sum_exp_unchecked(v))
}

#[inline]
pub(crate) fn log_sum_exp_unchecked(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Uniform Glorot initialization in `[-r, r]`, `r = sqrt(6 / (rows + cols))`.
pub fn init_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-r..=r))
        .collect();
    Matrix { rows, cols, data }
}

/// Plain SGD with a cap on the global gradient norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerState {
    learning_rate: f64,
    clip_threshold: f64,
}

impl OptimizerState {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
    pub const DEFAULT_CLIP: f64 = 5.0;

    pub fn new(learning_rate: f64, clip_threshold: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        if !(clip_threshold > 0.0) {
            return Err(Error::Config(format!(
                "clip threshold must be positive, got {clip_threshold}"
            )));
        }
        Ok(Self {
            learning_rate,
            clip_threshold,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn clip_threshold(&self) -> f64 {
        self.clip_threshold
    }
}

impl Default for OptimizerState {
    fn default() -> Self {
        Self {
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            clip_threshold: Self::DEFAULT_CLIP,
        }
    }
}

/// Applies `p -= lr * g` to every block after rescaling all gradients so their
/// joint L2 norm is at most the clip threshold. Returns the norm before clipping.
pub fn clipped_sgd_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &OptimizerState,
) -> Result<f64> {
    if params.len() != grads.len() {
        return Err(Error::shape(format!(
            "{} parameter blocks but {} gradient blocks",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() {
            return Err(Error::shape(format!(
                "block {i}: {} parameters but {} gradients",
                p.len(),
                g.len()
            )));
        }
    }
    let norm = grads.iter().map(|g| dot(g, g)).sum::<f64>().sqrt();
    let scale = if norm > state.clip_threshold {
        state.clip_threshold / norm
    } else {
        1.0
    };
    let step = -state.learning_rate * scale;
    for (p, g) in params.iter_mut().zip(grads) {
        axpy(step, g, p);
    }
    Ok(norm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub numeric: Vec<f64>,
    pub relative_errors: Vec<f64>,
    pub max_relative_error: f64,
    /// Index of the worst coordinate, if any.
    pub worst: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares `analytic` against central differences of `loss` around `params`.
pub fn finite_diff_check<F>(
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    epsilon: f64,
    tolerance: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut probe = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + epsilon;
        let plus = loss(&probe);
        probe[i] = orig - epsilon;
        let minus = loss(&probe);
        probe[i] = orig;
        numeric.push((plus - minus) / (2.0 * epsilon));
    }
    let relative_errors: Vec<f64> = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .collect();
    let worst = (!relative_errors.is_empty()).then(|| argmax(&relative_errors));
    let max_relative_error = worst.map_or(0.0, |i| relative_errors[i]);
    GradCheckReport {
        numeric,
        relative_errors,
        max_relative_error,
        worst,
        tolerance,
        passed: max_relative_error <= tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_analytic_values() {
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-15);
        let big = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((big - (1000.0 + 2f64.ln())).abs() < 1e-12);
        // e^3 + e + e + 1 summed directly
        let direct = (3f64.exp() + 2.0 * 1f64.exp() + 1.0).ln();
        let v = log_sum_exp(&[3.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((v - direct).abs() < 1e-12);
        assert!((v - 3.277978).abs() < 1e-6);
    }

    #[test]
    fn lse_extremes() {
        assert!(log_sum_exp(&[]).is_err());
        let v = log_sum_exp(&[1e300, 1e300]).unwrap();
        assert!(v.is_finite());
        let v = log_sum_exp(&[-1e300, -1e300]).unwrap();
        assert!(v.is_finite());
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn sigmoid_and_tanh() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(tanh(0.0), 0.0);
        let p = sigmoid(2.5);
        let n = sigmoid(-2.5);
        assert!((p + n - 1.0).abs() < 1e-12);
        assert!((p - 0.924142).abs() < 1e-6);
        assert!((n - 0.075858).abs() < 1e-6);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert_eq!(sigmoid_vec(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(tanh_vec(&[0.0]), vec![0.0]);
    }

    #[test]
    fn init_matrix_bounds_and_determinism() {
        let mut rng = seeded_rng(7);
        let m = init_matrix(20, 30, &mut rng);
        let r = (6.0f64 / 50.0).sqrt();
        assert!(m.data().iter().all(|v| v.abs() <= r));
        let again = init_matrix(20, 30, &mut seeded_rng(7));
        assert_eq!(m, again);
        let other = init_matrix(20, 30, &mut seeded_rng(8));
        assert_ne!(m, other);
    }

    #[test]
    fn init_matrix_mean_is_centered() {
        let m = init_matrix(1000, 1000, &mut seeded_rng(1));
        let n = m.data().len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let r = (6.0f64 / 2000.0).sqrt();
        // uniform[-r, r] has variance r²/3
        let sigma_of_mean = (r * r / 3.0).sqrt() / n.sqrt();
        assert!(mean.abs() < 3.0 * sigma_of_mean, "mean {mean}");
    }

    #[test]
    fn sgd_step_arithmetic() {
        let state = OptimizerState::new(0.01, 5.0).unwrap();
        let mut p = vec![1.0];
        let g = vec![2.0];
        clipped_sgd_step(&mut [&mut p], &[&g], &state).unwrap();
        assert!((p[0] - 0.98).abs() < 1e-15);
    }

    #[test]
    fn sgd_step_clips_global_norm() {
        let state = OptimizerState::new(1.0, 5.0).unwrap();
        let mut a = vec![0.0, 0.0];
        let mut b = vec![0.0];
        let ga = vec![6.0, 0.0];
        let gb = vec![8.0];
        let norm = clipped_sgd_step(&mut [&mut a, &mut b], &[&ga, &gb], &state).unwrap();
        assert_eq!(norm, 10.0);
        assert!((a[0] + 3.0).abs() < 1e-12);
        assert!((b[0] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn sgd_step_zero_grads_and_errors() {
        let state = OptimizerState::default();
        let mut p = vec![1.5, -2.0];
        let g = vec![0.0, 0.0];
        clipped_sgd_step(&mut [&mut p], &[&g], &state).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
        let short = vec![0.0];
        assert!(clipped_sgd_step(&mut [&mut p], &[&short], &state).is_err());
        assert!(clipped_sgd_step(&mut [&mut p], &[], &state).is_err());
        assert!(OptimizerState::new(0.0, 1.0).is_err());
        assert!(OptimizerState::new(0.1, -1.0).is_err());
    }

    #[test]
    fn finite_differences() {
        let r = finite_diff_check(|p| p[0] * p[0], &[3.0], &[6.0], 1e-4, 1e-6);
        assert!(r.passed, "{r:?}");
        let r = finite_diff_check(|p| p[0] * p[0], &[3.0], &[12.0], 1e-4, 1e-6);
        assert!(!r.passed);
        let r = finite_diff_check(|p| p[0] * p[1], &[2.0, 3.0], &[3.0, 2.0], 1e-4, 1e-8);
        assert!((r.numeric[0] - 3.0).abs() < 1e-9);
        assert!((r.numeric[1] - 2.0).abs() < 1e-9);
        assert!(r.passed);
    }

    #[test]
    fn matrix_kernels() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(m.matvec(&[1.0, -1.0]), vec![-1.0, -1.0, -1.0]);
        let mut out = vec![0.0; 2];
        m.t_matvec_acc(&[1.0, 0.0, 1.0], &mut out);
        assert_eq!(out, vec![6.0, 8.0]);
        let mut z = Matrix::zeros(2, 2);
        z.add_outer(&[1.0, 2.0], &[3.0, 4.0], 0.5);
        assert_eq!(z.data(), &[1.5, 2.0, 3.0, 4.0]);
        assert!(Matrix::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lse_shift_invariance(v in prop::collection::vec(-50.0f64..50.0, 1..10), c in -100.0f64..100.0) {
                let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
                let a = log_sum_exp(&shifted).unwrap();
                let b = log_sum_exp(&v).unwrap() + c;
                prop_assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }

            #[test]
            fn lse_bounds(v in prop::collection::vec(-1e6f64..1e6, 1..10)) {
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let l = log_sum_exp(&v).unwrap();
                prop_assert!(l >= max);
                prop_assert!(l <= max + (v.len() as f64).ln() + 1e-9);
            }

            #[test]
            fn clipped_step_never_exceeds_threshold(g in prop::collection::vec(-100.0f64..100.0, 1..8), clip in 0.1f64..10.0) {
                let state = OptimizerState::new(1.0, clip).unwrap();
                let mut p = vec![0.0; g.len()];
                clipped_sgd_step(&mut [&mut p], &[&g], &state).unwrap();
                // with lr = 1 the displacement is the applied gradient
                prop_assert!(l2_norm(&p) <= clip * (1.0 + 1e-12));
            }
        }
    }
}
