//! Per-sample and batch model mathematics for the quadratically
//! approximated logistic loss.
//!
//! With `u = w . x` the approximate per-sample loss is
//! `log 2 - y*u/2 + u^2/8`, which is polynomial in `u` and therefore
//! computable under additively homomorphic encryption. The residual
//! `d = (u - 2y)/4` is its derivative in `u`, and batch gradients are
//! `X^T d / T`.

use crate::error::ModelError;
use nalgebra::{DMatrix, DVector};

/// Dense feature matrix with one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self, ModelError> {
        for (idx, v) in m.iter().enumerate() {
            if !v.is_finite() {
                // nalgebra iterates column-major
                let row = idx % m.nrows();
                let col = idx / m.nrows();
                return Err(ModelError::NonFiniteFeature { row, col });
            }
        }
        Ok(FeatureMatrix(m))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn inner(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Feature vector of one sample.
    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.0.row(i).transpose()
    }

    /// A new matrix containing only the given sample rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix(DMatrix::from_fn(indices.len(), self.cols(), |r, c| {
            self.0[(indices[r], c)]
        }))
    }
}

/// Labels in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector(DVector<f64>);

impl LabelVector {
    pub fn new(v: DVector<f64>) -> Result<Self, ModelError> {
        for &y in v.iter() {
            if y != 1.0 && y != -1.0 {
                return Err(ModelError::BadLabel(y));
            }
        }
        Ok(LabelVector(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }

    pub fn inner(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn select(&self, indices: &[usize]) -> LabelVector {
        LabelVector(DVector::from_fn(indices.len(), |r, _| self.0[indices[r]]))
    }
}

/// Intermediate value `u[i] = w . x_i` for every local sample row.
pub fn compute_u(w: &DVector<f64>, x: &FeatureMatrix) -> Result<DVector<f64>, ModelError> {
    if w.len() != x.cols() {
        return Err(ModelError::DimensionMismatch { expected: x.cols(), got: w.len() });
    }
    Ok(x.inner() * w)
}

/// Residual `d[i] = (u_total[i] - 2*y_i) / 4`.
pub fn compute_d(u_total: &DVector<f64>, y: &LabelVector) -> Result<DVector<f64>, ModelError> {
    if u_total.len() != y.len() {
        return Err(ModelError::DimensionMismatch { expected: y.len(), got: u_total.len() });
    }
    Ok(DVector::from_fn(u_total.len(), |i, _| (u_total[i] - 2.0 * y.inner()[i]) / 4.0))
}

/// Batch-averaged gradient over the party's local columns:
/// `g = X^T d / T`.
pub fn compute_gradient_slice(
    d: &DVector<f64>,
    x: &FeatureMatrix,
) -> Result<DVector<f64>, ModelError> {
    if d.len() != x.rows() {
        return Err(ModelError::DimensionMismatch { expected: x.rows(), got: d.len() });
    }
    Ok(x.inner().transpose() * d / d.len() as f64)
}

/// Mean quadratic loss with the cross term kept expanded:
/// `log 2 - y*(u_a+u_b)/2 + (u_a^2 + 2*u_a*u_b + u_b^2)/8`.
pub fn taylor_loss(
    u_a: &DVector<f64>,
    u_b: &DVector<f64>,
    y: &LabelVector,
) -> Result<f64, ModelError> {
    if u_a.len() != y.len() {
        return Err(ModelError::DimensionMismatch { expected: y.len(), got: u_a.len() });
    }
    if u_b.len() != y.len() {
        return Err(ModelError::DimensionMismatch { expected: y.len(), got: u_b.len() });
    }
    let t = y.len() as f64;
    let log2 = std::f64::consts::LN_2;
    let mut acc = 0.0;
    for i in 0..y.len() {
        let (ua, ub, yi) = (u_a[i], u_b[i], y.inner()[i]);
        acc += log2 - 0.5 * yi * (ua + ub) + 0.125 * (ua * ua + 2.0 * ua * ub + ub * ub);
    }
    Ok(acc / t)
}

/// Mean exact logistic loss `log(1 + exp(-y*u))`, evaluated in the
/// overflow-safe softplus form.
pub fn exact_loss(u_total: &DVector<f64>, y: &LabelVector) -> Result<f64, ModelError> {
    if u_total.len() != y.len() {
        return Err(ModelError::DimensionMismatch { expected: y.len(), got: u_total.len() });
    }
    let t = y.len() as f64;
    let acc: f64 = (0..y.len()).map(|i| softplus(-y.inner()[i] * u_total[i])).sum();
    Ok(acc / t)
}

/// `log(1 + exp(z))` without overflow for large `|z|`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Predicted labels: `+1` when `u >= threshold`, `-1` otherwise
/// (the tie at the threshold maps to `+1`).
pub fn predict(u_total: &DVector<f64>, threshold: f64) -> Vec<f64> {
    u_total.iter().map(|&u| if u >= threshold { 1.0 } else { -1.0 }).collect()
}

/// Fraction of matching labels.
pub fn accuracy(pred: &[f64], y: &LabelVector) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(y.inner().iter()).filter(|(p, t)| p == t).count();
    hits as f64 / pred.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn labels(v: &[f64]) -> LabelVector {
        LabelVector::new(DVector::from_row_slice(v)).unwrap()
    }

    #[test]
    fn u_is_a_row_by_row_dot_product() {
        let x = FeatureMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0])).unwrap();
        let zero = DVector::zeros(2);
        assert_eq!(compute_u(&zero, &x).unwrap(), DVector::zeros(2));

        // unit vector selects a column
        let e1 = DVector::from_row_slice(&[0.0, 1.0]);
        let u = compute_u(&e1, &x).unwrap();
        assert_eq!(u, DVector::from_row_slice(&[1.0, 3.0]));

        let w = DVector::from_row_slice(&[0.5, -1.0]);
        let u = compute_u(&w, &x).unwrap();
        assert_eq!(u[0], 0.0);

        let wrong = DVector::zeros(3);
        assert!(compute_u(&wrong, &x).is_err());
    }

    #[test]
    fn residual_examples() {
        let y = labels(&[1.0, 1.0, -1.0]);
        let u = DVector::from_row_slice(&[0.6, 2.0, 0.0]);
        let d = compute_d(&u, &y).unwrap();
        assert!((d[0] - (-0.35)).abs() < 1e-15);
        assert_eq!(d[1], 0.0);
        assert_eq!(d[2], 0.5);
    }

    #[test]
    fn gradient_slice_examples() {
        let x = FeatureMatrix::new(DMatrix::from_row_slice(1, 2, &[1.0, 3.0])).unwrap();
        let d = DVector::from_row_slice(&[2.0]);
        let g = compute_gradient_slice(&d, &x).unwrap();
        assert_eq!(g, DVector::from_row_slice(&[2.0, 6.0]));

        let zero_d = DVector::zeros(1);
        assert_eq!(compute_gradient_slice(&zero_d, &x).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn gradient_at_zero_weights_is_label_moment() {
        // at w = 0 the residual is -y/2, so g = -(1/2T) * sum y_i x_i
        let x = FeatureMatrix::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 2.0, -0.5, 1.0, 3.0, -2.0],
        ))
        .unwrap();
        let y = labels(&[1.0, -1.0, 1.0]);
        let d = compute_d(&DVector::zeros(3), &y).unwrap();
        let g = compute_gradient_slice(&d, &x).unwrap();
        let mut want = DVector::zeros(2);
        for i in 0..3 {
            want += x.sample(i) * y.inner()[i];
        }
        want /= -2.0 * 3.0;
        assert!((g - want).norm() < 1e-15);
    }

    #[test]
    fn taylor_loss_fixed_points() {
        let y = labels(&[1.0, -1.0]);
        let zeros = DVector::zeros(2);
        let loss = taylor_loss(&zeros, &zeros, &y).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);

        // u_a + u_b = 2y everywhere: log2 - 1 + 1/2
        let u_a = DVector::from_row_slice(&[1.0, -1.0]);
        let u_b = DVector::from_row_slice(&[1.0, -1.0]);
        let loss = taylor_loss(&u_a, &u_b, &y).unwrap();
        assert!((loss - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-12);

        let y = labels(&[-1.0]);
        let one = DVector::from_row_slice(&[1.0]);
        let loss = taylor_loss(&one, &one, &y).unwrap();
        assert!((loss - (std::f64::consts::LN_2 + 1.5)).abs() < 1e-12);
        assert!((loss - 2.1931).abs() < 1e-4);
    }

    #[test]
    fn exact_loss_fixed_points() {
        let y = labels(&[1.0]);
        let zero = DVector::zeros(1);
        assert!((exact_loss(&zero, &y).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);

        let one = DVector::from_row_slice(&[1.0]);
        let want = (1.0 + (-1.0f64).exp()).ln();
        assert!((exact_loss(&one, &y).unwrap() - want).abs() < 1e-12);
        assert!((exact_loss(&one, &y).unwrap() - 0.3133).abs() < 1e-4);

        // the term vanishes as y*u grows
        let big = DVector::from_row_slice(&[800.0]);
        assert!(exact_loss(&big, &y).unwrap() < 1e-300);
        let y_neg = labels(&[-1.0]);
        assert!(exact_loss(&big, &y_neg).unwrap() > 700.0);
    }

    #[test]
    fn prediction_and_accuracy() {
        let u = DVector::from_row_slice(&[3.2, -0.1]);
        assert_eq!(predict(&u, 0.0), vec![1.0, -1.0]);
        let tie = DVector::from_row_slice(&[0.0]);
        assert_eq!(predict(&tie, 0.0), vec![1.0]);

        let y = labels(&[1.0, -1.0]);
        assert_eq!(accuracy(&[1.0, 1.0], &y), 0.5);
    }

    #[test]
    fn labels_must_be_signs() {
        assert!(LabelVector::new(DVector::from_row_slice(&[1.0, 0.0])).is_err());
        assert!(FeatureMatrix::new(DMatrix::from_row_slice(1, 1, &[f64::NAN])).is_err());
    }

    /// Central finite differences of the mean Taylor loss over the full
    /// feature matrix; the loss is quadratic in `w`, so this oracle is
    /// exact up to rounding.
    fn fd_gradient(w: &DVector<f64>, x: &FeatureMatrix, y: &LabelVector) -> DVector<f64> {
        let h = 1e-5;
        let loss_at = |w: &DVector<f64>| {
            let u = compute_u(w, x).unwrap();
            let zeros = DVector::zeros(u.len());
            taylor_loss(&u, &zeros, y).unwrap()
        };
        DVector::from_fn(w.len(), |j, _| {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            (loss_at(&wp) - loss_at(&wm)) / (2.0 * h)
        })
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for _ in 0..20 {
            let t = rng.gen_range(2..=20);
            let n = rng.gen_range(1..=6);
            let x = FeatureMatrix::new(DMatrix::from_fn(t, n, |_, _| rng.gen_range(-2.0..2.0)))
                .unwrap();
            let y = LabelVector::new(DVector::from_fn(t, |_, _| {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }))
            .unwrap();
            let w = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let u = compute_u(&w, &x).unwrap();
            let d = compute_d(&u, &y).unwrap();
            let g = compute_gradient_slice(&d, &x).unwrap();
            let fd = fd_gradient(&w, &x, &y);
            for j in 0..n {
                let denom = fd[j].abs().max(1e-8);
                assert!(
                    (g[j] - fd[j]).abs() / denom < 1e-5,
                    "coordinate {j}: analytic {} vs fd {}",
                    g[j],
                    fd[j]
                );
            }
        }
    }

    #[test]
    fn split_gradient_equals_concatenated_gradient() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let t = 12;
        let (na, nb) = (4, 3);
        let full = DMatrix::from_fn(t, na + nb, |_, _| rng.gen_range(-1.0..1.0));
        let x_full = FeatureMatrix::new(full.clone()).unwrap();
        let x_a = FeatureMatrix::new(full.columns(0, na).into_owned()).unwrap();
        let x_b = FeatureMatrix::new(full.columns(na, nb).into_owned()).unwrap();
        let y = LabelVector::new(DVector::from_fn(t, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 }))
            .unwrap();
        let w = DVector::from_fn(na + nb, |_, _| rng.gen_range(-1.0..1.0));
        let u = compute_u(&w, &x_full).unwrap();
        let d = compute_d(&u, &y).unwrap();
        let g_full = compute_gradient_slice(&d, &x_full).unwrap();
        let g_a = compute_gradient_slice(&d, &x_a).unwrap();
        let g_b = compute_gradient_slice(&d, &x_b).unwrap();
        for j in 0..na {
            assert_eq!(g_full[j], g_a[j]);
        }
        for j in 0..nb {
            assert_eq!(g_full[na + j], g_b[j]);
        }
    }

    proptest! {
        /// Cubic remainder bound of the quadratic expansion for |u| <= 1/2.
        #[test]
        fn taylor_fidelity_bound(u in -0.5f64..0.5, y_pos in any::<bool>()) {
            let y = labels(&[if y_pos { 1.0 } else { -1.0 }]);
            let uv = DVector::from_row_slice(&[u]);
            let zeros = DVector::zeros(1);
            let t = taylor_loss(&uv, &zeros, &y).unwrap();
            let e = exact_loss(&uv, &y).unwrap();
            prop_assert!((t - e).abs() <= u.abs().powi(3) / 6.0 + 1e-12);
        }

        /// d and g are linear: doubling d doubles g exactly.
        #[test]
        fn gradient_linearity(scale in 1u32..4) {
            let x = FeatureMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 4.0])).unwrap();
            let d = DVector::from_row_slice(&[0.25, -0.75]);
            let g1 = compute_gradient_slice(&d, &x).unwrap();
            let k = 2f64.powi(scale as i32);
            let gk = compute_gradient_slice(&(&d * k), &x).unwrap();
            prop_assert_eq!(gk, g1 * k);
        }
    }
}
