use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// An operator with a forward map and a hand-derived backward map.
///
/// `backward` returns one gradient per input, each shaped like that input.
pub trait DiffOp<T: Scalar> {
    fn forward(&self, inputs: &[Tensor<T>]) -> Result<Tensor<T>>;
    fn backward(&self, inputs: &[Tensor<T>], upstream: &Tensor<T>) -> Result<Vec<Tensor<T>>>;
}

/// Outcome of a finite-difference comparison.
#[derive(Clone, Debug)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// `(input index, flat element index)` of the worst entry.
    pub worst: (usize, usize),
    pub checked: usize,
    pub passed: bool,
}

/// Denominator floor for the relative error, so that entries whose true
/// gradient is ~0 are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Compares `op.backward` with central differences of a random linear
/// projection `⟨w, op.forward(inputs)⟩`.
///
/// The projection weights come from a fixed seed so the check is deterministic.
pub fn finite_diff_check(
    op: &dyn DiffOp<f64>,
    inputs: &[Tensor<f64>],
    step: f64,
    tolerance: f64,
) -> Result<GradReport> {
    if !(step > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be > 0, got {step}")));
    }
    for (i, t) in inputs.iter().enumerate() {
        t.check_finite(&format!("gradcheck input {i}"))?;
    }
    let out = op.forward(inputs)?;
    out.check_finite("gradcheck forward")?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let weights: Vec<f64> = (0..out.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let upstream = Tensor::new(out.shape(), weights.clone())?;
    let analytic = op.backward(inputs, &upstream)?;
    if analytic.len() != inputs.len() {
        return Err(Error::Dimension(format!(
            "backward returned {} gradients for {} inputs",
            analytic.len(),
            inputs.len()
        )));
    }
    let objective = |ins: &[Tensor<f64>]| -> Result<f64> {
        let y = op.forward(ins)?;
        Ok(y.data().iter().zip(&weights).map(|(a, b)| a * b).sum())
    };

    let mut report = GradReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (0, 0),
        checked: 0,
        passed: true,
    };
    let mut probe: Vec<Tensor<f64>> = inputs.to_vec();
    for (ti, grad) in analytic.iter().enumerate() {
        grad.expect_shape(inputs[ti].shape())?;
        grad.check_finite("analytic gradient")?;
        for j in 0..inputs[ti].len() {
            let orig = inputs[ti].data()[j];
            probe[ti].data_mut()[j] = orig + step;
            let plus = objective(&probe)?;
            probe[ti].data_mut()[j] = orig - step;
            let minus = objective(&probe)?;
            probe[ti].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            if !numeric.is_finite() {
                return Err(Error::Numeric(format!("non-finite difference at input {ti}[{j}]")));
            }
            let a = grad.data()[j];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (ti, j);
            }
            report.max_abs_error = report.max_abs_error.max(abs);
            report.checked += 1;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ops::{AffineOp, Conv2dOp, ReluOp};

    struct WrongGrad;
    impl DiffOp<f64> for WrongGrad {
        fn forward(&self, inputs: &[Tensor<f64>]) -> Result<Tensor<f64>> {
            Ok(inputs[0].map(|v| v * v))
        }
        fn backward(&self, inputs: &[Tensor<f64>], up: &Tensor<f64>) -> Result<Vec<Tensor<f64>>> {
            // Missing factor 2.
            let d = inputs[0].data().iter().zip(up.data()).map(|(x, g)| x * g).collect();
            Ok(vec![Tensor::new(inputs[0].shape(), d)?])
        }
    }

    #[test]
    fn detects_wrong_gradient() {
        let x = Tensor::new([3], vec![0.5, -1.0, 2.0]).unwrap();
        let r = finite_diff_check(&WrongGrad, &[x], 1e-5, 1e-4).unwrap();
        assert!(!r.passed);
        assert!(r.max_rel_error > 0.4);
    }

    #[test]
    fn relu_away_from_zero() {
        let x = Tensor::new([6], vec![-2.0, -0.5, 0.3, 1.0, 4.0, -3.0]).unwrap();
        let r = finite_diff_check(&ReluOp, &[x], 1e-5, 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn conv_random_4x4() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rand = |shape: &[usize]| {
            let n: usize = shape.iter().product();
            Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let inputs = [rand(&[1, 2, 4, 4]), rand(&[3, 2, 3, 3]), rand(&[3])];
        let r = finite_diff_check(&Conv2dOp { stride: 1, padding: 1 }, &inputs, 1e-5, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn affine_identity() {
        let x = Tensor::new([2, 2], vec![0.3, -0.2, 1.5, 0.7]).unwrap();
        let w = Tensor::new([2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::new([2], vec![0.0, 0.0]).unwrap();
        let r = finite_diff_check(&AffineOp, &[x, w, b], 1e-5, 1e-8).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn rejects_bad_step_and_nan() {
        let x = Tensor::new([1], vec![1.0]).unwrap();
        assert!(finite_diff_check(&ReluOp, std::slice::from_ref(&x), 0.0, 1e-4).is_err());
        let nan = Tensor::new([1], vec![f64::NAN]).unwrap();
        assert!(matches!(finite_diff_check(&ReluOp, &[nan], 1e-5, 1e-4), Err(Error::Numeric(_))));
    }
}
