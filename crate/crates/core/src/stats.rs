//! Sample statistics used by the estimators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};
use crate::scalar::Real;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub mean: T,
    pub se: T,
    /// Samples that entered the mean.
    pub n: usize,
    /// Samples excluded because their information term diverged.
    pub n_flagged: usize,
}

impl<T: Real> Estimate<T> {
    /// |mean − target| in units of the standard error.
    pub fn z_score(&self, target: T) -> T {
        (self.mean - target).abs() / self.se
    }
}

/// Mean accumulated relative to the first sample, so identical inputs give
/// that value back exactly.
pub fn mean<T: Real>(values: &[T]) -> T {
    let Some(&first) = values.first() else {
        return T::nan();
    };
    let shift = values.iter().fold(T::zero(), |acc, &v| acc + (v - first));
    first + shift / T::from_usize(values.len()).unwrap()
}

/// Mean and analytic standard error s/√n (unbiased variance).
pub fn mean_and_se<T: Real>(values: &[T]) -> Result<(T, T)> {
    let n = values.len();
    if n < 2 {
        return Err(DemonError::InsufficientSamples { needed: 2, got: n });
    }
    let m = mean(values);
    let ss = values.iter().fold(T::zero(), |acc, &v| acc + (v - m) * (v - m));
    let nf = T::from_usize(n).unwrap();
    Ok((m, (ss / (nf - T::one()) / nf).sqrt()))
}

/// [`mean_and_se`] for summaries: fewer than two samples give an undefined
/// (NaN) error instead of failing.
pub fn mean_and_se_or_nan<T: Real>(values: &[T]) -> (T, T) {
    mean_and_se(values).unwrap_or_else(|_| (mean(values), T::nan()))
}

/// Nonparametric bootstrap standard error of the mean from `b` resamples.
pub fn bootstrap_se<T: Real, R: Rng + ?Sized>(values: &[T], b: usize, rng: &mut R) -> Result<T> {
    let n = values.len();
    if n < 2 {
        return Err(DemonError::InsufficientSamples { needed: 2, got: n });
    }
    if b < 100 {
        return Err(DemonError::InsufficientSamples { needed: 100, got: b });
    }
    let nf = T::from_usize(n).unwrap();
    let means: Vec<T> = (0..b)
        .map(|_| {
            let sum = (0..n).fold(T::zero(), |acc, _| acc + values[rng.random_range(0..n)]);
            sum / nf
        })
        .collect();
    let m = mean(&means);
    let ss = means.iter().fold(T::zero(), |acc, &v| acc + (v - m) * (v - m));
    Ok((ss / T::from_usize(b - 1).unwrap()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, BoxMuller};

    #[test]
    fn constant_sample_has_zero_error() {
        let v = vec![1.5f64; 50];
        assert_eq!(mean_and_se(&v).unwrap(), (1.5, 0.0));
        assert_eq!(bootstrap_se(&v, 200, &mut stream(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn two_point_bootstrap() {
        // closed form: sqrt(Σ(x − x̄)²) / n = sqrt(2) / 2
        let analytic = 2f64.sqrt() / 2.0;
        let se = bootstrap_se(&[0.0f64, 2.0], 20_000, &mut stream(1, 0)).unwrap();
        assert!((se / analytic - 1.0).abs() < 0.1, "se={se}");
    }

    #[test]
    fn bootstrap_agrees_with_analytic_on_gaussians() {
        let mut g = BoxMuller::new(stream(2, 0));
        let v: Vec<f64> = (0..10_000).map(|_| g.next_normal()).collect();
        let (_, analytic) = mean_and_se(&v).unwrap();
        let boot = bootstrap_se(&v, 2000, &mut stream(2, 1)).unwrap();
        assert!((boot / analytic - 1.0).abs() < 0.05, "boot={boot} analytic={analytic}");
    }

    #[test]
    fn too_few_samples() {
        assert!(mean_and_se(&[1.0f64]).is_err());
        let (m, se) = mean_and_se_or_nan(&[1.0f64]);
        assert_eq!(m, 1.0);
        assert!(se.is_nan());
        assert!(bootstrap_se(&[1.0f64, 2.0], 10, &mut stream(0, 0)).is_err());
    }
}
