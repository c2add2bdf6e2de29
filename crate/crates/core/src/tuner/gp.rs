//! Gaussian-process regression with a Matérn-5/2 kernel.
//!
//! Observations are standardized before fitting; posterior moments are
//! reported in standardized units unless stated otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{CaprError, Result};
use crate::linalg::Cholesky;
use crate::numeric::Real;

const JITTER_START: f64 = 1e-8;
const JITTER_ESCALATIONS: usize = 6;

/// Kernel and noise hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper<T> {
    /// Length-scale in normalized input units.
    pub length_scale: T,
    pub signal_variance: T,
    pub noise_variance: T,
}

impl<T: Real> Default for GpHyper<T> {
    fn default() -> Self {
        Self {
            length_scale: T::lit(0.5),
            signal_variance: T::one(),
            noise_variance: T::lit(1e-6),
        }
    }
}

impl<T: Real> GpHyper<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        if ok(self.length_scale) && ok(self.signal_variance) && self.noise_variance >= T::zero() {
            Ok(())
        } else {
            Err(CaprError::invalid("GP hyperparameters must be positive and finite"))
        }
    }

    /// `σ_f² (1 + √5 r/ℓ + 5r²/(3ℓ²)) exp(−√5 r/ℓ)`.
    pub fn matern52(&self, r: T) -> T {
        let s = T::lit(5.0).sqrt() * r / self.length_scale;
        self.signal_variance * (T::one() + s + s * s / T::lit(3.0)) * (-s).exp()
    }

    pub fn kernel(&self, a: &[T], b: &[T]) -> T {
        self.matern52(distance(a, b))
    }
}

fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// Fitted posterior. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpState<T> {
    hyper: GpHyper<T>,
    points: Vec<Vec<T>>,
    y_mean: T,
    y_scale: T,
    y_standardized: Vec<T>,
    chol: Option<Cholesky<T>>,
    alpha: Vec<T>,
    jitter: T,
}

/// Posterior moments at a query point, standardized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior<T> {
    pub mean: T,
    /// Unclipped variance; may be slightly negative from round-off.
    pub raw_variance: T,
}

impl<T: Real> Posterior<T> {
    pub fn variance(&self) -> T {
        self.raw_variance.max(T::zero())
    }

    pub fn std_dev(&self) -> T {
        self.variance().sqrt()
    }
}

impl<T: Real> GpState<T> {
    /// Fit on `points` (each in `[0, 1]^d`) and raw `values`.
    ///
    /// Values are standardized with the population standard deviation (unit
    /// scale when it is zero). `K + σ_n² I` is factorized, escalating a
    /// diagonal jitter from 1e-8 by factors of ten on failure.
    pub fn fit(points: &[Vec<T>], values: &[T], hyper: GpHyper<T>) -> Result<Self> {
        hyper.validate()?;
        if points.len() != values.len() {
            return Err(CaprError::invalid("GP fit: points and values differ in length"));
        }
        if let Some(d) = points.first().map(Vec::len) {
            if points.iter().any(|p| p.len() != d) {
                return Err(CaprError::invalid("GP fit: ragged input points"));
            }
        }
        let n = points.len();
        if n == 0 {
            return Ok(Self {
                hyper,
                points: Vec::new(),
                y_mean: T::zero(),
                y_scale: T::one(),
                y_standardized: Vec::new(),
                chol: None,
                alpha: Vec::new(),
                jitter: T::zero(),
            });
        }

        let nf = T::from_count(n);
        let y_mean = values.iter().fold(T::zero(), |a, &v| a + v) / nf;
        let var = values.iter().fold(T::zero(), |a, &v| a + (v - y_mean) * (v - y_mean)) / nf;
        let sd = var.sqrt();
        let y_scale = if sd > T::zero() && sd.is_finite() { sd } else { T::one() };
        let y_standardized: Vec<T> = values.iter().map(|&v| (v - y_mean) / y_scale).collect();

        let mut gram = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = hyper.kernel(&points[i], &points[j]);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
            gram[i * n + i] = gram[i * n + i] + hyper.noise_variance;
        }

        let mut jitter = T::zero();
        let mut next = T::lit(JITTER_START);
        let mut escalations = 0;
        let chol = loop {
            let mut a = gram.clone();
            for i in 0..n {
                a[i * n + i] = a[i * n + i] + jitter;
            }
            match Cholesky::factor(&a, n) {
                Ok(c) => break c,
                Err(_) if escalations < JITTER_ESCALATIONS => {
                    jitter = next;
                    next = next * T::lit(10.0);
                    escalations += 1;
                }
                Err(e) => {
                    return Err(CaprError::Numerical(format!(
                        "GP covariance factorization failed after {JITTER_ESCALATIONS} jitter escalations: {e}"
                    )))
                }
            }
        };
        let alpha = chol.solve(&y_standardized);
        Ok(Self {
            hyper,
            points: points.to_vec(),
            y_mean,
            y_scale,
            y_standardized,
            chol: Some(chol),
            alpha,
            jitter,
        })
    }

    pub fn hyper(&self) -> &GpHyper<T> {
        &self.hyper
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Diagonal jitter that was needed for the factorization.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Largest observation in standardized units; `None` with no data.
    pub fn best_standardized(&self) -> Option<T> {
        self.y_standardized.iter().copied().reduce(T::max)
    }

    pub fn standardize(&self, value: T) -> T {
        (value - self.y_mean) / self.y_scale
    }

    pub fn destandardize(&self, value: T) -> T {
        value * self.y_scale + self.y_mean
    }

    /// Latent posterior at `x` in standardized units.
    pub fn posterior(&self, x: &[T]) -> Posterior<T> {
        let prior = self.hyper.signal_variance;
        let Some(chol) = &self.chol else {
            return Posterior {
                mean: T::zero(),
                raw_variance: prior,
            };
        };
        let k_star: Vec<T> = self.points.iter().map(|p| self.hyper.kernel(p, x)).collect();
        let mean = k_star
            .iter()
            .zip(&self.alpha)
            .fold(T::zero(), |a, (&k, &w)| a + k * w);
        let v = chol.solve_lower(&k_star);
        let explained = v.iter().fold(T::zero(), |a, &vi| a + vi * vi);
        Posterior {
            mean,
            raw_variance: prior - explained,
        }
    }

    /// Posterior mean and clipped variance in the units of the observations.
    pub fn predict(&self, x: &[T]) -> (T, T) {
        let p = self.posterior(x);
        (
            self.destandardize(p.mean),
            p.variance() * self.y_scale * self.y_scale,
        )
    }
}
