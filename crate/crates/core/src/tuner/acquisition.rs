use std::cmp::Ordering;

use crate::numeric::{normal_cdf, normal_pdf, Real};

use super::gp::GpState;

/// Default exploration margin, standardized units.
pub const DEFAULT_XI: f64 = 0.01;

/// Expected improvement of a Gaussian belief `N(mu, sigma²)` over `best + xi`.
pub fn expected_improvement<T: Real>(mu: T, sigma: T, best: T, xi: T) -> T {
    let gain = mu - best - xi;
    if sigma.partial_cmp(&T::zero()) != Some(Ordering::Greater) {
        return gain.max(T::zero());
    }
    let z = gain / sigma;
    (gain * normal_cdf(z) + sigma * normal_pdf(z)).max(T::zero())
}

impl<T: Real> GpState<T> {
    /// Expected improvement at `x` over the standardized incumbent `best`.
    pub fn expected_improvement(&self, x: &[T], best: T, xi: T) -> T {
        let p = self.posterior(x);
        expected_improvement(p.mean, p.std_dev(), best, xi)
    }
}
