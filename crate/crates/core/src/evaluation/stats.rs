use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CaprError, Result};
use crate::numeric::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest<T> {
    pub t: T,
    pub p: T,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_t_test<T: Real>(a: &[T], b: &[T]) -> Result<TTest<T>> {
    if a.len() != b.len() {
        return Err(CaprError::invalid(format!(
            "paired t-test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(CaprError::invalid("paired t-test needs at least two pairs"));
    }
    let diffs: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let nf = T::from_count(n);
    let mean = diffs.iter().fold(T::zero(), |s, &d| s + d) / nf;
    let ss = diffs.iter().fold(T::zero(), |s, &d| s + (d - mean) * (d - mean));
    let sd = (ss / T::from_count(n - 1)).sqrt();
    if sd.partial_cmp(&T::zero()) != Some(Ordering::Greater) {
        return Ok(if mean == T::zero() {
            TTest { t: T::zero(), p: T::one() }
        } else {
            TTest { t: T::infinity() * mean.signum(), p: T::zero() }
        });
    }
    let t = mean / (sd / nf.sqrt());
    Ok(TTest { t, p: T::lit(two_sided_p(t.as_f64(), (n - 1) as f64)) })
}

/// `2 P(T_df > |t|)` for Student's t.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut out = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && xs[order[end]] == xs[order[start]] {
            end += 1;
        }
        // Tied values share the mean of their 1-based ranks.
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = r;
        }
        start = end;
    }
    out
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either side is constant or lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
