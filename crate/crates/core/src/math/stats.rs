//! Descriptive statistics on samples.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::DataMatrix;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn column_means(data: &DataMatrix) -> DVector<f64> {
    let mut m = DVector::zeros(data.ncols());
    for row in data.rows() {
        for (j, v) in row.iter().enumerate() {
            m[j] += v;
        }
    }
    m / data.nrows() as f64
}

/// Covariance with divisor `n` (maximum likelihood scaling).
pub fn covariance(data: &DataMatrix) -> DMatrix<f64> {
    let p = data.ncols();
    let m = column_means(data);
    let mut c = DMatrix::zeros(p, p);
    for row in data.rows() {
        for a in 0..p {
            let da = row[a] - m[a];
            for b in 0..=a {
                c[(a, b)] += da * (row[b] - m[b]);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            c[(b, a)] = c[(a, b)];
        }
    }
    c / data.nrows() as f64
}

/// Uncentered second-moment matrix `(1/n) sum x x'`.
pub fn second_moment(data: &DataMatrix) -> DMatrix<f64> {
    let p = data.ncols();
    let mut c = DMatrix::zeros(p, p);
    for row in data.rows() {
        for a in 0..p {
            for b in 0..=a {
                c[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            c[(b, a)] = c[(a, b)];
        }
    }
    c / data.nrows() as f64
}

/// Median of the finite entries; the mean of the two middle values for an
/// even count. `None` when nothing is finite.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// One-sample Kolmogorov-Smirnov statistic of `sample` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_62 / (n as f64).sqrt()
}

/// Kendall's tau-a between two equally long samples, O(n^2).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let a = (x[i] - x[j]) * (y[i] - y[j]);
            if a > 0.0 {
                s += 1;
            } else if a < 0.0 {
                s -= 1;
            }
        }
    }
    s as f64 / (n * (n - 1) / 2) as f64
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}
