use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::math::special::{normal_cdf, normal_logpdf, normal_quantile};
use crate::math::{find_root_newton, logsumexp};
use crate::{Error, Result, UnivariateDensity};

/// Univariate mixture of normals `sum_j pi_j N(mu_j, sigma_j^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl UnivariateMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        let m = weights.len();
        if m == 0 || means.len() != m || sds.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m.max(1),
                got: if means.len() != m {
                    means.len()
                } else {
                    sds.len()
                },
            });
        }
        if let Some(&s) = sds.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Domain {
                name: "standard deviation",
                value: s,
                domain: "(0, inf)",
            });
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain {
                name: "sum of weights",
                value: total,
                domain: "non-negative weights summing to 1",
            });
        }
        Ok(Self {
            weights,
            means,
            sds,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((&w, &m), &s)| (w, m, s))
    }

    /// `Phi^{-1}(H(y))`, evaluated from whichever tail keeps precision.
    pub fn to_normal_score(&self, y: f64) -> f64 {
        let u = self.cdf(y);
        let score = if u <= 0.5 {
            normal_quantile(u)
        } else {
            normal_quantile(self.sf(y)).map(|v| -v)
        };
        match score {
            Ok(v) => v,
            Err(_) if u <= 0.5 => f64::NEG_INFINITY,
            Err(_) => f64::INFINITY,
        }
    }

    /// `(H(y), h(y))`.
    pub fn cdf_pdf(&self, y: f64) -> (f64, f64) {
        let mut c = 0.0;
        let mut d = 0.0;
        for (w, m, s) in self.components() {
            let z = (y - m) / s;
            c += w * normal_cdf(z);
            d += w * normal_logpdf(z).exp() / s;
        }
        (c, d)
    }

    /// Bracket for the quantile at level `u`: the smallest component quantile
    /// at `u/2` and the largest at `(1+u)/2`, each component's cdf being at
    /// most `u/2` below the bracket and at least `(1+u)/2` above it.
    fn quantile_bracket(&self, u: f64) -> Result<(f64, f64)> {
        let zl = normal_quantile(0.5 * u)?;
        let zh = -normal_quantile(0.5 * (1.0 - u))?;
        Ok(self.spread_bracket(zl, zh))
    }

    /// Same bracket for upper-tail level `s = 1 - u`.
    fn quantile_bracket_upper(&self, s: f64) -> Result<(f64, f64)> {
        let zl = normal_quantile(0.5 * (1.0 - s))?;
        let zh = -normal_quantile(0.5 * s)?;
        Ok(self.spread_bracket(zl, zh))
    }

    fn spread_bracket(&self, zl: f64, zh: f64) -> (f64, f64) {
        let lo = self
            .components()
            .map(|(_, m, s)| m + s * zl)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .components()
            .map(|(_, m, s)| m + s * zh)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

impl UnivariateDensity for UnivariateMixture {
    fn logpdf(&self, y: f64) -> f64 {
        let mut terms = [0.0f64; 16];
        if self.weights.len() <= terms.len() {
            for (t, (w, m, s)) in terms.iter_mut().zip(self.components()) {
                *t = w.ln() + normal_logpdf((y - m) / s) - s.ln();
            }
            logsumexp(&terms[..self.weights.len()])
        } else {
            let terms: Vec<f64> = self
                .components()
                .map(|(w, m, s)| w.ln() + normal_logpdf((y - m) / s) - s.ln())
                .collect();
            logsumexp(&terms)
        }
    }

    fn cdf(&self, y: f64) -> f64 {
        self.components()
            .map(|(w, m, s)| w * normal_cdf((y - m) / s))
            .sum()
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain {
                name: "u",
                value: u,
                domain: "(0, 1)",
            });
        }
        if self.weights.len() == 1 {
            return Ok(self.means[0] + self.sds[0] * normal_quantile(u)?);
        }
        if u > 0.5 {
            return self.isf(1.0 - u);
        }
        let bracket = self.quantile_bracket(u)?;
        find_root_newton(|y| self.cdf_pdf(y), u, bracket)
    }

    fn sf(&self, y: f64) -> f64 {
        self.components()
            .map(|(w, m, s)| w * normal_cdf((m - y) / s))
            .sum()
    }

    /// Solved on the upper tail so levels near one keep their precision.
    fn isf(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain {
                name: "s",
                value: s,
                domain: "(0, 1)",
            });
        }
        if self.weights.len() == 1 {
            return Ok(self.means[0] - self.sds[0] * normal_quantile(s)?);
        }
        let (lo, hi) = self.quantile_bracket_upper(s)?;
        find_root_newton(
            |y| {
                let (_, d) = self.cdf_pdf(y);
                (-self.sf(y), d)
            },
            -s,
            (lo, hi),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::special::normal_cdf;
    use proptest::prelude::*;

    fn marginal_31() -> UnivariateMixture {
        UnivariateMixture::new(
            alloc::vec![0.6, 0.2, 0.2],
            alloc::vec![0.0, -3.0, 3.0],
            alloc::vec![1.0, 3.0, 0.1f64.sqrt()],
        )
        .unwrap()
    }

    #[test]
    fn single_component_is_normal() {
        let m =
            UnivariateMixture::new(alloc::vec![1.0], alloc::vec![1.0], alloc::vec![2.0]).unwrap();
        assert!((m.cdf(3.0) - normal_cdf(1.0)).abs() < 1e-15);
        assert!((m.quantile(normal_cdf(1.0)).unwrap() - 3.0).abs() < 1e-9);
        assert!((m.logpdf(3.0) - (normal_logpdf(1.0) - 2.0f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn symmetric_median() {
        let m = UnivariateMixture::new(
            alloc::vec![0.5, 0.5],
            alloc::vec![-4.0, 6.0],
            alloc::vec![1.0, 1.0],
        )
        .unwrap();
        assert!((m.quantile(0.5).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cdf_term_by_term() {
        // 0.6 * 0.5 + 0.2 * Phi(1) + 0.2 * Phi(-3 / sqrt(0.1))
        let expected = 0.3 + 0.2 * 0.841_344_746_068_542_9 + 0.2 * normal_cdf(-3.0 / 0.1f64.sqrt());
        assert!((marginal_31().cdf(0.0) - expected).abs() < 1e-15);
        assert!((marginal_31().cdf(0.0) - 0.468_268).abs() < 1e-6);
    }

    #[test]
    fn normal_score_tails() {
        let m = marginal_31();
        for y in [-40.0, -5.0, 0.0, 3.2, 8.0, 25.0] {
            let s = m.to_normal_score(y);
            assert!(s.is_finite(), "y = {y}");
            let u = normal_cdf(s);
            if u < 0.5 {
                assert!(((u - m.cdf(y)) / m.cdf(y)).abs() < 1e-9);
            } else {
                let sf = normal_cdf(-s);
                assert!(((sf - m.sf(y)) / m.sf(y)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn quantile_rejects_endpoints() {
        assert!(marginal_31().quantile(0.0).is_err());
        assert!(marginal_31().quantile(1.0).is_err());
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf(y in -12.0f64..12.0) {
            let m = marginal_31();
            let u = m.cdf(y);
            prop_assume!(u > 1e-300 && m.sf(y) > 1e-300);
            let back = m.quantile(u).unwrap();
            prop_assert!((back - y).abs() < 1e-8, "y = {}, back = {}", y, back);
        }

        #[test]
        fn cdf_increasing(a in -10.0f64..10.0, d in 1e-3f64..5.0) {
            let m = marginal_31();
            prop_assert!(m.cdf(a + d) > m.cdf(a) || m.sf(a + d) < m.sf(a));
        }
    }
}
