use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::blended_marginal_logpdf;
use crate::math::quadrature::{integrate_2d_adaptive, integrate_adaptive, QuadratureSettings};
use crate::{Error, MarginalizableDensity, Result, UnivariateDensity};

/// Tail mass left outside the integration box in each coordinate.
const TAIL: f64 = 1e-13;

/// Both sides of the decomposition
/// `KL(h, f) - KL(h, p) = log k + sum_i KL(h_i, f_{i,eps})`
/// for the unclamped adapted density `p`, each side computed by quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    /// `KL(h, f) - KL(h, p)`.
    pub kl_gap: f64,
    pub kl_h_f: f64,
    pub kl_h_p: f64,
    pub log_k: f64,
    /// `KL(h_i, f_{i,eps})` for each coordinate.
    pub marginal_kl: Vec<f64>,
}

impl Lemma1Report {
    pub fn rhs(&self) -> f64 {
        self.log_k + self.marginal_kl.iter().sum::<f64>()
    }

    pub fn discrepancy(&self) -> f64 {
        (self.kl_gap - self.rhs()).abs()
    }

    /// Whether adapting moves `f` closer to `h` in KL.
    pub fn adaptation_helps(&self) -> bool {
        self.kl_gap > 0.0
    }
}

/// Lemma 1 diagnostic for a known `h` and base `f` in one or two dimensions.
pub fn lemma1_gap<H, F>(
    h: &H,
    f: &F,
    epsilon: f64,
    settings: &QuadratureSettings,
) -> Result<Lemma1Report>
where
    H: MarginalizableDensity,
    F: MarginalizableDensity,
{
    let p = h.dim();
    if f.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: f.dim(),
        });
    }
    if p == 0 || p > 2 {
        return Err(Error::Unsupported(
            "quadrature diagnostic needs dimension 1 or 2",
        ));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Domain {
            name: "epsilon",
            value: epsilon,
            domain: "(0, 1]",
        });
    }
    let hm: Vec<H::Marginal> = (0..p).map(|i| h.marginal(i)).collect();
    let fm: Vec<F::Marginal> = (0..p).map(|i| f.marginal(i)).collect();
    let ranges = (0..p)
        .map(|i| {
            let lo = hm[i].quantile(TAIL)?.min(fm[i].quantile(TAIL)?);
            let hi = hm[i].isf(TAIL)?.max(fm[i].isf(TAIL)?);
            Ok((lo, hi))
        })
        .collect::<Result<Vec<_>>>()?;
    let log_ratio = |y: &[f64]| -> f64 {
        (0..p)
            .map(|i| hm[i].logpdf(y[i]) - blended_marginal_logpdf(&fm[i], &hm[i], epsilon, y[i]))
            .sum()
    };
    let integrate = |g: &dyn Fn(&[f64]) -> f64| -> Result<f64> {
        if p == 1 {
            integrate_adaptive(|a| g(&[a]), ranges[0].0, ranges[0].1, settings)
        } else {
            integrate_2d_adaptive(|a, b| g(&[a, b]), ranges[0], ranges[1], settings)
        }
    };
    // `w log(w / v)` with the convention `0 log 0 = 0`
    let weighted = |lw: f64, d: f64| {
        let w = lw.exp();
        if w == 0.0 {
            0.0
        } else {
            w * d
        }
    };

    let inv_k = integrate(&|y| (f.logpdf(y) + log_ratio(y)).exp())?;
    let log_k = -inv_k.ln();
    let kl_h_f = integrate(&|y| {
        let lh = h.logpdf(y);
        weighted(lh, lh - f.logpdf(y))
    })?;
    let kl_h_p = integrate(&|y| {
        let lh = h.logpdf(y);
        weighted(lh, lh - (log_k + f.logpdf(y) + log_ratio(y)))
    })?;
    let marginal_kl = (0..p)
        .map(|i| {
            integrate_adaptive(
                |a| {
                    let lh = hm[i].logpdf(a);
                    weighted(lh, lh - blended_marginal_logpdf(&fm[i], &hm[i], epsilon, a))
                },
                ranges[i].0,
                ranges[i].1,
                settings,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Lemma1Report {
        kl_gap: kl_h_f - kl_h_p,
        kl_h_f,
        kl_h_p,
        log_k,
        marginal_kl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::SpdMatrix;
    use crate::mixture::{MixtureOfNormals, UnivariateMixture};
    use nalgebra::DMatrix;

    fn gaussian(mean: Vec<f64>, cov: &[f64]) -> MixtureOfNormals {
        let p = mean.len();
        MixtureOfNormals::gaussian(
            mean,
            SpdMatrix::new(DMatrix::from_row_slice(p, p, cov)).unwrap(),
        )
        .unwrap()
    }

    fn product_of_marginal_31() -> MixtureOfNormals {
        let m = UnivariateMixture::new(
            alloc::vec![0.6, 0.2, 0.2],
            alloc::vec![0.0, -3.0, 3.0],
            alloc::vec![1.0, 3.0, 0.1f64.sqrt()],
        )
        .unwrap();
        let mut weights = Vec::new();
        let mut means = Vec::new();
        let mut covs = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                weights.push(m.weights()[a] * m.weights()[b]);
                means.push(alloc::vec![m.means()[a], m.means()[b]]);
                let (sa, sb) = (m.sds()[a], m.sds()[b]);
                covs.push(
                    SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[sa * sa, 0.0, 0.0, sb * sb]))
                        .unwrap(),
                );
            }
        }
        MixtureOfNormals::new(weights, means, covs, None).unwrap()
    }

    #[test]
    fn identical_densities_give_zero() {
        let f = gaussian(alloc::vec![0.0, 0.0], &[1.0, 0.5, 0.5, 1.0]);
        let r = lemma1_gap(&f, &f, 0.05, &QuadratureSettings::two_dimensional()).unwrap();
        assert!(r.kl_gap.abs() < 1e-6 && r.log_k.abs() < 1e-6);
        assert!(r.marginal_kl.iter().all(|k| k.abs() < 1e-9));
    }

    #[test]
    fn correlated_target_independent_base() {
        let h = gaussian(alloc::vec![0.0, 0.0], &[1.0, 0.6, 0.6, 1.0]);
        let f = gaussian(alloc::vec![0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        let r = lemma1_gap(&h, &f, 0.05, &QuadratureSettings::two_dimensional()).unwrap();
        assert!(r.marginal_kl.iter().all(|k| k.abs() < 1e-9));
        assert!(r.log_k.abs() < 1e-6);
        // with equal marginals the adapted density is f itself
        assert!(r.discrepancy() <= 1e-3, "{r:?}");
        assert!(r.kl_gap.abs() < 1e-6);
    }

    #[test]
    fn non_normal_marginals_against_standard_normal() {
        let h = product_of_marginal_31();
        let f = gaussian(alloc::vec![0.0, 0.0], &[1.0, 0.0, 0.0, 1.0]);
        let r = lemma1_gap(&h, &f, 0.05, &QuadratureSettings::two_dimensional()).unwrap();
        assert!(r.marginal_kl.iter().sum::<f64>() > 0.0);
        assert!(r.discrepancy() <= 1e-3, "{r:?}");
        assert!(r.adaptation_helps());
    }

    #[test]
    fn one_dimensional_identity() {
        let h = gaussian(alloc::vec![0.5], &[1.0]);
        let f = gaussian(alloc::vec![0.0], &[1.0]);
        let r = lemma1_gap(&h, &f, 0.05, &QuadratureSettings::default()).unwrap();
        assert!(r.discrepancy() <= 1e-3, "{r:?}");
        // KL of a unit mean shift by 0.5
        let kl = 0.125;
        assert!((r.kl_h_f - kl).abs() < 1e-8);
    }

    #[test]
    fn rejects_higher_dimensions() {
        let f = gaussian(
            alloc::vec![0.0; 3],
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        assert!(lemma1_gap(&f, &f, 0.05, &QuadratureSettings::default()).is_err());
    }
}
