//! Multivariate normal and t log-densities.

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::spd::SpdMatrix;
use super::special::{ln_gamma, LN_2PI};
use crate::{Error, Result};

fn check_dims(x: &[f64], mu: &[f64], cov: &SpdMatrix) -> Result<()> {
    let p = cov.dim();
    if x.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: x.len(),
        });
    }
    if mu.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: mu.len(),
        });
    }
    Ok(())
}

/// log N(x; mu, cov).
pub fn mvn_logpdf(x: &[f64], mu: &[f64], cov: &SpdMatrix) -> Result<f64> {
    check_dims(x, mu, cov)?;
    let mut d: alloc::vec::Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    cov.whiten_in_place(&mut d);
    let q: f64 = d.iter().map(|v| v * v).sum();
    let p = x.len() as f64;
    Ok(-0.5 * (p * LN_2PI + cov.log_det() + q))
}

/// log t_nu(x; mu, scale). Degrees of freedom must exceed 2.
pub fn mvt_logpdf(x: &[f64], mu: &[f64], scale: &SpdMatrix, nu: f64) -> Result<f64> {
    if !(nu > 2.0) {
        return Err(Error::Domain {
            name: "nu",
            value: nu,
            domain: "(2, inf)",
        });
    }
    check_dims(x, mu, scale)?;
    let mut d: alloc::vec::Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
    scale.whiten_in_place(&mut d);
    let q: f64 = d.iter().map(|v| v * v).sum();
    Ok(mvt_logpdf_from_quadratic(q, x.len(), scale.log_det(), nu))
}

/// t log density given the Mahalanobis quadratic form and log|scale|.
pub(crate) fn mvt_logpdf_from_quadratic(q: f64, p: usize, log_det: f64, nu: f64) -> f64 {
    let p = p as f64;
    ln_gamma(0.5 * (nu + p))
        - ln_gamma(0.5 * nu)
        - 0.5 * p * (nu * core::f64::consts::PI).ln()
        - 0.5 * log_det
        - 0.5 * (nu + p) * (q / nu).ln_1p()
}
