use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;

use super::{
    check_sample_size, fit_marginals, transform_to_latent, CopulaConfig, CopulaFamily, CopulaModel,
    LatentFamily,
};
use crate::math::stats::covariance;
use crate::math::{floor_eigenvalues, SpdMatrix};
use crate::mixture::{step_size, UnivariateMixture};
use crate::{DataMatrix, Error, Result, RngStream};

/// Unit-diagonal covariance of latent normal scores `x` by stochastic
/// approximation with the quadratic penalty `t * diag(V_ii - 1)`, started
/// from the sample covariance of `x`.
pub fn penalized_correlation<R: Rng + ?Sized>(
    x: &DataMatrix,
    cfg: &CopulaConfig,
    rng: &mut R,
) -> Result<SpdMatrix> {
    let (n, p) = (x.nrows(), x.ncols());
    if cfg.normal_batch_size == 0 || cfg.normal_iterations == 0 {
        return Err(Error::Domain {
            name: "normal copula iterations",
            value: 0.0,
            domain: "positive batch size and iteration count",
        });
    }
    let mut v = covariance(x);
    let mut g = DMatrix::<f64>::zeros(p, p);
    let s = cfg.normal_batch_size as f64;
    for t in 0..cfg.normal_iterations {
        g.fill(0.0);
        for _ in 0..cfg.normal_batch_size {
            let xi = x.row(rng.random_range(0..n));
            for a in 0..p {
                for b in 0..=a {
                    g[(a, b)] += xi[a] * xi[b] - v[(a, b)];
                }
            }
        }
        for a in 0..p {
            g[(a, a)] -= t as f64 * (v[(a, a)] - 1.0);
        }
        let alpha = step_size(cfg.normal_alpha0, t, cfg.normal_c, cfg.normal_tau) / s;
        for a in 0..p {
            for b in 0..=a {
                v[(a, b)] += alpha * g[(a, b)];
                v[(b, a)] = v[(a, b)];
            }
        }
        if v.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFiniteParameter { iteration: t });
        }
    }
    let diagonal: Vec<f64> = (0..p).map(|a| v[(a, a)]).collect();
    if diagonal
        .iter()
        .any(|d| !((d - 1.0).abs() <= super::DIAGONAL_TOLERANCE))
    {
        return Err(Error::ConstraintNotMet { diagonal });
    }
    SpdMatrix::new(floor_eigenvalues(&v, 1e-8))
}

/// Normal copula with BIC-selected mixture marginals.
pub fn fit_normal_copula(
    data: &DataMatrix,
    cfg: &CopulaConfig,
    stream: &RngStream,
) -> Result<CopulaModel> {
    check_sample_size(data)?;
    let marginals = fit_marginals(data, cfg, &stream.child(0))?;
    fit_normal_copula_with_marginals(data, marginals, cfg, &stream.child(1))
}

pub fn fit_normal_copula_with_marginals(
    data: &DataMatrix,
    marginals: Vec<UnivariateMixture>,
    cfg: &CopulaConfig,
    stream: &RngStream,
) -> Result<CopulaModel> {
    check_sample_size(data)?;
    let latent = transform_to_latent(data, &marginals, LatentFamily::Normal)?;
    if latent.clamped > 0 {
        log::warn!("{} latent coordinates were clamped", latent.clamped);
    }
    let correlation = penalized_correlation(&latent.x, cfg, &mut stream.rng())?;
    CopulaModel::new(marginals, CopulaFamily::Normal { correlation })
}
