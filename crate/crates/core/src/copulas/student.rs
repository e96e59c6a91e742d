use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::{
    check_sample_size, fit_marginals, transform_to_latent, CopulaConfig, CopulaFamily, CopulaModel,
    LatentFamily,
};
use crate::math::optimize::grid_then_golden;
use crate::math::stats::second_moment;
use crate::math::{mvt_logpdf_from_quadratic, SpdMatrix};
use crate::mixture::UnivariateMixture;
use crate::{DataMatrix, Error, Result, RngStream};

/// `-n/2 log|V| - (nu+p)/2 sum_i log(1 + q_i/nu)`, the t log-likelihood of
/// `x` up to a constant.
fn kernel(x: &DataMatrix, v: &SpdMatrix, nu: f64) -> f64 {
    let (n, p) = (x.nrows() as f64, x.ncols() as f64);
    let s: f64 = x.rows().map(|xi| (v.mahalanobis_sq(xi) / nu).ln_1p()).sum();
    -0.5 * n * v.log_det() - 0.5 * (nu + p) * s
}

/// `(1/n) sum_i w_i x_i x_i'` with `w_i = (nu+p) / (nu + x_i' V^{-1} x_i)`.
fn weighted_moment(x: &DataMatrix, v: &SpdMatrix, nu: f64) -> DMatrix<f64> {
    let p = x.ncols();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for xi in x.rows() {
        let w = (nu + p as f64) / (nu + v.mahalanobis_sq(xi));
        for a in 0..p {
            for b in 0..=a {
                m[(a, b)] += w * xi[a] * xi[b];
            }
        }
    }
    m /= x.nrows() as f64;
    for a in 0..p {
        for b in 0..a {
            m[(b, a)] = m[(a, b)];
        }
    }
    m
}

/// Scale matrix of a centred `t_nu` sample, from the method-of-moments start
/// `((nu-2)/nu) mean(x x')`. Each sweep tries the precision update
/// `V^{-1} + (V - mean(w x x'))/2` and falls back to the EM step
/// `V = mean(w x x')` whenever the former loses positive definiteness or
/// lowers the likelihood; both share the same fixed point. Returns the
/// scale and the number of sweeps used.
pub fn t_fixed_point(
    x: &DataMatrix,
    nu: f64,
    max_sweeps: usize,
    tolerance: f64,
) -> Result<(SpdMatrix, usize)> {
    if !(nu > 2.0) {
        return Err(Error::Domain {
            name: "nu",
            value: nu,
            domain: "(2, inf)",
        });
    }
    let start = second_moment(x) * ((nu - 2.0) / nu);
    let trace0 = start.trace();
    let mut v = SpdMatrix::new(start)?;
    let mut current = kernel(x, &v, nu);
    for sweep in 0..max_sweeps {
        let vm = v.matrix();
        let m = weighted_moment(x, &v, nu);
        let precision = v.inverse() + (&vm - &m) * 0.5;
        let printed = precision
            .cholesky()
            .map(|c| c.inverse())
            .and_then(|inv| SpdMatrix::new(inv).ok())
            .map(|cand| {
                let k = kernel(x, &cand, nu);
                (cand, k)
            })
            .filter(|(_, k)| *k >= current);
        let (next, k) = match printed {
            Some(accepted) => accepted,
            None => {
                let em = SpdMatrix::new(m)?;
                let k = kernel(x, &em, nu);
                (em, k)
            }
        };
        let next_m = next.matrix();
        if !(next_m.trace() <= 2.0 * trace0) {
            return Err(Error::Diverged { sweep });
        }
        let delta = (&next_m - &vm).amax();
        v = next;
        current = k;
        if delta < tolerance {
            return Ok((v, sweep + 1));
        }
    }
    log::warn!(
        "t scale fixed point stopped after {max_sweeps} sweeps without meeting the tolerance"
    );
    Ok((v, max_sweeps))
}

/// Profile fit at fixed `nu`: unit-diagonal scale and the log-likelihood of
/// the observed data.
#[derive(Debug, Clone, PartialEq)]
pub struct TProfile {
    pub nu: f64,
    pub scale: SpdMatrix,
    pub log_likelihood: f64,
    pub sweeps: usize,
}

pub fn t_profile(
    data: &DataMatrix,
    marginals: &[UnivariateMixture],
    nu: f64,
    cfg: &CopulaConfig,
) -> Result<TProfile> {
    let latent = transform_to_latent(data, marginals, LatentFamily::StudentT(nu))?;
    let (v, sweeps) = t_fixed_point(&latent.x, nu, cfg.t_max_sweeps, cfg.t_tolerance)?;
    let scale = v.to_correlation();
    let (p, log_det) = (data.ncols(), scale.log_det());
    let log_likelihood = (0..data.nrows())
        .map(|i| {
            mvt_logpdf_from_quadratic(scale.mahalanobis_sq(latent.x.row(i)), p, log_det, nu)
                + latent.row_jacobian(i)
        })
        .sum();
    Ok(TProfile {
        nu,
        scale,
        log_likelihood,
        sweeps,
    })
}

/// t copula with BIC-selected mixture marginals.
pub fn fit_t_copula(
    data: &DataMatrix,
    cfg: &CopulaConfig,
    stream: &RngStream,
) -> Result<CopulaModel> {
    check_sample_size(data)?;
    let marginals = fit_marginals(data, cfg, &stream.child(0))?;
    fit_t_copula_with_marginals(data, marginals, cfg)
}

/// Maximizes the profile likelihood over the `nu` grid, then refines by
/// golden section between the neighbours of the best grid value.
pub fn fit_t_copula_with_marginals(
    data: &DataMatrix,
    marginals: Vec<UnivariateMixture>,
    cfg: &CopulaConfig,
) -> Result<CopulaModel> {
    check_sample_size(data)?;
    if let Some(&nu) = cfg.nu_grid.iter().find(|nu| !(**nu > 2.0)) {
        return Err(Error::Domain {
            name: "nu grid value",
            value: nu,
            domain: "(2, inf)",
        });
    }
    let mut best: Option<TProfile> = None;
    grid_then_golden(
        |nu| match t_profile(data, &marginals, nu, cfg) {
            Ok(profile) => {
                let value = profile.log_likelihood;
                if best.as_ref().is_none_or(|b| value > b.log_likelihood) {
                    best = Some(profile);
                }
                value
            }
            Err(e) => {
                log::warn!("t copula with nu = {nu} skipped: {e}");
                f64::NEG_INFINITY
            }
        },
        &cfg.nu_grid,
        cfg.nu_golden_iterations,
    );
    let best = best.ok_or(Error::NoCandidate)?;
    CopulaModel::new(
        marginals,
        CopulaFamily::StudentT {
            scale: best.scale,
            nu: best.nu,
        },
    )
}

/// Degrees of freedom for reports; values above 30 read "> 30".
pub fn format_nu(nu: f64) -> String {
    if nu > 30.0 {
        String::from("> 30")
    } else {
        alloc::format!("{nu:.2}")
    }
}
