use alloc::vec::Vec;

use super::{
    check_sample_size, fit_marginals, transform_to_latent, CopulaConfig, CopulaFamily, CopulaModel,
    LatentFamily,
};
use crate::mixture::{bic_select, UnivariateMixture};
use crate::{DataMatrix, Result, RngStream};

/// Mixture-of-normals copula: a BIC-selected joint mixture fitted to the
/// normal scores of the data.
pub fn fit_mn_copula(
    data: &DataMatrix,
    cfg: &CopulaConfig,
    stream: &RngStream,
) -> Result<CopulaModel> {
    check_sample_size(data)?;
    let marginals = fit_marginals(data, cfg, &stream.child(0))?;
    fit_mn_copula_with_marginals(data, marginals, cfg, &stream.child(1))
}

pub fn fit_mn_copula_with_marginals(
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
    let selection = bic_select(&latent.x, None, cfg.max_components, &cfg.sa, stream)?;
    CopulaModel::new(
        marginals,
        CopulaFamily::Mixture {
            joint: selection.model,
        },
    )
}
