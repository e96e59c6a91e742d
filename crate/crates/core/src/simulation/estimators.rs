use alloc::string::String;
use alloc::vec::Vec;

use crate::adapted::{fit_mamn, fit_mamn_with_marginals, AdaptedConfig, MarginallyAdaptedDensity};
use crate::copulas::{
    fit_archimedean_copula_with_marginals, fit_marginals, fit_mn_copula_with_marginals,
    fit_normal_copula_with_marginals, fit_t_copula_with_marginals, ArchimedeanFamily, CopulaConfig,
    CopulaFamily, CopulaModel,
};
use crate::evaluation::PredictiveDensity;
use crate::mixture::{bic_select, MixtureOfNormals, UnivariateMixture};
use crate::{DataMatrix, Density, Error, Result, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Nc,
    Tc,
    Mnc,
    Clayton,
    Frank,
    Gumbel,
    Mn,
    Mamn,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 8] = [
        Self::Nc,
        Self::Tc,
        Self::Mnc,
        Self::Clayton,
        Self::Frank,
        Self::Gumbel,
        Self::Mn,
        Self::Mamn,
    ];

    /// Lower-case name used in configs.
    pub fn key(&self) -> &'static str {
        match self {
            Self::Nc => "nc",
            Self::Tc => "tc",
            Self::Mnc => "mnc",
            Self::Clayton => "clayton",
            Self::Frank => "frank",
            Self::Gumbel => "gumbel",
            Self::Mn => "mn",
            Self::Mamn => "mamn",
        }
    }

    /// Column label used in reports.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Nc => "NC",
            Self::Tc => "tC",
            Self::Mnc => "MNC",
            Self::Clayton => "Clayton",
            Self::Frank => "Frank",
            Self::Gumbel => "Gumbel",
            Self::Mn => "MN",
            Self::Mamn => "MAMN",
        }
    }

    pub fn parse(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }

    /// Whether the estimator is built on the per-coordinate mixture marginals.
    pub fn uses_marginals(&self) -> bool {
        !matches!(self, Self::Mn)
    }

    pub fn supports_regressors(&self) -> bool {
        matches!(self, Self::Mn | Self::Mamn)
    }

    /// Stream this estimator fits on within a fit seeded by `stream`.
    pub fn own_stream(&self, stream: &RngStream) -> RngStream {
        stream.child(1 + *self as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimatorConfig {
    /// Marginals and all copula fits.
    pub copula: CopulaConfig,
    /// The MAMN fit; its `sa` and `max_components` also drive MN.
    pub adapted: AdaptedConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Mixture(MixtureOfNormals),
    Copula(CopulaModel),
    Adapted(MarginallyAdaptedDensity),
}

impl FittedModel {
    /// Components of the joint mixture, where there is one.
    pub fn components(&self) -> Option<usize> {
        match self {
            Self::Mixture(m) => Some(m.components()),
            Self::Copula(c) => match c.family() {
                CopulaFamily::Mixture { joint } => Some(joint.components()),
                _ => None,
            },
            Self::Adapted(a) => Some(a.base().components()),
        }
    }

    /// Degrees of freedom of a t copula.
    pub fn nu(&self) -> Option<f64> {
        match self {
            Self::Copula(c) => match c.family() {
                CopulaFamily::StudentT { nu, .. } => Some(*nu),
                _ => None,
            },
            _ => None,
        }
    }

    /// Diagonal of a normal-copula correlation matrix.
    pub fn correlation_diagonal(&self) -> Option<Vec<f64>> {
        match self {
            Self::Copula(c) => match c.family() {
                CopulaFamily::Normal { correlation } => Some(correlation.diagonal()),
                _ => None,
            },
            _ => None,
        }
    }
}

impl Density for FittedModel {
    fn dim(&self) -> usize {
        match self {
            Self::Mixture(m) => m.dim(),
            Self::Copula(c) => c.dim(),
            Self::Adapted(a) => a.dim(),
        }
    }

    fn logpdf(&self, y: &[f64]) -> f64 {
        match self {
            Self::Mixture(m) => m.logpdf(y),
            Self::Copula(c) => c.logpdf(y),
            Self::Adapted(a) => a.logpdf(y),
        }
    }
}

impl PredictiveDensity for FittedModel {
    fn log_predictive(&self, y: &[f64], z: Option<&[f64]>) -> Result<f64> {
        match self {
            Self::Mixture(m) => m.log_predictive(y, z),
            Self::Copula(c) => c.log_predictive(y, z),
            Self::Adapted(a) => a.log_predictive(y, z),
        }
    }

    fn complexity(&self) -> Option<String> {
        match self {
            Self::Mixture(m) => m.complexity(),
            Self::Copula(c) => c.complexity(),
            Self::Adapted(a) => a.complexity(),
        }
    }

    fn components(&self) -> Option<usize> {
        FittedModel::components(self)
    }

    fn nu(&self) -> Option<f64> {
        FittedModel::nu(self)
    }
}

/// Fits one estimator. `marginals` are reused by the marginal-based
/// estimators when given; otherwise they are fitted on `stream.child(0)`.
pub fn fit_estimator(
    kind: EstimatorKind,
    data: &DataMatrix,
    z: Option<&DataMatrix>,
    marginals: Option<&[UnivariateMixture]>,
    cfg: &EstimatorConfig,
    stream: &RngStream,
) -> Result<FittedModel> {
    if z.is_some() && !kind.supports_regressors() {
        return Err(Error::Unsupported("this estimator takes no regressors"));
    }
    let own = kind.own_stream(stream);
    match kind {
        EstimatorKind::Mn => {
            let sel = bic_select(data, z, cfg.adapted.max_components, &cfg.adapted.sa, &own)?;
            return Ok(FittedModel::Mixture(sel.model));
        }
        EstimatorKind::Mamn if z.is_some() => {
            return Ok(FittedModel::Adapted(fit_mamn(data, z, &cfg.adapted, &own)?))
        }
        _ => {}
    }
    let marginals = match marginals {
        Some(m) => m.to_vec(),
        None => fit_marginals(data, &cfg.copula, &stream.child(0))?,
    };
    let copula = match kind {
        EstimatorKind::Nc => fit_normal_copula_with_marginals(data, marginals, &cfg.copula, &own)?,
        EstimatorKind::Tc => fit_t_copula_with_marginals(data, marginals, &cfg.copula)?,
        EstimatorKind::Mnc => fit_mn_copula_with_marginals(data, marginals, &cfg.copula, &own)?,
        EstimatorKind::Clayton => {
            fit_archimedean_copula_with_marginals(ArchimedeanFamily::Clayton, data, marginals)?
        }
        EstimatorKind::Frank => {
            fit_archimedean_copula_with_marginals(ArchimedeanFamily::Frank, data, marginals)?
        }
        EstimatorKind::Gumbel => {
            fit_archimedean_copula_with_marginals(ArchimedeanFamily::Gumbel, data, marginals)?
        }
        EstimatorKind::Mamn => {
            return Ok(FittedModel::Adapted(fit_mamn_with_marginals(
                data,
                marginals,
                &cfg.adapted,
                &own,
            )?))
        }
        EstimatorKind::Mn => unreachable!(),
    };
    Ok(FittedModel::Copula(copula))
}

/// Fits every estimator in `kinds` on the same data. The marginals are
/// fitted once on `stream.child(0)` and shared; each estimator draws from
/// its own child stream, so results do not depend on the order of `kinds`.
pub fn fit_estimators(
    kinds: &[EstimatorKind],
    data: &DataMatrix,
    cfg: &EstimatorConfig,
    stream: &RngStream,
) -> Vec<Result<FittedModel>> {
    let configs: Vec<&EstimatorConfig> = kinds.iter().map(|_| cfg).collect();
    fit_estimators_with(kinds, &configs, &cfg.copula, data, stream)
}

/// [`fit_estimators`] with one configuration per estimator. The shared
/// marginals are fitted with `marginal_cfg`.
pub fn fit_estimators_with(
    kinds: &[EstimatorKind],
    configs: &[&EstimatorConfig],
    marginal_cfg: &CopulaConfig,
    data: &DataMatrix,
    stream: &RngStream,
) -> Vec<Result<FittedModel>> {
    assert_eq!(
        kinds.len(),
        configs.len(),
        "one configuration per estimator"
    );
    let marginals = if kinds.iter().any(|k| k.uses_marginals()) {
        Some(fit_marginals(data, marginal_cfg, &stream.child(0)))
    } else {
        None
    };
    kinds
        .iter()
        .zip(configs)
        .map(|(&kind, cfg)| match (&marginals, kind.uses_marginals()) {
            (Some(Err(e)), true) => Err(e.clone()),
            (Some(Ok(m)), true) => fit_estimator(kind, data, None, Some(m), cfg, stream),
            _ => fit_estimator(kind, data, None, None, cfg, stream),
        })
        .collect()
}
