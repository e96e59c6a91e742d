//! Data-generating processes and the replication harness that fits a set of
//! estimators to fresh training samples and scores them on independent test
//! samples.
//!
//! Replication `r` of an experiment seeded with stream `s` draws everything
//! from `s.child(r)`: training data from its child 0, test data from child 1
//! and all fits from child 2. Replications can therefore run in any order or
//! in parallel.

mod dgp;
mod estimators;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::evaluation::losses;
use crate::{DataMatrix, Density, Error, Result, RngStream, SampleDensity};

pub use dgp::{
    dgp_clayton, dgp_figure1, dgp_mn_plus_uniform, dgp_normal_copula, dgp_scale_mixture,
    three_component_marginal, Dgp, DgpKind, MnPlusUniform, Truth,
};
pub use estimators::{
    fit_estimator, fit_estimators, fit_estimators_with, EstimatorConfig, EstimatorKind, FittedModel,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub dgp: Dgp,
    pub estimators: Vec<EstimatorKind>,
    /// Training sample size.
    pub n: usize,
    /// Test sample size for the loss estimates.
    pub n_test: usize,
    /// Shared settings; the marginals always use `config.copula`.
    pub config: EstimatorConfig,
    /// Per-estimator replacements for `config`, by position. Missing or
    /// `None` entries use `config`.
    pub overrides: Vec<Option<EstimatorConfig>>,
}

impl Experiment {
    pub fn new(dgp: Dgp, estimators: Vec<EstimatorKind>) -> Self {
        Self {
            dgp,
            estimators,
            n: 500,
            n_test: 5000,
            config: EstimatorConfig::default(),
            overrides: Vec::new(),
        }
    }

    /// Settings used for the estimator at position `i`.
    pub fn config_for(&self, i: usize) -> &EstimatorConfig {
        self.overrides
            .get(i)
            .and_then(Option::as_ref)
            .unwrap_or(&self.config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::Domain {
                name: "estimator count",
                value: 0.0,
                domain: "at least one estimator",
            });
        }
        if self.n <= self.dgp.dim() {
            return Err(Error::InsufficientData {
                needed: self.dgp.dim() + 1,
                got: self.n,
            });
        }
        if self.n_test == 0 {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if self.overrides.len() > self.estimators.len() {
            return Err(Error::DimensionMismatch {
                expected: self.estimators.len(),
                got: self.overrides.len(),
            });
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.estimators
            .iter()
            .map(|k| String::from(k.label()))
            .collect()
    }
}

/// What one estimator produced in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    /// `NaN` when the fit failed.
    pub kl: f64,
    pub l2: f64,
    /// Test points where the fitted log density was floored.
    pub floored: usize,
    pub error: Option<String>,
    pub components: Option<usize>,
    pub nu: Option<f64>,
    pub correlation_diagonal: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub index: usize,
    /// One record per estimator, in the experiment's order.
    pub fits: Vec<FitRecord>,
}

pub fn training_sample(exp: &Experiment, index: usize, stream: &RngStream) -> DataMatrix {
    exp.dgp
        .sample(exp.n, &mut stream.child(index as u64).child(0).rng())
}

pub fn test_sample(exp: &Experiment, index: usize, stream: &RngStream) -> DataMatrix {
    exp.dgp
        .sample(exp.n_test, &mut stream.child(index as u64).child(1).rng())
}

pub fn run_replication(
    exp: &Experiment,
    index: usize,
    stream: &RngStream,
) -> Result<ReplicationOutcome> {
    exp.validate()?;
    let train = training_sample(exp, index, stream);
    let test = test_sample(exp, index, stream);
    let configs: Vec<&EstimatorConfig> = (0..exp.estimators.len())
        .map(|i| exp.config_for(i))
        .collect();
    let fits = fit_estimators_with(
        &exp.estimators,
        &configs,
        &exp.config.copula,
        &train,
        &stream.child(index as u64).child(2),
    );
    let fits = fits
        .into_iter()
        .zip(&exp.estimators)
        .map(|(fit, kind)| {
            let scored = fit.and_then(|model| losses(&exp.dgp, &model, &test).map(|l| (model, l)));
            match scored {
                Ok((model, (kl, l2))) => FitRecord {
                    kl: kl.value,
                    l2: l2.value,
                    floored: kl.floored,
                    error: None,
                    components: model.components(),
                    nu: model.nu(),
                    correlation_diagonal: model.correlation_diagonal(),
                },
                Err(e) => {
                    log::warn!("replication {index}: {} failed: {e}", kind.label());
                    FitRecord {
                        kl: f64::NAN,
                        l2: f64::NAN,
                        floored: 0,
                        error: Some(e.to_string()),
                        components: None,
                        nu: None,
                        correlation_diagonal: None,
                    }
                }
            }
        })
        .collect();
    Ok(ReplicationOutcome { index, fits })
}

pub fn run_replications(
    exp: &Experiment,
    replications: usize,
    stream: &RngStream,
) -> Result<Vec<ReplicationOutcome>> {
    (0..replications)
        .map(|r| run_replication(exp, r, stream))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Kl,
    L2,
}

impl Loss {
    pub fn key(&self) -> &'static str {
        match self {
            Self::Kl => "KL",
            Self::L2 => "L2",
        }
    }
}

/// Replications x estimators matrix of one loss, ordered by replication.
pub fn loss_matrix(outcomes: &[ReplicationOutcome], loss: Loss) -> Vec<Vec<f64>> {
    let mut sorted: Vec<&ReplicationOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.index);
    sorted
        .iter()
        .map(|o| {
            o.fits
                .iter()
                .map(|f| match loss {
                    Loss::Kl => f.kl,
                    Loss::L2 => f.l2,
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests;
