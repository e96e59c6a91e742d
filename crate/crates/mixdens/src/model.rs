//! JSON documents for fitted models.
//!
//! Covariances are stored as their lower Cholesky factors, row by row, and
//! every number is written in shortest round-trip form, so reading a
//! document back gives bit-identical parameters.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use mixdens_core::adapted::{ClampCounts, KEstimate, MarginallyAdaptedDensity};
use mixdens_core::copulas::{ArchimedeanFamily, CopulaFamily, CopulaModel};
use mixdens_core::math::SpdMatrix;
use mixdens_core::mixture::{BicEntry, MixtureOfNormals, UnivariateMixture};
use mixdens_core::simulation::FittedModel;
use mixdens_core::Density;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model document: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] mixdens_core::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BicRow {
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub log_likelihood: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

impl From<&BicEntry> for BicRow {
    fn from(e: &BicEntry) -> Self {
        match &e.outcome {
            Ok((ll, bic)) => Self {
                m: e.m,
                log_likelihood: Some(*ll),
                bic: Some(*bic),
                error: None,
            },
            Err(err) => Self {
                m: e.m,
                log_likelihood: None,
                bic: None,
                error: Some(err.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitMetadata {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bic: Option<Vec<BicRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureDoc {
    pub m: usize,
    pub p: usize,
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub cholesky_factors: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit_metadata: Option<FitMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnivariateDoc {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyDoc {
    Normal {
        correlation_cholesky: Vec<Vec<f64>>,
    },
    StudentT {
        scale_cholesky: Vec<Vec<f64>>,
        nu: f64,
    },
    Mixture {
        joint: MixtureDoc,
    },
    Clayton {
        theta: f64,
    },
    Frank {
        theta: f64,
    },
    Gumbel {
        theta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaDoc {
    pub p: usize,
    pub marginals: Vec<UnivariateDoc>,
    pub family: FamilyDoc,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit_metadata: Option<FitMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClampDoc {
    pub low: u64,
    pub high: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptedDoc {
    pub p: usize,
    pub base: MixtureDoc,
    pub marginals: Vec<UnivariateDoc>,
    pub epsilon: f64,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    pub b: Option<Vec<Vec<f64>>>,
    pub log_k: f64,
    pub log_k_std_error: f64,
    pub k_draws: u64,
    pub clamps: ClampDoc,
    pub unreliable: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit_metadata: Option<FitMetadata>,
}

/// A serialized model of any supported kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDocument {
    Mixture(MixtureDoc),
    Copula(CopulaDoc),
    Adapted(AdaptedDoc),
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>, ModelError> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(invalid(format!("{what}: every row needs {ncols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn factor_doc(v: &SpdMatrix) -> Vec<Vec<f64>> {
    matrix_rows(v.factor())
}

fn spd_from_doc(rows: &[Vec<f64>], p: usize, what: &str) -> Result<SpdMatrix, ModelError> {
    if rows.len() != p {
        return Err(invalid(format!(
            "{what}: expected {p} rows, found {}",
            rows.len()
        )));
    }
    Ok(SpdMatrix::from_factor(rows_matrix(rows, p, what)?)?)
}

impl MixtureDoc {
    pub fn from_model(model: &MixtureOfNormals) -> Self {
        Self {
            m: model.components(),
            p: model.dim(),
            k: model.regressors(),
            weights: model.weights().to_vec(),
            means: model.means().to_vec(),
            cholesky_factors: model.covariances().iter().map(factor_doc).collect(),
            b: model.regression().map(matrix_rows),
            fit_metadata: None,
        }
    }

    pub fn to_model(&self) -> Result<MixtureOfNormals, ModelError> {
        let (m, p) = (self.m, self.p);
        if self.weights.len() != m || self.means.len() != m || self.cholesky_factors.len() != m {
            return Err(invalid(format!(
                "mixture: expected {m} weights, means and factors"
            )));
        }
        if self.means.iter().any(|mu| mu.len() != p) {
            return Err(invalid(format!("mixture: every mean needs {p} entries")));
        }
        let covs = self
            .cholesky_factors
            .iter()
            .map(|f| spd_from_doc(f, p, "cholesky factor"))
            .collect::<Result<Vec<_>, _>>()?;
        let b = match &self.b {
            Some(rows) => {
                if rows.len() != self.k {
                    return Err(invalid(format!(
                        "B: expected {} rows, found {}",
                        self.k,
                        rows.len()
                    )));
                }
                Some(rows_matrix(rows, p, "B")?)
            }
            None if self.k > 0 => return Err(invalid("k > 0 but B is missing")),
            None => None,
        };
        Ok(MixtureOfNormals::new(
            self.weights.clone(),
            self.means.clone(),
            covs,
            b,
        )?)
    }
}

impl UnivariateDoc {
    pub fn from_model(m: &UnivariateMixture) -> Self {
        Self {
            weights: m.weights().to_vec(),
            means: m.means().to_vec(),
            sds: m.sds().to_vec(),
        }
    }

    pub fn to_model(&self) -> Result<UnivariateMixture, ModelError> {
        Ok(UnivariateMixture::new(
            self.weights.clone(),
            self.means.clone(),
            self.sds.clone(),
        )?)
    }
}

fn marginals_from_docs(
    docs: &[UnivariateDoc],
    p: usize,
) -> Result<Vec<UnivariateMixture>, ModelError> {
    if docs.len() != p {
        return Err(invalid(format!(
            "expected {p} marginals, found {}",
            docs.len()
        )));
    }
    docs.iter().map(UnivariateDoc::to_model).collect()
}

impl CopulaDoc {
    pub fn from_model(model: &CopulaModel) -> Self {
        let family = match model.family() {
            CopulaFamily::Normal { correlation } => FamilyDoc::Normal {
                correlation_cholesky: factor_doc(correlation),
            },
            CopulaFamily::StudentT { scale, nu } => FamilyDoc::StudentT {
                scale_cholesky: factor_doc(scale),
                nu: *nu,
            },
            CopulaFamily::Mixture { joint } => FamilyDoc::Mixture {
                joint: MixtureDoc::from_model(joint),
            },
            CopulaFamily::Archimedean { family, theta } => match family {
                ArchimedeanFamily::Clayton => FamilyDoc::Clayton { theta: *theta },
                ArchimedeanFamily::Frank => FamilyDoc::Frank { theta: *theta },
                ArchimedeanFamily::Gumbel => FamilyDoc::Gumbel { theta: *theta },
            },
        };
        Self {
            p: model.marginals().len(),
            marginals: model
                .marginals()
                .iter()
                .map(UnivariateDoc::from_model)
                .collect(),
            family,
            fit_metadata: None,
        }
    }

    pub fn to_model(&self) -> Result<CopulaModel, ModelError> {
        let p = self.p;
        let marginals = marginals_from_docs(&self.marginals, p)?;
        let archimedean = |family, theta| CopulaFamily::Archimedean { family, theta };
        let family = match &self.family {
            FamilyDoc::Normal {
                correlation_cholesky,
            } => CopulaFamily::Normal {
                correlation: spd_from_doc(correlation_cholesky, p, "correlation")?,
            },
            FamilyDoc::StudentT { scale_cholesky, nu } => CopulaFamily::StudentT {
                scale: spd_from_doc(scale_cholesky, p, "scale")?,
                nu: *nu,
            },
            FamilyDoc::Mixture { joint } => CopulaFamily::Mixture {
                joint: joint.to_model()?,
            },
            FamilyDoc::Clayton { theta } => archimedean(ArchimedeanFamily::Clayton, *theta),
            FamilyDoc::Frank { theta } => archimedean(ArchimedeanFamily::Frank, *theta),
            FamilyDoc::Gumbel { theta } => archimedean(ArchimedeanFamily::Gumbel, *theta),
        };
        Ok(CopulaModel::new(marginals, family)?)
    }
}

impl AdaptedDoc {
    pub fn from_model(model: &MarginallyAdaptedDensity) -> Self {
        let k = model.k_estimate();
        Self {
            p: model.marginals().len(),
            base: MixtureDoc::from_model(model.base()),
            marginals: model
                .marginals()
                .iter()
                .map(UnivariateDoc::from_model)
                .collect(),
            epsilon: model.epsilon(),
            b: model.regression().map(matrix_rows),
            log_k: k.log_k,
            log_k_std_error: k.std_error,
            k_draws: k.draws,
            clamps: ClampDoc {
                low: k.clamps.low,
                high: k.clamps.high,
                total: k.clamps.total,
            },
            unreliable: k.unreliable,
            fit_metadata: None,
        }
    }

    pub fn to_model(&self) -> Result<MarginallyAdaptedDensity, ModelError> {
        let base = self.base.to_model()?;
        if self.base.p != self.p {
            return Err(invalid("adapted: base dimension differs from p"));
        }
        let marginals = marginals_from_docs(&self.marginals, self.p)?;
        let mut model = MarginallyAdaptedDensity::new(base, marginals, self.epsilon)?;
        if let Some(rows) = &self.b {
            model = model.with_regression(rows_matrix(rows, self.p, "B")?)?;
        }
        model.set_k(KEstimate {
            log_k: self.log_k,
            std_error: self.log_k_std_error,
            draws: self.k_draws,
            clamps: ClampCounts {
                low: self.clamps.low,
                high: self.clamps.high,
                total: self.clamps.total,
            },
            unreliable: self.unreliable,
        });
        Ok(model)
    }
}

impl ModelDocument {
    pub fn from_fitted(model: &FittedModel) -> Self {
        match model {
            FittedModel::Mixture(m) => Self::Mixture(MixtureDoc::from_model(m)),
            FittedModel::Copula(c) => Self::Copula(CopulaDoc::from_model(c)),
            FittedModel::Adapted(a) => Self::Adapted(AdaptedDoc::from_model(a)),
        }
    }

    pub fn to_fitted(&self) -> Result<FittedModel, ModelError> {
        Ok(match self {
            Self::Mixture(d) => FittedModel::Mixture(d.to_model()?),
            Self::Copula(d) => FittedModel::Copula(d.to_model()?),
            Self::Adapted(d) => FittedModel::Adapted(d.to_model()?),
        })
    }

    pub fn metadata_mut(&mut self) -> &mut Option<FitMetadata> {
        match self {
            Self::Mixture(d) => &mut d.fit_metadata,
            Self::Copula(d) => &mut d.fit_metadata,
            Self::Adapted(d) => &mut d.fit_metadata,
        }
    }

    pub fn to_json(&self) -> Result<String, ModelError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }
}
