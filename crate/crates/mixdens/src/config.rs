//! Experiment configuration files.
//!
//! A config is a JSON object; unknown keys are rejected everywhere. Example:
//!
//! ```json
//! {
//!   "experiment": "evaluate",
//!   "seed": 7,
//!   "dgp": { "kind": "normal_copula", "p": 5 },
//!   "n": 500,
//!   "n_test": 5000,
//!   "replications": 10,
//!   "estimators": ["nc", "tc", { "name": "mamn", "epsilon": 0.05 }],
//!   "reference": "tc",
//!   "options": { "sa": { "preset": "extended" } }
//! }
//! ```
//!
//! `options` applies to every estimator and to the shared marginal fits;
//! options given with an estimator override it for that estimator only.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use mixdens_core::adapted::MIN_DRAWS;
use mixdens_core::mixture::SaConfig;
use mixdens_core::simulation::{Dgp, DgpKind, EstimatorConfig, EstimatorKind};
use mixdens_core::Density;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Fit,
    Evaluate,
    Cv,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Fit => "fit",
            Self::Evaluate => "evaluate",
            Self::Cv => "cv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SaPreset {
    Default,
    Extended,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepOptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

/// Stochastic-approximation settings; unset fields keep the preset's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaOptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<SaPreset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<StepOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_dof: Option<f64>,
}

impl SaOptions {
    fn apply(&self, sa: &mut SaConfig) {
        match self.preset {
            Some(SaPreset::Default) => *sa = SaConfig::default(),
            Some(SaPreset::Extended) => *sa = SaConfig::extended(),
            None => {}
        }
        set(&mut sa.batch_size, self.batch_size);
        set(&mut sa.iterations, self.iterations);
        set(&mut sa.c, self.c);
        set(&mut sa.tau, self.tau);
        set(&mut sa.prior_dof, self.prior_dof);
        if let Some(a) = &self.alpha0 {
            set(&mut sa.initial_steps.regression, a.regression);
            set(&mut sa.initial_steps.mean, a.mean);
            set(&mut sa.initial_steps.covariance, a.covariance);
            set(&mut sa.initial_steps.weight, a.weight);
        }
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorOptions {
    /// Largest component count tried by BIC, for every mixture fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_components: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Importance-sampling draws for the adapted normalizing constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sa: Option<SaOptions>,
}

impl EstimatorOptions {
    fn apply(&self, cfg: &mut EstimatorConfig) {
        if let Some(m) = self.max_components {
            cfg.copula.max_components = m;
            cfg.adapted.max_components = m;
        }
        if let Some(grid) = &self.nu_grid {
            cfg.copula.nu_grid = grid.clone();
        }
        set(&mut cfg.adapted.epsilon, self.epsilon);
        set(&mut cfg.adapted.draws, self.draws);
        set(&mut cfg.adapted.chunk_size, self.chunk_size);
        if let Some(sa) = &self.sa {
            sa.apply(&mut cfg.copula.sa);
            sa.apply(&mut cfg.adapted.sa);
        }
    }
}

/// An estimator name with optional per-estimator options. In a config it is
/// either a bare name or an object with a `name` key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub struct EstimatorEntry {
    pub name: String,
    pub options: EstimatorOptions,
}

impl TryFrom<serde_json::Value> for EstimatorEntry {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, String> {
        match v {
            serde_json::Value::String(name) => Ok(Self {
                name,
                options: EstimatorOptions::default(),
            }),
            serde_json::Value::Object(mut map) => {
                let name = match map.remove("name") {
                    Some(serde_json::Value::String(s)) => s,
                    _ => return Err("estimator objects need a string \"name\"".into()),
                };
                let options = serde_json::from_value(serde_json::Value::Object(map))
                    .map_err(|e| format!("estimator '{name}': {e}"))?;
                Ok(Self { name, options })
            }
            _ => Err("an estimator is a name or an object with a \"name\" key".into()),
        }
    }
}

impl From<EstimatorEntry> for serde_json::Value {
    fn from(e: EstimatorEntry) -> Self {
        let mut v = serde_json::to_value(&e.options).expect("options serialize");
        let map = v.as_object_mut().expect("options are an object");
        if map.is_empty() {
            return serde_json::Value::String(e.name);
        }
        map.insert("name".into(), serde_json::Value::String(e.name));
        v
    }
}

impl EstimatorEntry {
    pub fn kind(&self) -> Result<EstimatorKind, ConfigError> {
        EstimatorKind::parse(&self.name).ok_or_else(|| {
            let valid: Vec<&str> = EstimatorKind::ALL.iter().map(|k| k.key()).collect();
            invalid(format!(
                "unknown estimator '{}'; valid names: {}",
                self.name,
                valid.join(", ")
            ))
        })
    }
}

/// Name of the pair of bivariate illustration designs.
pub const FIGURE1: &str = "figure1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    /// One of the design keys or `figure1`.
    pub kind: String,
    /// Dimension; 5 by default, 2 for the bivariate designs.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<usize>,
    /// Clayton parameter, 5 by default.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<f64>,
}

impl DgpConfig {
    pub fn is_figure1(&self) -> bool {
        self.kind == FIGURE1
    }

    pub fn dgp_kind(&self) -> Result<DgpKind, ConfigError> {
        DgpKind::parse(&self.kind).ok_or_else(|| {
            let valid: Vec<&str> = DgpKind::ALL.iter().map(|k| k.key()).collect();
            invalid(format!(
                "unknown dgp kind '{}'; valid kinds: {}, {FIGURE1}",
                self.kind,
                valid.join(", ")
            ))
        })
    }

    pub fn dimension(&self) -> usize {
        let bivariate = self.is_figure1() || self.dgp_kind().is_ok_and(|k| k.is_bivariate());
        self.p.unwrap_or(if bivariate { 2 } else { 5 })
    }

    pub fn build(&self) -> Result<Dgp, ConfigError> {
        if self.is_figure1() {
            return Err(invalid("figure1 is only available to simulate"));
        }
        if self.theta.is_some() && self.kind != "clayton" {
            return Err(invalid("theta applies to the clayton dgp only"));
        }
        Dgp::new(self.dgp_kind()?, self.dimension(), self.theta)
            .map_err(|e| invalid(format!("dgp: {e}")))
    }
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_N: usize = 500;
pub const DEFAULT_N_TEST: usize = 5000;
pub const DEFAULT_REPLICATIONS: usize = 50;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// When present it must match the subcommand.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dgp: Option<DgpConfig>,
    /// Input CSV for `fit` and `cv`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<PathBuf>,
    /// Columns of the input used as regressors.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub regressors: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub estimators: Vec<EstimatorEntry>,
    /// Reference estimator of the loss ratios; the first estimator by default.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_test: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub folds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "is_default", default)]
    pub options: EstimatorOptions,
}

fn is_default(o: &EstimatorOptions) -> bool {
    *o == EstimatorOptions::default()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(DEFAULT_N)
    }

    pub fn replications(&self) -> usize {
        self.replications.unwrap_or(DEFAULT_REPLICATIONS)
    }

    pub fn folds(&self) -> usize {
        self.folds.unwrap_or(DEFAULT_FOLDS)
    }

    /// Shared settings: defaults with `options` applied. The shared
    /// marginals use its copula part.
    pub fn base_config(&self) -> EstimatorConfig {
        let mut cfg = EstimatorConfig::default();
        self.options.apply(&mut cfg);
        cfg
    }

    /// Settings of one estimator: the shared settings with its own options.
    pub fn estimator_config(&self, entry: &EstimatorEntry) -> EstimatorConfig {
        let mut cfg = self.base_config();
        entry.options.apply(&mut cfg);
        cfg
    }

    pub fn kinds(&self) -> Result<Vec<EstimatorKind>, ConfigError> {
        self.estimators.iter().map(EstimatorEntry::kind).collect()
    }

    /// Position of the reference estimator.
    pub fn reference_index(&self) -> Result<usize, ConfigError> {
        match &self.reference {
            None => Ok(0),
            Some(r) => self
                .estimators
                .iter()
                .position(|e| &e.name == r)
                .ok_or_else(|| {
                    invalid(format!(
                        "reference '{r}' is not among the estimators ({})",
                        self.estimators
                            .iter()
                            .map(|e| e.name.as_str())
                            .collect::<Vec<_>>()
                            .join(", ")
                    ))
                }),
        }
    }

    /// Checks everything that can be checked without reading data.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), ConfigError> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(invalid(format!(
                    "config is for '{}' but the subcommand is '{}'",
                    k.name(),
                    kind.name()
                )));
            }
        }
        let kinds = self.kinds()?;
        validate_options(&self.options, "options")?;
        for e in &self.estimators {
            validate_options(&e.options, &e.name)?;
        }
        if self.n == Some(0) {
            return Err(invalid("n must be at least 1"));
        }
        match kind {
            ExperimentKind::Simulate => {
                let dgp = self
                    .dgp
                    .as_ref()
                    .ok_or_else(|| invalid("simulate needs a dgp"))?;
                if !dgp.is_figure1() {
                    dgp.build()?;
                }
            }
            ExperimentKind::Fit => {
                if self.input.is_none() {
                    return Err(invalid("fit needs an input CSV"));
                }
                if kinds.len() != 1 {
                    return Err(invalid(format!(
                        "fit takes exactly one estimator, got {}",
                        kinds.len()
                    )));
                }
                if !self.regressors.is_empty() && !kinds[0].supports_regressors() {
                    return Err(invalid(format!(
                        "estimator '{}' takes no regressors (only mn and mamn do)",
                        kinds[0].key()
                    )));
                }
            }
            ExperimentKind::Evaluate => {
                let dgp = self
                    .dgp
                    .as_ref()
                    .ok_or_else(|| invalid("evaluate needs a dgp"))?
                    .build()?;
                if kinds.len() < 2 {
                    return Err(invalid("evaluate needs at least two estimators"));
                }
                self.reference_index()?;
                let reps = self.replications();
                if reps < mixdens_core::evaluation::MIN_REPLICATIONS {
                    return Err(invalid(format!(
                        "evaluate needs at least {} replications, got {reps}",
                        mixdens_core::evaluation::MIN_REPLICATIONS
                    )));
                }
                if self.n() <= dgp.dim() {
                    return Err(invalid(format!(
                        "n must exceed the dimension {}",
                        dgp.dim()
                    )));
                }
                if self.n_test == Some(0) {
                    return Err(invalid("n_test must be at least 1"));
                }
                if !self.regressors.is_empty() || self.input.is_some() {
                    return Err(invalid(
                        "evaluate draws its data from the dgp; drop input and regressors",
                    ));
                }
            }
            ExperimentKind::Cv => {
                if kinds.is_empty() {
                    return Err(invalid("cv needs at least one estimator"));
                }
                match (&self.input, &self.dgp) {
                    (Some(_), Some(_)) | (None, None) => {
                        return Err(invalid("cv needs exactly one of input and dgp"));
                    }
                    (None, Some(dgp)) => {
                        dgp.build()?;
                        self.check_folds(self.n())?;
                    }
                    (Some(_), None) => {}
                }
                if self.folds() < 2 {
                    return Err(invalid("folds must be at least 2"));
                }
                if !self.regressors.is_empty() {
                    if let Some(k) = kinds.iter().find(|k| !k.supports_regressors()) {
                        return Err(invalid(format!(
                            "estimator '{}' takes no regressors (only mn and mamn do)",
                            k.key()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_folds(&self, n: usize) -> Result<(), ConfigError> {
        if self.folds() > n {
            return Err(invalid(format!(
                "folds ({}) exceed the number of observations ({n})",
                self.folds()
            )));
        }
        Ok(())
    }
}

fn validate_options(o: &EstimatorOptions, whose: &str) -> Result<(), ConfigError> {
    let bad = |msg: String| invalid(format!("{whose}: {msg}"));
    if o.max_components == Some(0) {
        return Err(bad("max_components must be at least 1".into()));
    }
    if let Some(grid) = &o.nu_grid {
        if grid.is_empty() || grid.iter().any(|nu| !(*nu > 2.0 && nu.is_finite())) {
            return Err(bad("nu_grid needs finite values above 2".into()));
        }
    }
    if let Some(eps) = o.epsilon {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(bad(format!("epsilon = {eps} is outside (0, 1]")));
        }
    }
    if let Some(d) = o.draws {
        if d < MIN_DRAWS {
            return Err(bad(format!("draws must be at least {MIN_DRAWS}")));
        }
    }
    if o.chunk_size == Some(0) {
        return Err(bad("chunk_size must be positive".into()));
    }
    if let Some(sa) = &o.sa {
        let mut cfg = SaConfig::default();
        sa.apply(&mut cfg);
        cfg.validate().map_err(|e| bad(format!("sa: {e}")))?;
    }
    Ok(())
}
