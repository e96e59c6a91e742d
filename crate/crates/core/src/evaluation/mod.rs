//! Loss estimators, median log-ratio tables and cross-validated log
//! predictive scores.

mod wilcoxon;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::SliceRandom;

use crate::adapted::MarginallyAdaptedDensity;
use crate::copulas::{CopulaFamily, CopulaModel};
use crate::mixture::MixtureOfNormals;
use crate::{DataMatrix, Density, Error, Result, RngStream};

pub use wilcoxon::{signed_rank_test, SignedRankTest};

/// Log density used in place of a non-finite estimate.
pub const LOG_DENSITY_FLOOR: f64 = -700.0;

/// A Monte Carlo loss estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEstimate {
    pub value: f64,
    /// Standard deviation of the summands over `sqrt(N)`.
    pub std_error: f64,
    /// Points where the estimate was not finite and the floor was used.
    pub floored: usize,
}

impl LossEstimate {
    fn from_terms(terms: &[f64], floored: usize) -> Self {
        let n = terms.len() as f64;
        let mean = terms.iter().sum::<f64>() / n;
        let var = if terms.len() > 1 {
            terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            std_error: (var / n).sqrt(),
            floored,
        }
    }
}

fn floored(v: f64, count: &mut usize) -> f64 {
    if v.is_finite() {
        v
    } else {
        *count += 1;
        LOG_DENSITY_FLOOR
    }
}

fn check_sample(test: &DataMatrix) -> Result<()> {
    if test.nrows() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(())
}

/// `N^-1 sum_i [log p(y_i) - log p_hat(y_i)]` over a sample from `p`.
pub fn kl_hat<T, E>(true_logpdf: T, est_logpdf: E, test: &DataMatrix) -> Result<LossEstimate>
where
    T: Fn(&[f64]) -> f64,
    E: Fn(&[f64]) -> f64,
{
    check_sample(test)?;
    let mut count = 0;
    let terms: Vec<f64> = test
        .rows()
        .map(|y| true_logpdf(y) - floored(est_logpdf(y), &mut count))
        .collect();
    Ok(LossEstimate::from_terms(&terms, count))
}

/// `N^-1 sum_i (p(y_i) - p_hat(y_i))^2 / p(y_i)` over a sample from `p`, an
/// unbiased estimate of the integrated squared error.
pub fn l2_hat<T, E>(true_logpdf: T, est_logpdf: E, test: &DataMatrix) -> Result<LossEstimate>
where
    T: Fn(&[f64]) -> f64,
    E: Fn(&[f64]) -> f64,
{
    check_sample(test)?;
    let mut count = 0;
    let terms: Vec<f64> = test
        .rows()
        .map(|y| {
            let lp = true_logpdf(y);
            let lq = floored(est_logpdf(y), &mut count);
            lp.exp() * (-(lq - lp).exp_m1()).powi(2)
        })
        .collect();
    Ok(LossEstimate::from_terms(&terms, count))
}

/// Both losses of `estimate` against `truth` on one test sample.
pub fn losses<T: Density + ?Sized, E: Density + ?Sized>(
    truth: &T,
    estimate: &E,
    test: &DataMatrix,
) -> Result<(LossEstimate, LossEstimate)> {
    let kl = kl_hat(|y| truth.logpdf(y), |y| estimate.logpdf(y), test)?;
    let l2 = l2_hat(|y| truth.logpdf(y), |y| estimate.logpdf(y), test)?;
    Ok((kl, l2))
}

/// Significance marks: `**` when the median is not significantly different
/// from zero at 5%, `*` when not significant at 1% only, empty otherwise.
pub fn stars(p_value: f64) -> &'static str {
    if p_value > 0.05 {
        "**"
    } else if p_value > 0.01 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary {
    pub name: String,
    /// Median of `log(loss / reference loss)` over usable replications.
    pub median: f64,
    /// Standard error of the median from binomial order statistics.
    pub std_error: f64,
    pub p_value: f64,
    pub significant_5: bool,
    pub significant_1: bool,
    pub used: usize,
    /// Replications dropped because a loss was zero or negative.
    pub non_positive: usize,
    /// Replications dropped because a loss was not finite.
    pub non_finite: usize,
}

impl RatioSummary {
    pub fn stars(&self) -> &'static str {
        stars(self.p_value)
    }
}

/// Median log-ratio table against a reference estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub reference: String,
    /// Replications x estimators.
    pub losses: Vec<Vec<f64>>,
    pub rows: Vec<RatioSummary>,
}

/// Smallest replication count accepted by [`log_ratio_table`].
pub const MIN_REPLICATIONS: usize = 10;

/// `losses[r][e]` is the loss of estimator `e` in replication `r`.
pub fn log_ratio_table(
    losses: &[Vec<f64>],
    names: &[String],
    reference: usize,
) -> Result<LossReport> {
    let e = names.len();
    if e < 2 || reference >= e {
        return Err(Error::Domain {
            name: "estimator count",
            value: e as f64,
            domain: "at least two estimators and a valid reference",
        });
    }
    if losses.len() < MIN_REPLICATIONS {
        return Err(Error::InsufficientData {
            needed: MIN_REPLICATIONS,
            got: losses.len(),
        });
    }
    if let Some(row) = losses.iter().find(|r| r.len() != e) {
        return Err(Error::DimensionMismatch {
            expected: e,
            got: row.len(),
        });
    }
    let rows = (0..e)
        .map(|j| {
            let (mut non_positive, mut non_finite) = (0, 0);
            let mut ratios = Vec::with_capacity(losses.len());
            for r in losses {
                let (a, b) = (r[j], r[reference]);
                if !a.is_finite() || !b.is_finite() {
                    non_finite += 1;
                } else if a <= 0.0 || b <= 0.0 {
                    non_positive += 1;
                } else {
                    // difference of logs keeps the table exactly antisymmetric
                    ratios.push(a.ln() - b.ln());
                }
            }
            let (median, std_error) = median_with_se(&mut ratios);
            let test = signed_rank_test(&ratios);
            RatioSummary {
                name: names[j].clone(),
                median,
                std_error,
                p_value: test.p_value,
                significant_5: test.p_value <= 0.05,
                significant_1: test.p_value <= 0.01,
                used: ratios.len(),
                non_positive,
                non_finite,
            }
        })
        .collect();
    Ok(LossReport {
        reference: names[reference].clone(),
        losses: losses.to_vec(),
        rows,
    })
}

/// Median and the standard error implied by the distribution-free 95%
/// interval `[x_(r), x_(s)]` with `r, s = n/2 -/+ 1.96 sqrt(n)/2`.
pub fn median_with_se(values: &mut [f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    values.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    let z = 1.959_963_984_540_054;
    let half = z * (n as f64).sqrt() / 2.0;
    let lo = ((n as f64 / 2.0 - half).floor() as isize).clamp(1, n as isize) as usize;
    let hi = ((n as f64 / 2.0 + half).ceil() as isize + 1).clamp(1, n as isize) as usize;
    (median, (values[hi - 1] - values[lo - 1]) / (2.0 * z))
}

/// A fitted model that scores held-out observations.
pub trait PredictiveDensity {
    fn log_predictive(&self, y: &[f64], z: Option<&[f64]>) -> Result<f64>;

    /// Short description of the fitted complexity, e.g. component counts.
    fn complexity(&self) -> Option<String> {
        None
    }

    /// Components of the fitted joint mixture, where there is one.
    fn components(&self) -> Option<usize> {
        None
    }

    /// Degrees of freedom, for t copulas.
    fn nu(&self) -> Option<f64> {
        None
    }
}

impl PredictiveDensity for MixtureOfNormals {
    fn log_predictive(&self, y: &[f64], z: Option<&[f64]>) -> Result<f64> {
        self.logpdf_given(y, z)
    }

    fn complexity(&self) -> Option<String> {
        Some(alloc::format!("m={}", self.components()))
    }

    fn components(&self) -> Option<usize> {
        Some(MixtureOfNormals::components(self))
    }
}

impl PredictiveDensity for CopulaModel {
    fn log_predictive(&self, y: &[f64], z: Option<&[f64]>) -> Result<f64> {
        if z.is_some_and(|z| !z.is_empty()) {
            return Err(Error::Unsupported("copula models take no regressors"));
        }
        Ok(self.logpdf(y))
    }

    fn complexity(&self) -> Option<String> {
        Some(self.family().describe())
    }

    fn components(&self) -> Option<usize> {
        match self.family() {
            CopulaFamily::Mixture { joint } => Some(joint.components()),
            _ => None,
        }
    }

    fn nu(&self) -> Option<f64> {
        match self.family() {
            CopulaFamily::StudentT { nu, .. } => Some(*nu),
            _ => None,
        }
    }
}

impl PredictiveDensity for MarginallyAdaptedDensity {
    fn log_predictive(&self, y: &[f64], z: Option<&[f64]>) -> Result<f64> {
        self.logpdf_given(y, z)
    }

    fn complexity(&self) -> Option<String> {
        Some(alloc::format!("m={}", self.base().components()))
    }

    fn components(&self) -> Option<usize> {
        Some(self.base().components())
    }
}

/// Row indices of each fold after one shuffle with `stream`.
pub fn cv_folds(n: usize, folds: usize, stream: &RngStream) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::InsufficientData {
            needed: folds.max(2),
            got: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream.rng());
    Ok((0..folds)
        .map(|f| order[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold: usize,
    pub held_out: usize,
    /// Sum of held-out log densities, or the reason the fold failed.
    pub log_score: core::result::Result<f64, String>,
    pub complexity: Option<String>,
    pub components: Option<usize>,
    pub nu: Option<f64>,
    pub floored: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// Mean over completed folds of the held-out log-score sums.
    pub lps: f64,
    pub folds: Vec<FoldOutcome>,
}

impl CvResult {
    pub fn from_folds(folds: Vec<FoldOutcome>) -> Self {
        let done: Vec<f64> = folds
            .iter()
            .filter_map(|f| f.log_score.as_ref().ok().copied())
            .collect();
        let lps = if done.is_empty() {
            f64::NAN
        } else {
            done.iter().sum::<f64>() / done.len() as f64
        };
        Self { lps, folds }
    }

    pub fn failed(&self) -> usize {
        self.folds.iter().filter(|f| f.log_score.is_err()).count()
    }

    /// Mean component count over the folds that report one.
    pub fn mean_components(&self) -> Option<f64> {
        mean_of(
            self.folds
                .iter()
                .filter_map(|f| f.components.map(|c| c as f64)),
        )
    }

    /// Mean degrees of freedom over the folds that report them.
    pub fn mean_nu(&self) -> Option<f64> {
        mean_of(self.folds.iter().filter_map(|f| f.nu))
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Fits on the complement of `fold` and scores the held-out rows. The fit
/// receives `stream.child(fold)`.
pub fn fold_score<M, F>(
    data: &DataMatrix,
    z: Option<&DataMatrix>,
    folds: &[Vec<usize>],
    fold: usize,
    factory: &F,
    stream: &RngStream,
) -> FoldOutcome
where
    M: PredictiveDensity,
    F: Fn(&DataMatrix, Option<&DataMatrix>, &RngStream) -> Result<M>,
{
    let train: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(f, _)| *f != fold)
        .flat_map(|(_, rows)| rows.iter().copied())
        .collect();
    let test = &folds[fold];
    let mut floored_count = 0;
    let z_train = z.map(|z| z.select_rows(&train));
    let result = factory(
        &data.select_rows(&train),
        z_train.as_ref(),
        &stream.child(fold as u64),
    )
    .and_then(|model| {
        let mut total = 0.0;
        for &i in test {
            let v = model.log_predictive(data.row(i), z.map(|z| z.row(i)))?;
            total += floored(v, &mut floored_count);
        }
        Ok((total, model.complexity(), model.components(), model.nu()))
    });
    match result {
        Ok((total, complexity, components, nu)) => FoldOutcome {
            fold,
            held_out: test.len(),
            log_score: Ok(total),
            complexity,
            components,
            nu,
            floored: floored_count,
        },
        Err(e) => {
            log::warn!("cross-validation fold {fold} failed: {e}");
            FoldOutcome {
                fold,
                held_out: test.len(),
                log_score: Err(e.to_string()),
                complexity: None,
                components: None,
                nu: None,
                floored: floored_count,
            }
        }
    }
}

/// `folds`-fold cross-validated log predictive score. Rows are shuffled
/// once with `stream.child(0)`; fold `f` is fitted on `stream.child(1)`'s
/// child `f`.
pub fn lps_cv<M, F>(
    data: &DataMatrix,
    z: Option<&DataMatrix>,
    factory: F,
    folds: usize,
    stream: &RngStream,
) -> Result<CvResult>
where
    M: PredictiveDensity,
    F: Fn(&DataMatrix, Option<&DataMatrix>, &RngStream) -> Result<M>,
{
    if let Some(z) = z {
        if z.nrows() != data.nrows() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                got: z.nrows(),
            });
        }
    }
    let split = cv_folds(data.nrows(), folds, &stream.child(0))?;
    let fit_stream = stream.child(1);
    let outcomes = (0..folds)
        .map(|f| fold_score(data, z, &split, f, &factory, &fit_stream))
        .collect();
    Ok(CvResult::from_folds(outcomes))
}
