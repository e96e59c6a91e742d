//! Mixtures of multivariate normals with an optional linear regression
//! mean: `y = B'z + e`, with `e` a mixture of `m` normals. Fitting is by
//! stochastic approximation ([`sa_fit`]) and the number of components is
//! chosen by BIC ([`bic_select`]).

mod bic;
mod fit;
mod univariate;

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::special::LN_2PI;
use crate::math::{logsumexp, SpdMatrix};
use crate::{DataMatrix, Density, Error, MarginalizableDensity, Result, SampleDensity};

pub use bic::{
    bic_select, fit_candidate, fit_marginals, parameter_count, select_by_bic, BicEntry,
    BicSelection,
};
pub use fit::{
    init_params, responsibilities, sa_fit, step_size, Responsibilities, SaConfig, StepSizes,
};
pub use univariate::UnivariateMixture;

/// Weights below this are clipped after every weight update.
pub const MIN_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureOfNormals {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<SpdMatrix>,
    /// `k x p`; the conditional mean of `y` given `z` is `regression' z`.
    regression: Option<DMatrix<f64>>,
    // ln pi_j - (p ln 2pi + ln|V_j|) / 2
    log_norms: Vec<f64>,
}

impl MixtureOfNormals {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<SpdMatrix>,
        regression: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let m = weights.len();
        if m == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        for len in [means.len(), covariances.len()] {
            if len != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: len,
                });
            }
        }
        let p = covariances[0].dim();
        for (mu, v) in means.iter().zip(&covariances) {
            if mu.len() != p || v.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: if mu.len() != p { mu.len() } else { v.dim() },
                });
            }
            if mu.iter().any(|x| !x.is_finite()) {
                return Err(Error::Domain {
                    name: "mean",
                    value: mu
                        .iter()
                        .copied()
                        .find(|x| !x.is_finite())
                        .unwrap_or(f64::NAN),
                    domain: "finite",
                });
            }
        }
        if let Some(b) = &regression {
            if b.ncols() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: b.ncols(),
                });
            }
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain {
                name: "sum of weights",
                value: total,
                domain: "non-negative weights summing to 1",
            });
        }
        let mut model = Self {
            weights,
            means,
            covariances,
            regression,
            log_norms: Vec::new(),
        };
        model.refresh();
        Ok(model)
    }

    /// A single multivariate normal.
    pub fn gaussian(mean: Vec<f64>, covariance: SpdMatrix) -> Result<Self> {
        Self::new(
            alloc::vec![1.0],
            alloc::vec![mean],
            alloc::vec![covariance],
            None,
        )
    }

    fn refresh(&mut self) {
        let p = self.dim() as f64;
        self.log_norms = self
            .weights
            .iter()
            .zip(&self.covariances)
            .map(|(w, v)| w.ln() - 0.5 * (p * LN_2PI + v.log_det()))
            .collect();
    }

    /// Number of components `m`.
    pub fn components(&self) -> usize {
        self.weights.len()
    }

    /// Number of regressors `k` (0 without a regression mean).
    pub fn regressors(&self) -> usize {
        self.regression.as_ref().map_or(0, |b| b.nrows())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[SpdMatrix] {
        &self.covariances
    }

    pub fn regression(&self) -> Option<&DMatrix<f64>> {
        self.regression.as_ref()
    }

    /// `sum_j pi_j mu_j`.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim()];
        for (w, mu) in self.weights.iter().zip(&self.means) {
            for (o, v) in out.iter_mut().zip(mu) {
                *o += w * v;
            }
        }
        out
    }

    /// Overall covariance of the error term.
    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mean = self.mean();
        let mut c = DMatrix::zeros(p, p);
        for ((w, mu), v) in self.weights.iter().zip(&self.means).zip(&self.covariances) {
            let d = DMatrix::from_fn(p, 1, |i, _| mu[i] - mean[i]);
            c += (v.matrix() + &d * d.transpose()) * *w;
        }
        c
    }

    /// Writes `y - B'z` into `out`.
    pub(crate) fn residual(&self, y: &[f64], z: Option<&[f64]>, out: &mut [f64]) -> Result<()> {
        let p = self.dim();
        if y.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: y.len(),
            });
        }
        out.copy_from_slice(y);
        match (&self.regression, z) {
            (Some(b), Some(z)) => {
                if z.len() != b.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: b.nrows(),
                        got: z.len(),
                    });
                }
                for (c, o) in out.iter_mut().enumerate() {
                    *o -= z
                        .iter()
                        .enumerate()
                        .map(|(r, zr)| b[(r, c)] * zr)
                        .sum::<f64>();
                }
            }
            (Some(b), None) => {
                return Err(Error::DimensionMismatch {
                    expected: b.nrows(),
                    got: 0,
                })
            }
            (None, Some(z)) if !z.is_empty() => {
                return Err(Error::DimensionMismatch {
                    expected: 0,
                    got: z.len(),
                })
            }
            (None, _) => {}
        }
        Ok(())
    }

    /// `ln pi_j + ln phi(e - mu_j; 0, V_j)` for every component.
    pub(crate) fn component_log_terms(&self, e: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            for ((s, ei), mi) in scratch.iter_mut().zip(e).zip(&self.means[j]) {
                *s = ei - mi;
            }
            self.covariances[j].whiten_in_place(scratch);
            let q: f64 = scratch.iter().map(|v| v * v).sum();
            *o = self.log_norms[j] - 0.5 * q;
        }
    }

    /// Log density of `y` given regressors `z` (`None` without regression).
    pub fn logpdf_given(&self, y: &[f64], z: Option<&[f64]>) -> Result<f64> {
        let p = self.dim();
        let mut e = alloc::vec![0.0; p];
        self.residual(y, z, &mut e)?;
        Ok(self.error_logpdf(&e))
    }

    /// Log density of the error term `e = y - B'z`.
    pub fn error_logpdf(&self, e: &[f64]) -> f64 {
        let mut terms = alloc::vec![0.0; self.components()];
        let mut scratch = alloc::vec![0.0; self.dim()];
        self.component_log_terms(e, &mut terms, &mut scratch);
        logsumexp(&terms)
    }

    /// Sum of log densities over the rows of `data`.
    pub fn log_likelihood(&self, data: &DataMatrix, z: Option<&DataMatrix>) -> Result<f64> {
        if let Some(z) = z {
            if z.nrows() != data.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: data.nrows(),
                    got: z.nrows(),
                });
            }
        }
        let mut e = alloc::vec![0.0; self.dim()];
        let mut terms = alloc::vec![0.0; self.components()];
        let mut scratch = alloc::vec![0.0; self.dim()];
        let mut total = 0.0;
        for i in 0..data.nrows() {
            self.residual(data.row(i), z.map(|z| z.row(i)), &mut e)?;
            self.component_log_terms(&e, &mut terms, &mut scratch);
            total += logsumexp(&terms);
        }
        Ok(total)
    }

    /// One draw of the error term.
    pub fn sample_error_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let j = draw_index(&self.weights, rng);
        let p = self.dim();
        let mut z = alloc::vec![0.0; p];
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        self.covariances[j].color(&z, out);
        for (o, m) in out.iter_mut().zip(&self.means[j]) {
            *o += m;
        }
    }

    /// One draw per row of `z`: `B'z_i + e_i`.
    pub fn sample_given<R: Rng + ?Sized>(&self, z: &DataMatrix, rng: &mut R) -> Result<DataMatrix> {
        let b = self.regression.as_ref().ok_or(Error::Unsupported(
            "model has no regression mean; use SampleDensity::sample",
        ))?;
        if z.ncols() != b.nrows() {
            return Err(Error::DimensionMismatch {
                expected: b.nrows(),
                got: z.ncols(),
            });
        }
        let p = self.dim();
        let mut out = DataMatrix::zeros(z.nrows(), p);
        for i in 0..z.nrows() {
            let row = out.row_mut(i);
            self.sample_error_into(rng, row);
            for (c, o) in row.iter_mut().enumerate() {
                *o += z
                    .row(i)
                    .iter()
                    .enumerate()
                    .map(|(r, zr)| b[(r, c)] * zr)
                    .sum::<f64>();
            }
        }
        Ok(out)
    }

    pub(crate) fn with_parameters(
        &self,
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<SpdMatrix>,
        regression: Option<DMatrix<f64>>,
    ) -> Self {
        let mut model = Self {
            weights,
            means,
            covariances,
            regression,
            log_norms: Vec::new(),
        };
        model.refresh();
        model
    }

    /// The same density without the regression mean (the error density).
    pub fn error_density(&self) -> Self {
        self.with_parameters(
            self.weights.clone(),
            self.means.clone(),
            self.covariances.clone(),
            None,
        )
    }
}

/// Index drawn with probabilities `weights` (which sum to one).
pub(crate) fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    weights.len() - 1
}

/// Without regressors this is the density of `y`; with regressors it is the
/// density of the error term (`z = 0`).
impl Density for MixtureOfNormals {
    fn dim(&self) -> usize {
        self.covariances[0].dim()
    }

    fn logpdf(&self, y: &[f64]) -> f64 {
        if y.len() != self.dim() {
            return f64::NAN;
        }
        self.error_logpdf(y)
    }
}

impl SampleDensity for MixtureOfNormals {
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        self.sample_error_into(rng, out);
    }
}

impl MarginalizableDensity for MixtureOfNormals {
    type Marginal = UnivariateMixture;

    /// Marginal of coordinate `i` (0-based) of the error density.
    fn marginal(&self, i: usize) -> UnivariateMixture {
        let means = self.means.iter().map(|mu| mu[i]).collect();
        let sds = self
            .covariances
            .iter()
            .map(|v| v.diagonal()[i].sqrt())
            .collect();
        UnivariateMixture::new(self.weights.clone(), means, sds)
            .expect("components of a valid model form a valid marginal")
    }
}
