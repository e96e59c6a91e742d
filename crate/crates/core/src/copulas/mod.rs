//! Copula models with univariate mixture-of-normals marginals `H_j`.
//!
//! The implicit copulas (normal, t, mixture of normals) map `y_j` to a latent
//! `x_j = F_j^{-1}(H_j(y_j))` and evaluate
//! `log p(y) = log f(x) + sum_j [log h_j(y_j) - log f_j(x_j)]`.
//! The Archimedean copulas evaluate `log c(u) + sum_j log h_j(y_j)` with
//! `u_j = H_j(y_j)`.

mod archimedean;
mod latent;
mod mnc;
mod normal;
mod student;

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::math::mvt_logpdf_from_quadratic;
use crate::math::special::LN_2PI;
use crate::math::SpdMatrix;
use crate::mixture::{self, MixtureOfNormals, SaConfig, UnivariateMixture};
use crate::{DataMatrix, Density, Error, Result, RngStream, SampleDensity, UnivariateDensity};

pub use archimedean::{archimedean_logpdf, fit_archimedean, to_uniform, ArchimedeanFamily};
pub use latent::{
    latent_coordinate, observed_coordinate, transform_to_latent, InversionTable, LatentFamily,
    LatentMarginal, TransformedSample, TABLE_NODES, U_CLAMP,
};
pub use mnc::{fit_mn_copula, fit_mn_copula_with_marginals};
pub use normal::{fit_normal_copula, fit_normal_copula_with_marginals, penalized_correlation};
pub use student::{
    fit_t_copula, fit_t_copula_with_marginals, format_nu, t_fixed_point, t_profile, TProfile,
};

/// Largest allowed distance of a normal-copula diagonal entry from one.
pub const DIAGONAL_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct CopulaConfig {
    /// Settings for the marginal and joint mixture fits.
    pub sa: SaConfig,
    /// Largest component count tried by BIC.
    pub max_components: usize,
    pub normal_iterations: usize,
    pub normal_batch_size: usize,
    pub normal_alpha0: f64,
    /// Search-then-converge constants of the penalized correlation fit,
    /// kept separate from the mixture schedule.
    pub normal_c: f64,
    pub normal_tau: f64,
    pub nu_grid: Vec<f64>,
    pub nu_golden_iterations: usize,
    pub t_max_sweeps: usize,
    pub t_tolerance: f64,
}

impl Default for CopulaConfig {
    fn default() -> Self {
        Self {
            sa: SaConfig::default(),
            max_components: 10,
            normal_iterations: 1000,
            normal_batch_size: 20,
            normal_alpha0: 0.1,
            normal_c: 1.0,
            normal_tau: 100.0,
            nu_grid: alloc::vec![2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0, 30.0, 60.0],
            nu_golden_iterations: 20,
            t_max_sweeps: 500,
            t_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CopulaFamily {
    Normal {
        correlation: SpdMatrix,
    },
    StudentT {
        scale: SpdMatrix,
        nu: f64,
    },
    Mixture {
        joint: MixtureOfNormals,
    },
    Archimedean {
        family: ArchimedeanFamily,
        theta: f64,
    },
}

impl CopulaFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Normal { .. } => "normal",
            Self::StudentT { .. } => "student_t",
            Self::Mixture { .. } => "mixture",
            Self::Archimedean { family, .. } => family.name(),
        }
    }

    /// Family name with its dependence parameter, for reports.
    pub fn describe(&self) -> String {
        match self {
            Self::Normal { .. } => String::from("normal"),
            Self::StudentT { nu, .. } => alloc::format!("student_t nu={}", format_nu(*nu)),
            Self::Mixture { joint } => alloc::format!("mixture m={}", joint.components()),
            Self::Archimedean { family, theta } => {
                alloc::format!("{} theta={theta:.4}", family.name())
            }
        }
    }
}

/// A copula with fitted marginals. Inversion tables for the mixture copula
/// are built once on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaModel {
    marginals: Vec<UnivariateMixture>,
    family: CopulaFamily,
    latent: Vec<LatentMarginal>,
    tables: Vec<InversionTable>,
}

impl CopulaModel {
    pub fn new(marginals: Vec<UnivariateMixture>, family: CopulaFamily) -> Result<Self> {
        let p = marginals.len();
        if p == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let dim = match &family {
            CopulaFamily::Normal { correlation } => {
                let diagonal = correlation.diagonal();
                if diagonal
                    .iter()
                    .any(|d| !((d - 1.0).abs() <= DIAGONAL_TOLERANCE))
                {
                    return Err(Error::ConstraintNotMet { diagonal });
                }
                correlation.dim()
            }
            CopulaFamily::StudentT { scale, nu } => {
                if !(*nu > 2.0) {
                    return Err(Error::Domain {
                        name: "nu",
                        value: *nu,
                        domain: "(2, inf)",
                    });
                }
                let diagonal = scale.diagonal();
                if diagonal
                    .iter()
                    .any(|d| !((d - 1.0).abs() <= DIAGONAL_TOLERANCE))
                {
                    return Err(Error::ConstraintNotMet { diagonal });
                }
                scale.dim()
            }
            CopulaFamily::Mixture { joint } => {
                if joint.regressors() > 0 {
                    return Err(Error::Unsupported("mixture copula with regressors"));
                }
                joint.dim()
            }
            CopulaFamily::Archimedean { family, theta } => {
                family.check_theta(*theta)?;
                p
            }
        };
        if dim != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: dim,
            });
        }
        let (latent, tables) = match &family {
            CopulaFamily::Normal { .. } => (LatentFamily::Normal.marginals(p), Vec::new()),
            CopulaFamily::StudentT { nu, .. } => {
                (LatentFamily::StudentT(*nu).marginals(p), Vec::new())
            }
            CopulaFamily::Mixture { joint } => {
                let latent = LatentFamily::Mixture(joint).marginals(p);
                let tables = latent
                    .iter()
                    .zip(&marginals)
                    .map(|(f, h)| match f {
                        LatentMarginal::Mixture(f) => InversionTable::new(h, f),
                        _ => unreachable!(),
                    })
                    .collect::<Result<Vec<_>>>()?;
                (latent, tables)
            }
            CopulaFamily::Archimedean { .. } => (Vec::new(), Vec::new()),
        };
        Ok(Self {
            marginals,
            family,
            latent,
            tables,
        })
    }

    pub fn marginals(&self) -> &[UnivariateMixture] {
        &self.marginals
    }

    pub fn family(&self) -> &CopulaFamily {
        &self.family
    }

    /// `log p(y)` and whether any probability was clamped on the way.
    pub fn logpdf_flagged(&self, y: &[f64]) -> (f64, bool) {
        let p = self.marginals.len();
        if y.len() != p {
            return (f64::NAN, false);
        }
        let log_h: f64 = self
            .marginals
            .iter()
            .zip(y)
            .map(|(h, &v)| h.logpdf(v))
            .sum();
        let mut clamped = false;
        if let CopulaFamily::Archimedean { family, theta } = &self.family {
            let u: Vec<f64> = self
                .marginals
                .iter()
                .zip(y)
                .map(|(h, &v)| {
                    let u = h.cdf(v);
                    if !(U_CLAMP..=1.0 - U_CLAMP).contains(&u) {
                        clamped = true;
                    }
                    u.clamp(U_CLAMP, 1.0 - U_CLAMP)
                })
                .collect();
            let lc = family.logpdf(*theta, &u).unwrap_or(f64::NAN);
            return (lc + log_h, clamped);
        }
        let mut x = alloc::vec![0.0; p];
        for j in 0..p {
            let table_value = self.tables.get(j).and_then(|t| t.eval(y[j]));
            x[j] = match table_value {
                Some(v) => v,
                None => {
                    let (v, c) = latent_coordinate(y[j], &self.latent[j], &self.marginals[j]);
                    clamped |= c;
                    v
                }
            };
        }
        let log_f_marg: f64 = self.latent.iter().zip(&x).map(|(f, &v)| f.logpdf(v)).sum();
        let log_f = match &self.family {
            CopulaFamily::Normal { correlation } => {
                let q = correlation.mahalanobis_sq(&x);
                -0.5 * (p as f64 * LN_2PI + correlation.log_det() + q)
            }
            CopulaFamily::StudentT { scale, nu } => {
                mvt_logpdf_from_quadratic(scale.mahalanobis_sq(&x), p, scale.log_det(), *nu)
            }
            CopulaFamily::Mixture { joint } => joint.logpdf(&x),
            CopulaFamily::Archimedean { .. } => unreachable!(),
        };
        (log_f - log_f_marg + log_h, clamped)
    }

    /// Latent coordinates of `y` (for the Archimedean families, `u = H(y)`).
    pub fn to_latent(&self, y: &[f64]) -> Vec<f64> {
        match &self.family {
            CopulaFamily::Archimedean { .. } => self
                .marginals
                .iter()
                .zip(y)
                .map(|(h, &v)| h.cdf(v))
                .collect(),
            _ => self
                .latent
                .iter()
                .zip(&self.marginals)
                .zip(y)
                .map(|((f, h), &v)| latent_coordinate(v, f, h).0)
                .collect(),
        }
    }
}

impl Density for CopulaModel {
    fn dim(&self) -> usize {
        self.marginals.len()
    }

    fn logpdf(&self, y: &[f64]) -> f64 {
        self.logpdf_flagged(y).0
    }
}

impl SampleDensity for CopulaModel {
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let p = self.marginals.len();
        match &self.family {
            CopulaFamily::Archimedean { family, theta } => {
                let mut u = alloc::vec![0.0; p];
                let mut s = alloc::vec![0.0; p];
                family.sample_into(*theta, rng, &mut u, &mut s);
                for j in 0..p {
                    let h = &self.marginals[j];
                    let y = if u[j] <= 0.5 {
                        h.quantile(u[j].max(f64::MIN_POSITIVE))
                    } else {
                        h.isf(s[j].max(f64::MIN_POSITIVE))
                    };
                    out[j] = y.unwrap_or(if u[j] <= 0.5 { f64::MIN } else { f64::MAX });
                }
                return;
            }
            CopulaFamily::Normal { correlation } => {
                let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
                correlation.color(&z, out);
            }
            CopulaFamily::StudentT { scale, nu } => {
                let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
                scale.color(&z, out);
                let w: f64 = ChiSquared::new(*nu).map_or(*nu, |c| c.sample(rng));
                let k = (nu / w).sqrt();
                out.iter_mut().for_each(|v| *v *= k);
            }
            CopulaFamily::Mixture { joint } => joint.sample_into(rng, out),
        }
        for j in 0..p {
            out[j] = observed_coordinate(out[j], &self.latent[j], &self.marginals[j]);
        }
    }
}

/// Fits each column's mixture marginal by BIC; column `j` uses
/// `stream.child(j)`.
pub fn fit_marginals(
    data: &DataMatrix,
    cfg: &CopulaConfig,
    stream: &RngStream,
) -> Result<Vec<UnivariateMixture>> {
    mixture::fit_marginals(data, cfg.max_components, &cfg.sa, stream)
}

/// Fits an Archimedean copula with BIC-selected mixture marginals.
pub fn fit_archimedean_copula(
    family: ArchimedeanFamily,
    data: &DataMatrix,
    cfg: &CopulaConfig,
    stream: &RngStream,
) -> Result<CopulaModel> {
    let marginals = fit_marginals(data, cfg, &stream.child(0))?;
    fit_archimedean_copula_with_marginals(family, data, marginals)
}

pub fn fit_archimedean_copula_with_marginals(
    family: ArchimedeanFamily,
    data: &DataMatrix,
    marginals: Vec<UnivariateMixture>,
) -> Result<CopulaModel> {
    let theta = fit_archimedean(family, data, &marginals)?;
    CopulaModel::new(marginals, CopulaFamily::Archimedean { family, theta })
}

pub(crate) fn check_sample_size(data: &DataMatrix) -> Result<()> {
    if data.nrows() <= data.ncols() {
        return Err(Error::InsufficientData {
            needed: data.ncols() + 1,
            got: data.nrows(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::quadrature::{integrate_2d_adaptive, QuadratureSettings};
    use crate::math::special::normal_logpdf;
    use crate::math::stats::{correlation, kendall_tau, ks_critical_1pct, ks_statistic};
    use nalgebra::DMatrix;

    fn std_normal() -> UnivariateMixture {
        UnivariateMixture::new(alloc::vec![1.0], alloc::vec![0.0], alloc::vec![1.0]).unwrap()
    }

    pub(crate) fn marginal_31() -> UnivariateMixture {
        UnivariateMixture::new(
            alloc::vec![0.6, 0.2, 0.2],
            alloc::vec![0.0, -3.0, 3.0],
            alloc::vec![1.0, 3.0, 0.1f64.sqrt()],
        )
        .unwrap()
    }

    fn corr2(rho: f64) -> SpdMatrix {
        SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])).unwrap()
    }

    #[test]
    fn independence_normal_copula() {
        let model = CopulaModel::new(
            alloc::vec![std_normal(); 3],
            CopulaFamily::Normal {
                correlation: SpdMatrix::identity(3),
            },
        )
        .unwrap();
        let y = [0.4, -1.3, 2.2];
        let expected: f64 = y.iter().map(|&v| normal_logpdf(v)).sum();
        assert!((model.logpdf(&y) - expected).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_t_copula_is_marginal() {
        let model = CopulaModel::new(
            alloc::vec![marginal_31()],
            CopulaFamily::StudentT {
                scale: SpdMatrix::identity(1),
                nu: 4.0,
            },
        )
        .unwrap();
        for y in [-4.0, -0.3, 0.0, 2.9, 6.0] {
            assert!((model.logpdf(&[y]) - marginal_31().logpdf(y)).abs() < 1e-9);
        }
    }

    #[test]
    fn invariants_enforced() {
        let bad = SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.1, 0.0, 0.0, 1.0])).unwrap();
        assert!(matches!(
            CopulaModel::new(
                alloc::vec![std_normal(); 2],
                CopulaFamily::Normal { correlation: bad }
            ),
            Err(Error::ConstraintNotMet { .. })
        ));
        let clayton = |theta| {
            CopulaModel::new(
                alloc::vec![std_normal(); 2],
                CopulaFamily::Archimedean {
                    family: ArchimedeanFamily::Clayton,
                    theta,
                },
            )
        };
        assert!(clayton(-1.0).is_err());
        assert!(clayton(2.0).is_ok());
        assert!(CopulaModel::new(
            alloc::vec![std_normal(); 3],
            CopulaFamily::Normal {
                correlation: SpdMatrix::identity(2)
            }
        )
        .is_err());
    }

    fn integrate_2d(model: &CopulaModel) -> f64 {
        let settings = QuadratureSettings {
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            ..QuadratureSettings::two_dimensional()
        };
        integrate_2d_adaptive(
            |a, b| model.logpdf(&[a, b]).exp(),
            (-25.0, 15.0),
            (-25.0, 15.0),
            &settings,
        )
        .unwrap()
    }

    #[test]
    fn implicit_copula_densities_integrate_to_one() {
        let joint = MixtureOfNormals::new(
            alloc::vec![0.6, 0.4],
            alloc::vec![alloc::vec![-0.4, 0.2], alloc::vec![0.6, -0.3]],
            alloc::vec![corr2(0.5), corr2(-0.2)],
            None,
        )
        .unwrap();
        let families = [
            CopulaFamily::Normal {
                correlation: corr2(0.6),
            },
            CopulaFamily::StudentT {
                scale: corr2(0.4),
                nu: 4.0,
            },
            CopulaFamily::Mixture { joint },
        ];
        for family in families {
            let name = family.name();
            let model =
                CopulaModel::new(alloc::vec![marginal_31(), marginal_31()], family).unwrap();
            let total = integrate_2d(&model);
            assert!((total - 1.0).abs() < 2e-3, "{name}: {total}");
        }
    }

    #[test]
    fn mixture_table_matches_exact_inversion() {
        let joint = MixtureOfNormals::new(
            alloc::vec![0.5, 0.5],
            alloc::vec![alloc::vec![-1.0, 0.0], alloc::vec![1.0, 0.5]],
            alloc::vec![corr2(0.3), corr2(0.1)],
            None,
        )
        .unwrap();
        let model = CopulaModel::new(
            alloc::vec![marginal_31(), marginal_31()],
            CopulaFamily::Mixture {
                joint: joint.clone(),
            },
        )
        .unwrap();
        for y in [[-2.0, 0.5], [0.1, 3.1], [5.0, -7.0]] {
            let latent = LatentFamily::Mixture(&joint).marginals(2);
            let x: Vec<f64> = (0..2)
                .map(|j| latent_coordinate(y[j], &latent[j], &marginal_31()).0)
                .collect();
            let exact = joint.logpdf(&x) - latent[0].logpdf(x[0]) - latent[1].logpdf(x[1])
                + marginal_31().logpdf(y[0])
                + marginal_31().logpdf(y[1]);
            assert!((model.logpdf(&y) - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn extreme_points_are_flagged() {
        let model = CopulaModel::new(
            alloc::vec![std_normal(); 2],
            CopulaFamily::Normal {
                correlation: corr2(0.5),
            },
        )
        .unwrap();
        let (v, flag) = model.logpdf_flagged(&[-60.0, 0.0]);
        assert!(flag && v.is_finite());
        assert!(!model.logpdf_flagged(&[1.0, 0.0]).1);
    }

    #[test]
    fn independent_normal_copula_samples() {
        let model = CopulaModel::new(
            alloc::vec![marginal_31(); 2],
            CopulaFamily::Normal {
                correlation: SpdMatrix::identity(2),
            },
        )
        .unwrap();
        let draws = model.sample(10_000, &mut RngStream::new(11, 0).rng());
        let r = correlation(&draws.column(0), &draws.column(1));
        assert!(r.abs() < 0.05, "correlation {r}");
    }

    #[test]
    fn clayton_samples_kendall_tau_and_margins() {
        let model = CopulaModel::new(
            alloc::vec![marginal_31(); 2],
            CopulaFamily::Archimedean {
                family: ArchimedeanFamily::Clayton,
                theta: 5.0,
            },
        )
        .unwrap();
        let n = 10_000;
        let draws = model.sample(n, &mut RngStream::new(12, 0).rng());
        let tau = kendall_tau(&draws.column(0), &draws.column(1));
        assert!((tau - 5.0 / 7.0).abs() < 0.05, "tau {tau}");
        for j in 0..2 {
            let d = ks_statistic(&draws.column(j), |y| marginal_31().cdf(y));
            assert!(d < ks_critical_1pct(n), "column {j}: {d}");
        }
    }

    #[test]
    fn implicit_copula_samples_have_fitted_margins() {
        let families = [
            CopulaFamily::Normal {
                correlation: corr2(0.7),
            },
            CopulaFamily::StudentT {
                scale: corr2(0.7),
                nu: 3.0,
            },
        ];
        for family in families {
            let name = family.name();
            let model = CopulaModel::new(alloc::vec![marginal_31(); 2], family).unwrap();
            let n = 10_000;
            let draws = model.sample(n, &mut RngStream::new(13, 0).rng());
            for j in 0..2 {
                let d = ks_statistic(&draws.column(j), |y| marginal_31().cdf(y));
                assert!(d < ks_critical_1pct(n), "{name} column {j}: {d}");
            }
        }
    }

    #[test]
    fn latent_round_trip_through_model() {
        let model = CopulaModel::new(
            alloc::vec![marginal_31(), std_normal()],
            CopulaFamily::StudentT {
                scale: corr2(0.2),
                nu: 5.0,
            },
        )
        .unwrap();
        let y = [2.7, -0.4];
        let x = model.to_latent(&y);
        let back = observed_coordinate(x[0], &LatentMarginal::StudentT(5.0), &marginal_31());
        assert!((back - y[0]).abs() < 1e-6);
    }
}
