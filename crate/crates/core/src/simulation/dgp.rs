use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use crate::copulas::{ArchimedeanFamily, CopulaFamily, CopulaModel};
use crate::math::special::logsumexp;
use crate::math::SpdMatrix;
use crate::mixture::{MixtureOfNormals, UnivariateMixture};
use crate::{
    DataMatrix, Density, Error, MarginalizableDensity, Result, SampleDensity, UnivariateDensity,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DgpKind {
    /// Normal copula `V = 0.5 I + 0.5 ii'` with three-component marginals.
    NormalCopula,
    /// Clayton copula with the same marginals.
    ClaytonCopula,
    /// `0.7 N(0, I) + 0.3 N(0, 4I + 5ii')`.
    ScaleMixture,
    /// Three normals plus a uniform component on `[-10, 10]^p`.
    MnPlusUniform,
    /// Three well-separated bivariate normals.
    ThreeSeparated,
    /// `0.6 N(0, I) + 0.4 N(0, 16 I)` in two dimensions.
    TwoScaleBivariate,
}

impl DgpKind {
    pub const ALL: [DgpKind; 6] = [
        Self::NormalCopula,
        Self::ClaytonCopula,
        Self::ScaleMixture,
        Self::MnPlusUniform,
        Self::ThreeSeparated,
        Self::TwoScaleBivariate,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Self::NormalCopula => "normal_copula",
            Self::ClaytonCopula => "clayton",
            Self::ScaleMixture => "scale_mixture",
            Self::MnPlusUniform => "mn_uniform",
            Self::ThreeSeparated => "three_separated",
            Self::TwoScaleBivariate => "two_scale",
        }
    }

    pub fn parse(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }

    /// Whether the kind is only defined in two dimensions.
    pub fn is_bivariate(&self) -> bool {
        matches!(self, Self::ThreeSeparated | Self::TwoScaleBivariate)
    }
}

/// Marginal shared by the copula designs: weights (0.6, 0.2, 0.2), means
/// (0, -3, 3) and variances (1, 9, 0.1).
pub fn three_component_marginal() -> UnivariateMixture {
    UnivariateMixture::new(
        alloc::vec![0.6, 0.2, 0.2],
        alloc::vec![0.0, -3.0, 3.0],
        alloc::vec![1.0, 3.0, 0.1f64.sqrt()],
    )
    .expect("valid mixture")
}

fn equicorrelation(p: usize, diag: f64, off: f64) -> Result<SpdMatrix> {
    SpdMatrix::new(DMatrix::from_fn(
        p,
        p,
        |a, b| if a == b { diag } else { off },
    ))
}

/// Mixture of three normals with weight `normal_weight` plus a uniform on
/// `[-half_width, half_width]^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MnPlusUniform {
    normal: MixtureOfNormals,
    normal_weight: f64,
    half_width: f64,
}

impl MnPlusUniform {
    pub fn new(p: usize) -> Result<Self> {
        check_dim(p)?;
        let shifted = |shift: f64| {
            let mut m = alloc::vec![0.0; p];
            m[p - 1] = shift;
            m
        };
        let id = |s: f64| SpdMatrix::new(DMatrix::identity(p, p) * s);
        let normal = MixtureOfNormals::new(
            alloc::vec![0.6, 0.2, 0.2],
            alloc::vec![alloc::vec![0.0; p], shifted(-3.0), shifted(-6.0)],
            alloc::vec![id(1.0)?, id(2.0)?, id(1.0)?],
            None,
        )?;
        Ok(Self {
            normal,
            normal_weight: 0.66,
            half_width: 10.0,
        })
    }

    /// Weights of the three normals and the uniform, in that order.
    pub fn weights(&self) -> [f64; 4] {
        let w = self.normal.weights();
        let u = 1.0 - self.normal_weight;
        [
            self.normal_weight * w[0],
            self.normal_weight * w[1],
            self.normal_weight * w[2],
            u,
        ]
    }

    pub fn normal_part(&self) -> &MixtureOfNormals {
        &self.normal
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    fn log_uniform(&self, p: usize) -> f64 {
        -(p as f64) * (2.0 * self.half_width).ln()
    }

    /// Density of coordinate `i`.
    pub fn marginal_pdf(&self, i: usize, y: f64) -> f64 {
        let normal = self.normal.marginal(i).pdf(y);
        let uniform = if y.abs() <= self.half_width {
            1.0 / (2.0 * self.half_width)
        } else {
            0.0
        };
        self.normal_weight * normal + (1.0 - self.normal_weight) * uniform
    }
}

impl Density for MnPlusUniform {
    fn dim(&self) -> usize {
        self.normal.dim()
    }

    fn logpdf(&self, y: &[f64]) -> f64 {
        let a = self.normal_weight.ln() + self.normal.logpdf(y);
        if y.iter().all(|v| v.abs() <= self.half_width) {
            logsumexp(&[
                a,
                (1.0 - self.normal_weight).ln() + self.log_uniform(y.len()),
            ])
        } else {
            a
        }
    }
}

impl MnPlusUniform {
    /// One draw from the uniform component.
    pub fn sample_uniform_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = rng.random_range(-self.half_width..=self.half_width);
        }
    }
}

impl SampleDensity for MnPlusUniform {
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        if rng.random::<f64>() < self.normal_weight {
            self.normal.sample_into(rng, out);
        } else {
            self.sample_uniform_into(rng, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Copula(CopulaModel),
    Mixture(MixtureOfNormals),
    MnPlusUniform(MnPlusUniform),
}

/// A data-generating process with exact density and sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct Dgp {
    kind: DgpKind,
    truth: Truth,
}

fn check_dim(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::Domain {
            name: "dimension",
            value: 0.0,
            domain: "p >= 1",
        });
    }
    Ok(())
}

pub fn dgp_normal_copula(p: usize) -> Result<Dgp> {
    check_dim(p)?;
    let correlation = equicorrelation(p, 1.0, 0.5)?;
    Ok(Dgp {
        kind: DgpKind::NormalCopula,
        truth: Truth::Copula(CopulaModel::new(
            alloc::vec![three_component_marginal(); p],
            CopulaFamily::Normal { correlation },
        )?),
    })
}

pub fn dgp_clayton(p: usize, theta: f64) -> Result<Dgp> {
    check_dim(p)?;
    Ok(Dgp {
        kind: DgpKind::ClaytonCopula,
        truth: Truth::Copula(CopulaModel::new(
            alloc::vec![three_component_marginal(); p],
            CopulaFamily::Archimedean {
                family: ArchimedeanFamily::Clayton,
                theta,
            },
        )?),
    })
}

pub fn dgp_scale_mixture(p: usize) -> Result<Dgp> {
    check_dim(p)?;
    let mixture = MixtureOfNormals::new(
        alloc::vec![0.7, 0.3],
        alloc::vec![alloc::vec![0.0; p]; 2],
        alloc::vec![equicorrelation(p, 1.0, 0.0)?, equicorrelation(p, 9.0, 5.0)?],
        None,
    )?;
    Ok(Dgp {
        kind: DgpKind::ScaleMixture,
        truth: Truth::Mixture(mixture),
    })
}

pub fn dgp_mn_plus_uniform(p: usize) -> Result<Dgp> {
    Ok(Dgp {
        kind: DgpKind::MnPlusUniform,
        truth: Truth::MnPlusUniform(MnPlusUniform::new(p)?),
    })
}

/// The two bivariate illustrations: three separated clusters and a
/// two-scale mixture.
pub fn dgp_figure1() -> (Dgp, Dgp) {
    let id = |s: f64| SpdMatrix::new(DMatrix::identity(2, 2) * s).expect("positive scale");
    let three = MixtureOfNormals::new(
        alloc::vec![1.0 / 3.0; 3],
        alloc::vec![
            alloc::vec![0.0, 0.0],
            alloc::vec![-5.0, -5.0],
            alloc::vec![5.0, 5.0]
        ],
        alloc::vec![id(1.0), id(1.0), id(1.0)],
        None,
    )
    .expect("valid mixture");
    let two = MixtureOfNormals::new(
        alloc::vec![0.6, 0.4],
        alloc::vec![alloc::vec![0.0, 0.0]; 2],
        alloc::vec![id(1.0), id(16.0)],
        None,
    )
    .expect("valid mixture");
    (
        Dgp {
            kind: DgpKind::ThreeSeparated,
            truth: Truth::Mixture(three),
        },
        Dgp {
            kind: DgpKind::TwoScaleBivariate,
            truth: Truth::Mixture(two),
        },
    )
}

impl Dgp {
    /// Builds `kind` in dimension `p`; `theta` is the Clayton parameter
    /// (default 5). Bivariate kinds require `p = 2`.
    pub fn new(kind: DgpKind, p: usize, theta: Option<f64>) -> Result<Self> {
        if kind.is_bivariate() && p != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: p,
            });
        }
        match kind {
            DgpKind::NormalCopula => dgp_normal_copula(p),
            DgpKind::ClaytonCopula => dgp_clayton(p, theta.unwrap_or(5.0)),
            DgpKind::ScaleMixture => dgp_scale_mixture(p),
            DgpKind::MnPlusUniform => dgp_mn_plus_uniform(p),
            DgpKind::ThreeSeparated => Ok(dgp_figure1().0),
            DgpKind::TwoScaleBivariate => Ok(dgp_figure1().1),
        }
    }

    pub fn kind(&self) -> DgpKind {
        self.kind
    }

    pub fn truth(&self) -> &Truth {
        &self.truth
    }

    /// Exact univariate marginals, where they are mixtures of normals.
    pub fn marginals(&self) -> Option<Vec<UnivariateMixture>> {
        match &self.truth {
            Truth::Copula(c) => Some(c.marginals().to_vec()),
            Truth::Mixture(m) => Some((0..m.dim()).map(|i| m.marginal(i)).collect()),
            Truth::MnPlusUniform(_) => None,
        }
    }

    /// `x_j = Phi^{-1}(H_j(y_j))` through the true marginals.
    pub fn normal_scores(&self, y: &DataMatrix) -> Option<DataMatrix> {
        let marginals = self.marginals()?;
        let mut x = y.clone();
        for i in 0..x.nrows() {
            for (v, h) in x.row_mut(i).iter_mut().zip(&marginals) {
                *v = h.to_normal_score(*v);
            }
        }
        Some(x)
    }
}

impl Density for Dgp {
    fn dim(&self) -> usize {
        match &self.truth {
            Truth::Copula(c) => c.dim(),
            Truth::Mixture(m) => m.dim(),
            Truth::MnPlusUniform(m) => m.dim(),
        }
    }

    fn logpdf(&self, y: &[f64]) -> f64 {
        match &self.truth {
            Truth::Copula(c) => c.logpdf(y),
            Truth::Mixture(m) => m.logpdf(y),
            Truth::MnPlusUniform(m) => m.logpdf(y),
        }
    }
}

impl SampleDensity for Dgp {
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.truth {
            Truth::Copula(c) => c.sample_into(rng, out),
            Truth::Mixture(m) => m.sample_into(rng, out),
            Truth::MnPlusUniform(m) => m.sample_into(rng, out),
        }
    }
}
