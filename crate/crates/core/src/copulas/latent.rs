//! Maps between observed coordinates `y_j` and latent coordinates `x_j`
//! through `F_j(x_j) = u_j = H_j(y_j)`.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::math::special::{
    normal_cdf, normal_logpdf, normal_quantile, t_cdf, t_logpdf, t_quantile,
};
use crate::mixture::{MixtureOfNormals, UnivariateMixture};
use crate::{DataMatrix, Error, MarginalizableDensity, Result, UnivariateDensity};

/// Probabilities are clamped to `[U_CLAMP, 1 - U_CLAMP]` before inversion.
pub const U_CLAMP: f64 = 1e-12;

/// Marginal distribution `F_j` of a latent coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentMarginal {
    Normal,
    StudentT(f64),
    Mixture(UnivariateMixture),
}

impl UnivariateDensity for LatentMarginal {
    fn logpdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal => normal_logpdf(x),
            Self::StudentT(nu) => t_logpdf(x, *nu),
            Self::Mixture(m) => m.logpdf(x),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Normal => normal_cdf(x),
            Self::StudentT(nu) => t_cdf(x, *nu),
            Self::Mixture(m) => m.cdf(x),
        }
    }

    fn quantile(&self, u: f64) -> Result<f64> {
        match self {
            Self::Normal => normal_quantile(u),
            Self::StudentT(nu) => t_quantile(u, *nu),
            Self::Mixture(m) => m.quantile(u),
        }
    }

    fn sf(&self, x: f64) -> f64 {
        match self {
            Self::Normal => normal_cdf(-x),
            Self::StudentT(nu) => t_cdf(-x, *nu),
            Self::Mixture(m) => m.sf(x),
        }
    }

    fn isf(&self, s: f64) -> Result<f64> {
        match self {
            Self::Normal => normal_quantile(s).map(|v| -v),
            Self::StudentT(nu) => t_quantile(s, *nu).map(|v| -v),
            Self::Mixture(m) => m.isf(s),
        }
    }
}

/// Latent family used by [`transform_to_latent`].
#[derive(Debug, Clone, Copy)]
pub enum LatentFamily<'a> {
    Normal,
    StudentT(f64),
    /// Marginals of a fitted joint mixture.
    Mixture(&'a MixtureOfNormals),
}

impl LatentFamily<'_> {
    pub fn marginals(&self, p: usize) -> Vec<LatentMarginal> {
        match self {
            Self::Normal => alloc::vec![LatentMarginal::Normal; p],
            Self::StudentT(nu) => alloc::vec![LatentMarginal::StudentT(*nu); p],
            Self::Mixture(joint) => (0..p)
                .map(|j| LatentMarginal::Mixture(joint.marginal(j)))
                .collect(),
        }
    }
}

/// `F^{-1}(H(y))`, computed from the lower tail when `H(y) <= 1/2` and from
/// the upper tail otherwise. The flag reports whether the probability was
/// clamped.
pub fn latent_coordinate<F: UnivariateDensity, H: UnivariateDensity>(
    y: f64,
    f: &F,
    h: &H,
) -> (f64, bool) {
    let u = h.cdf(y);
    if u <= 0.5 {
        let clamped = !(u >= U_CLAMP);
        let x = f.quantile(if clamped { U_CLAMP } else { u });
        (x.unwrap_or(f64::NEG_INFINITY), clamped)
    } else {
        let s = h.sf(y);
        let clamped = !(s >= U_CLAMP);
        let x = f.isf(if clamped { U_CLAMP } else { s });
        (x.unwrap_or(f64::INFINITY), clamped)
    }
}

/// `H^{-1}(F(x))`, the inverse of [`latent_coordinate`].
pub fn observed_coordinate<F: UnivariateDensity, H: UnivariateDensity>(
    x: f64,
    f: &F,
    h: &H,
) -> f64 {
    let u = f.cdf(x);
    let y = if u <= 0.5 {
        h.quantile(u.max(f64::MIN_POSITIVE))
    } else {
        h.isf(f.sf(x).max(f64::MIN_POSITIVE))
    };
    y.unwrap_or(if u <= 0.5 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

/// Latent sample with per-coordinate log Jacobian terms
/// `log h_j(y_j) - log f_j(x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSample {
    pub x: DataMatrix,
    pub jacobian: DataMatrix,
    /// Number of entries whose probability was clamped.
    pub clamped: usize,
}

impl TransformedSample {
    /// Sum of the Jacobian terms of row `i`.
    pub fn row_jacobian(&self, i: usize) -> f64 {
        self.jacobian.row(i).iter().sum()
    }
}

/// Transforms every row of `y` to the latent scale of `family`.
pub fn transform_to_latent(
    y: &DataMatrix,
    marginals: &[UnivariateMixture],
    family: LatentFamily<'_>,
) -> Result<TransformedSample> {
    let p = y.ncols();
    if marginals.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: marginals.len(),
        });
    }
    y.ensure_finite()?;
    let latent = family.marginals(p);
    transform_with(y, marginals, &latent)
}

pub(crate) fn transform_with(
    y: &DataMatrix,
    marginals: &[UnivariateMixture],
    latent: &[LatentMarginal],
) -> Result<TransformedSample> {
    let (n, p) = (y.nrows(), y.ncols());
    let mut x = DataMatrix::zeros(n, p);
    let mut jacobian = DataMatrix::zeros(n, p);
    let mut clamped = 0;
    for i in 0..n {
        for j in 0..p {
            let yj = y.get(i, j);
            let (xj, c) = latent_coordinate(yj, &latent[j], &marginals[j]);
            clamped += usize::from(c);
            x.set(i, j, xj);
            jacobian.set(i, j, marginals[j].logpdf(yj) - latent[j].logpdf(xj));
        }
    }
    if !x.is_finite() || !jacobian.is_finite() {
        return Err(Error::NonFiniteData);
    }
    Ok(TransformedSample {
        x,
        jacobian,
        clamped,
    })
}

/// Cached monotone cubic interpolant of `y -> F^{-1}(H(y))` on the range
/// `[H^{-1}(1e-6), H^{-1}(1 - 1e-6)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InversionTable {
    lo: f64,
    step: f64,
    x: Vec<f64>,
    slope: Vec<f64>,
}

pub const TABLE_NODES: usize = 512;
const TABLE_TAIL: f64 = 1e-6;

impl InversionTable {
    pub fn new(h: &UnivariateMixture, f: &UnivariateMixture) -> Result<Self> {
        let lo = h.quantile(TABLE_TAIL)?;
        let hi = h.isf(TABLE_TAIL)?;
        let step = (hi - lo) / (TABLE_NODES - 1) as f64;
        let mut x = Vec::with_capacity(TABLE_NODES);
        let mut slope = Vec::with_capacity(TABLE_NODES);
        for k in 0..TABLE_NODES {
            let y = lo + step * k as f64;
            let (xk, _) = latent_coordinate(y, f, h);
            x.push(xk);
            // dx/dy = h(y) / f(x)
            slope.push((h.logpdf(y) - f.logpdf(xk)).exp());
        }
        limit_slopes(&x, &mut slope, step);
        Ok(Self { lo, step, x, slope })
    }

    /// Interpolated value, or `None` outside the tabulated range.
    pub fn eval(&self, y: f64) -> Option<f64> {
        let t = (y - self.lo) / self.step;
        if !(t >= 0.0 && t <= (TABLE_NODES - 1) as f64) {
            return None;
        }
        let k = (t as usize).min(TABLE_NODES - 2);
        let s = t - k as f64;
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let (d0, d1) = (self.slope[k] * self.step, self.slope[k + 1] * self.step);
        let s2 = s * s;
        let s3 = s2 * s;
        Some(
            (2.0 * s3 - 3.0 * s2 + 1.0) * x0
                + (s3 - 2.0 * s2 + s) * d0
                + (-2.0 * s3 + 3.0 * s2) * x1
                + (s3 - s2) * d1,
        )
    }
}

/// Fritsch-Carlson limiter: keeps the Hermite interpolant monotone.
fn limit_slopes(x: &[f64], slope: &mut [f64], step: f64) {
    for k in 0..x.len() - 1 {
        let delta = (x[k + 1] - x[k]) / step;
        if delta == 0.0 {
            slope[k] = 0.0;
            slope[k + 1] = 0.0;
            continue;
        }
        let a = slope[k] / delta;
        let b = slope[k + 1] / delta;
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            slope[k] = tau * a * delta;
            slope[k + 1] = tau * b * delta;
        }
    }
}
