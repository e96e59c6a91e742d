use rand::Rng;

use crate::{DataMatrix, Result};

/// A normalized density on R^p.
pub trait Density {
    fn dim(&self) -> usize;

    fn logpdf(&self, y: &[f64]) -> f64;
}

/// A density that can also be sampled.
pub trait SampleDensity: Density {
    /// Writes one draw into `out`, which has length [`Density::dim`].
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]);

    fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DataMatrix {
        let mut draws = DataMatrix::zeros(n, self.dim());
        for i in 0..n {
            self.sample_into(rng, draws.row_mut(i));
        }
        draws
    }
}

/// A one-dimensional density with cdf and quantile.
pub trait UnivariateDensity {
    fn logpdf(&self, y: f64) -> f64;

    fn cdf(&self, y: f64) -> f64;

    fn quantile(&self, u: f64) -> Result<f64>;

    /// Upper tail `1 - cdf(y)`; implementations override this where the
    /// subtraction would lose precision.
    fn sf(&self, y: f64) -> f64 {
        1.0 - self.cdf(y)
    }

    /// Inverse of [`UnivariateDensity::sf`].
    fn isf(&self, s: f64) -> Result<f64> {
        self.quantile(1.0 - s)
    }

    fn pdf(&self, y: f64) -> f64 {
        #[cfg(not(feature = "std"))]
        use num_traits::Float;
        self.logpdf(y).exp()
    }
}

/// A multivariate density whose univariate marginals are available in
/// closed form.
pub trait MarginalizableDensity: Density {
    type Marginal: UnivariateDensity;

    fn marginal(&self, i: usize) -> Self::Marginal;
}
