//! Marginally adapted densities
//! `p(y) = k f(y) prod_i h_i(y_i) / f_{i,eps}(y_i)` with the blended
//! marginals `f_{i,eps} = (1 - eps) f_i + eps h_i`.
//!
//! Every ratio `h_i / f_{i,eps}` is clamped to [`RATIO_MIN`, `RATIO_MAX`] in
//! the density, in the importance-sampling estimate of `k` and in the
//! Metropolis-Hastings sampler, so all three refer to the same target.

mod lemma;

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;

use crate::mixture::{bic_select, fit_marginals, MixtureOfNormals, SaConfig, UnivariateMixture};
use crate::{
    DataMatrix, Density, Error, MarginalizableDensity, Result, RngStream, SampleDensity,
    UnivariateDensity,
};

pub use lemma::{lemma1_gap, Lemma1Report};

pub const RATIO_MIN: f64 = 0.02;
pub const RATIO_MAX: f64 = 50.0;
/// Clamped share of importance-sampling ratios above which `k` is flagged.
pub const CLAMP_WARNING_FRACTION: f64 = 0.05;
/// Smallest importance sample accepted by [`estimate_log_k`].
pub const MIN_DRAWS: usize = 1000;
/// Acceptance rate below which the sampler warns.
pub const LOW_ACCEPTANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptedConfig {
    pub epsilon: f64,
    /// Importance-sampling draws for `k`.
    pub draws: usize,
    /// Draws per random stream; chunks are independent work items.
    pub chunk_size: usize,
    pub max_components: usize,
    pub sa: SaConfig,
}

impl Default for AdaptedConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            draws: 100_000,
            chunk_size: 10_000,
            max_components: 10,
            sa: SaConfig::default(),
        }
    }
}

/// `log f_{i,eps}(y)`.
pub fn blended_marginal_logpdf<F: UnivariateDensity, H: UnivariateDensity>(
    f: &F,
    h: &H,
    epsilon: f64,
    y: f64,
) -> f64 {
    if epsilon >= 1.0 {
        return h.logpdf(y);
    }
    if epsilon <= 0.0 {
        return f.logpdf(y);
    }
    let a = (1.0 - epsilon).ln() + f.logpdf(y);
    let b = epsilon.ln() + h.logpdf(y);
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Which bound, if any, a ratio was clamped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clamp {
    None,
    Low,
    High,
}

/// `log clamp(h(y) / f_eps(y), RATIO_MIN, RATIO_MAX)`.
pub fn clamped_log_ratio<F: UnivariateDensity, H: UnivariateDensity>(
    f: &F,
    h: &H,
    epsilon: f64,
    y: f64,
) -> (f64, Clamp) {
    let r = h.logpdf(y) - blended_marginal_logpdf(f, h, epsilon, y);
    let (lo, hi) = (RATIO_MIN.ln(), RATIO_MAX.ln());
    if !(r >= lo) {
        (lo, Clamp::Low)
    } else if r > hi {
        (hi, Clamp::High)
    } else {
        (r, Clamp::None)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClampCounts {
    pub low: u64,
    pub high: u64,
    pub total: u64,
}

impl ClampCounts {
    pub fn fraction_low(&self) -> f64 {
        self.low as f64 / self.total.max(1) as f64
    }

    pub fn fraction_high(&self) -> f64 {
        self.high as f64 / self.total.max(1) as f64
    }

    pub fn fraction(&self) -> f64 {
        (self.low + self.high) as f64 / self.total.max(1) as f64
    }

    fn record(&mut self, c: Clamp) {
        self.total += 1;
        match c {
            Clamp::Low => self.low += 1,
            Clamp::High => self.high += 1,
            Clamp::None => {}
        }
    }

    fn merge(&mut self, other: &Self) {
        self.low += other.low;
        self.high += other.high;
        self.total += other.total;
    }
}

/// Partial sums from one chunk of importance draws.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KChunk {
    pub draws: u64,
    pub sum: f64,
    pub sum_sq: f64,
    pub clamps: ClampCounts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KEstimate {
    pub log_k: f64,
    /// Delta-method standard error of `log_k`.
    pub std_error: f64,
    pub draws: u64,
    pub clamps: ClampCounts,
    /// Set when more than [`CLAMP_WARNING_FRACTION`] of ratios were clamped.
    pub unreliable: bool,
}

impl KEstimate {
    /// `k = 1` with no sampling behind it.
    pub fn unit() -> Self {
        Self {
            log_k: 0.0,
            std_error: 0.0,
            draws: 0,
            clamps: ClampCounts::default(),
            unreliable: false,
        }
    }

    /// Combines chunks in the order given.
    pub fn from_chunks<'a, I: IntoIterator<Item = &'a KChunk>>(chunks: I) -> Result<Self> {
        let mut total = KChunk::default();
        for c in chunks {
            total.draws += c.draws;
            total.sum += c.sum;
            total.sum_sq += c.sum_sq;
            total.clamps.merge(&c.clamps);
        }
        if total.draws == 0 {
            return Err(Error::InsufficientData {
                needed: MIN_DRAWS,
                got: 0,
            });
        }
        let m = total.draws as f64;
        let mean = total.sum / m;
        let var = (total.sum_sq / m - mean * mean).max(0.0);
        let unreliable = total.clamps.fraction() > CLAMP_WARNING_FRACTION;
        if unreliable {
            log::warn!(
                "{:.1}% of importance ratios were clamped; the estimate of k may be unreliable",
                100.0 * total.clamps.fraction()
            );
        }
        Ok(Self {
            log_k: -mean.ln(),
            std_error: (var / m).sqrt() / mean,
            draws: total.draws,
            clamps: total.clamps,
            unreliable,
        })
    }
}

/// Product of clamped ratios at `y`, in logs.
fn log_weight<F: UnivariateDensity>(
    implied: &[F],
    marginals: &[UnivariateMixture],
    epsilon: f64,
    y: &[f64],
    mut record: impl FnMut(Clamp),
) -> f64 {
    let mut total = 0.0;
    for ((f, h), &v) in implied.iter().zip(marginals).zip(y) {
        let (r, c) = clamped_log_ratio(f, h, epsilon, v);
        record(c);
        total += r;
    }
    total
}

/// One chunk of the importance-sampling estimate with draws from `base`.
pub fn k_chunk<B, F, R>(
    base: &B,
    implied: &[F],
    marginals: &[UnivariateMixture],
    epsilon: f64,
    draws: usize,
    rng: &mut R,
) -> KChunk
where
    B: SampleDensity,
    F: UnivariateDensity,
    R: Rng + ?Sized,
{
    let mut chunk = KChunk::default();
    let mut y = alloc::vec![0.0; base.dim()];
    for _ in 0..draws {
        base.sample_into(rng, &mut y);
        let w = log_weight(implied, marginals, epsilon, &y, |c| chunk.clamps.record(c)).exp();
        chunk.draws += 1;
        chunk.sum += w;
        chunk.sum_sq += w * w;
    }
    chunk
}

/// `log k` by importance sampling from `base`; `draws` are split into chunks
/// of `chunk_size`, chunk `c` using `stream.child(c)`.
pub fn estimate_log_k<B, F>(
    base: &B,
    implied: &[F],
    marginals: &[UnivariateMixture],
    epsilon: f64,
    draws: usize,
    chunk_size: usize,
    stream: &RngStream,
) -> Result<KEstimate>
where
    B: SampleDensity,
    F: UnivariateDensity,
{
    if draws < MIN_DRAWS {
        return Err(Error::InsufficientData {
            needed: MIN_DRAWS,
            got: draws,
        });
    }
    let chunks: Vec<KChunk> = chunk_sizes(draws, chunk_size)
        .enumerate()
        .map(|(c, size)| {
            k_chunk(
                base,
                implied,
                marginals,
                epsilon,
                size,
                &mut stream.child(c as u64).rng(),
            )
        })
        .collect();
    KEstimate::from_chunks(&chunks)
}

/// Sizes of the chunks that make up `draws`.
pub fn chunk_sizes(draws: usize, chunk_size: usize) -> impl Iterator<Item = usize> {
    let chunk_size = chunk_size.max(1);
    (0..draws.div_ceil(chunk_size)).map(move |c| chunk_size.min(draws - c * chunk_size))
}

/// Output of the independence Metropolis-Hastings sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcOutput {
    pub draws: DataMatrix,
    pub acceptance_rate: f64,
}

/// Marginally adapted density with base `B` whose marginals are `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginallyAdaptedDensity<B = MixtureOfNormals, M = UnivariateMixture> {
    base: B,
    marginals: Vec<UnivariateMixture>,
    implied: Vec<M>,
    epsilon: f64,
    /// `k x p`; with regressors the adapted density is that of `y - B'z`.
    regression: Option<DMatrix<f64>>,
    k: KEstimate,
}

impl<B, M> MarginallyAdaptedDensity<B, M>
where
    B: MarginalizableDensity<Marginal = M> + SampleDensity,
    M: UnivariateDensity,
{
    /// Adapted density with `k = 1`; call [`Self::estimate_k`] to normalize.
    pub fn new(base: B, marginals: Vec<UnivariateMixture>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::Domain {
                name: "epsilon",
                value: epsilon,
                domain: "(0, 1]",
            });
        }
        if marginals.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                got: marginals.len(),
            });
        }
        let implied = (0..base.dim()).map(|i| base.marginal(i)).collect();
        Ok(Self {
            base,
            marginals,
            implied,
            epsilon,
            regression: None,
            k: KEstimate::unit(),
        })
    }

    pub fn with_regression(mut self, regression: DMatrix<f64>) -> Result<Self> {
        if regression.ncols() != self.base.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.base.dim(),
                got: regression.ncols(),
            });
        }
        self.regression = Some(regression);
        Ok(self)
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    pub fn marginals(&self) -> &[UnivariateMixture] {
        &self.marginals
    }

    pub fn implied_marginals(&self) -> &[M] {
        &self.implied
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn regression(&self) -> Option<&DMatrix<f64>> {
        self.regression.as_ref()
    }

    pub fn k_estimate(&self) -> &KEstimate {
        &self.k
    }

    pub fn log_k(&self) -> f64 {
        self.k.log_k
    }

    pub fn set_k(&mut self, k: KEstimate) {
        self.k = k;
    }

    pub fn estimate_k(
        &mut self,
        draws: usize,
        chunk_size: usize,
        stream: &RngStream,
    ) -> Result<&KEstimate> {
        self.k = estimate_log_k(
            &self.base,
            &self.implied,
            &self.marginals,
            self.epsilon,
            draws,
            chunk_size,
            stream,
        )?;
        Ok(&self.k)
    }

    /// One chunk of importance draws, for callers that distribute chunks.
    pub fn k_chunk<R: Rng + ?Sized>(&self, draws: usize, rng: &mut R) -> KChunk {
        k_chunk(
            &self.base,
            &self.implied,
            &self.marginals,
            self.epsilon,
            draws,
            rng,
        )
    }

    /// `sum_i log clamp(h_i / f_{i,eps})` at `y`.
    pub fn log_weight(&self, y: &[f64]) -> f64 {
        log_weight(&self.implied, &self.marginals, self.epsilon, y, |_| {})
    }

    /// Log density of `y` given regressors `z` (required iff the model has a
    /// regression mean).
    pub fn logpdf_given(&self, y: &[f64], z: Option<&[f64]>) -> Result<f64> {
        let p = self.base.dim();
        if y.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: y.len(),
            });
        }
        match (&self.regression, z) {
            (None, None) => Ok(self.logpdf(y)),
            (Some(b), Some(z)) => {
                if z.len() != b.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: b.nrows(),
                        got: z.len(),
                    });
                }
                let e: Vec<f64> = (0..p)
                    .map(|c| y[c] - (0..z.len()).map(|r| b[(r, c)] * z[r]).sum::<f64>())
                    .collect();
                Ok(self.logpdf(&e))
            }
            (None, Some(_)) => Err(Error::Unsupported("model has no regressors")),
            (Some(_), None) => Err(Error::Unsupported("model requires regressors")),
        }
    }

    /// Independence Metropolis-Hastings with proposal `f` targeting the
    /// clamped adapted density. The chain starts from a draw of `f`; the
    /// first `burn_in` states are discarded and no thinning is applied.
    pub fn sample_mh<R: Rng + ?Sized>(&self, n: usize, burn_in: usize, rng: &mut R) -> McmcOutput {
        let p = self.base.dim();
        let mut current = alloc::vec![0.0; p];
        self.base.sample_into(rng, &mut current);
        let mut current_w = self.log_weight(&current);
        let mut proposal = alloc::vec![0.0; p];
        let mut draws = DataMatrix::zeros(n, p);
        let mut accepted = 0usize;
        for t in 0..burn_in + n {
            self.base.sample_into(rng, &mut proposal);
            let w = self.log_weight(&proposal);
            let log_alpha = w - current_w;
            let accept = log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha;
            if accept {
                core::mem::swap(&mut current, &mut proposal);
                current_w = w;
            }
            if t >= burn_in {
                accepted += usize::from(accept);
                draws.row_mut(t - burn_in).copy_from_slice(&current);
            }
        }
        let acceptance_rate = if n == 0 {
            1.0
        } else {
            accepted as f64 / n as f64
        };
        if acceptance_rate < LOW_ACCEPTANCE {
            log::warn!("Metropolis-Hastings acceptance rate {acceptance_rate:.4} is below {LOW_ACCEPTANCE}");
        }
        McmcOutput {
            draws,
            acceptance_rate,
        }
    }
}

impl<B, M> Density for MarginallyAdaptedDensity<B, M>
where
    B: MarginalizableDensity<Marginal = M> + SampleDensity,
    M: UnivariateDensity,
{
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn logpdf(&self, y: &[f64]) -> f64 {
        if y.len() != self.base.dim() {
            return f64::NAN;
        }
        self.k.log_k + self.base.logpdf(y) + self.log_weight(y)
    }
}

/// Fits the marginally adapted mixture of normals: a BIC-selected joint
/// mixture as base, BIC-selected univariate mixtures as `h_i` (fitted to the
/// regression residuals when `z` is given) and the importance-sampling `k`.
/// If more than 5% of the importance ratios are clamped, the base is refitted
/// once with two more candidate components.
pub fn fit_mamn(
    data: &DataMatrix,
    z: Option<&DataMatrix>,
    cfg: &AdaptedConfig,
    stream: &RngStream,
) -> Result<MarginallyAdaptedDensity> {
    fit_mamn_inner(data, z, None, cfg, stream)
}

/// [`fit_mamn`] without regressors, reusing already fitted direct marginals.
pub fn fit_mamn_with_marginals(
    data: &DataMatrix,
    marginals: Vec<UnivariateMixture>,
    cfg: &AdaptedConfig,
    stream: &RngStream,
) -> Result<MarginallyAdaptedDensity> {
    if marginals.len() != data.ncols() {
        return Err(Error::DimensionMismatch {
            expected: data.ncols(),
            got: marginals.len(),
        });
    }
    fit_mamn_inner(data, None, Some(marginals), cfg, stream)
}

fn fit_mamn_inner(
    data: &DataMatrix,
    z: Option<&DataMatrix>,
    marginals: Option<Vec<UnivariateMixture>>,
    cfg: &AdaptedConfig,
    stream: &RngStream,
) -> Result<MarginallyAdaptedDensity> {
    let (n, p) = (data.nrows(), data.ncols());
    if n <= p {
        return Err(Error::InsufficientData {
            needed: p + 1,
            got: n,
        });
    }
    let build = |max_m: usize,
                 base_stream: &RngStream,
                 k_stream: &RngStream,
                 marginals: Option<Vec<UnivariateMixture>>| {
        let base = bic_select(data, z, max_m, &cfg.sa, base_stream)?.model;
        let marginals = match marginals {
            Some(m) => m,
            None => {
                let target = match z {
                    Some(z) => residual_matrix(&base, data, z)?,
                    None => data.clone(),
                };
                fit_marginals(&target, cfg.max_components, &cfg.sa, &stream.child(1))?
            }
        };
        let regression = base.regression().cloned();
        let mut model =
            MarginallyAdaptedDensity::new(base.error_density(), marginals, cfg.epsilon)?;
        if let Some(b) = regression {
            model = model.with_regression(b)?;
        }
        model.estimate_k(cfg.draws, cfg.chunk_size, k_stream)?;
        Ok::<_, Error>(model)
    };
    let model = build(
        cfg.max_components,
        &stream.child(0),
        &stream.child(2),
        marginals,
    )?;
    if !model.k.unreliable {
        return Ok(model);
    }
    log::warn!(
        "refitting the base mixture with up to {} components after clamping in the estimate of k",
        cfg.max_components + 2
    );
    build(
        cfg.max_components + 2,
        &stream.child(3),
        &stream.child(4),
        Some(model.marginals.clone()),
    )
}

fn residual_matrix(
    base: &MixtureOfNormals,
    data: &DataMatrix,
    z: &DataMatrix,
) -> Result<DataMatrix> {
    let (n, p) = (data.nrows(), data.ncols());
    let mut e = DataMatrix::zeros(n, p);
    for i in 0..n {
        base.residual(data.row(i), Some(z.row(i)), e.row_mut(i))?;
    }
    Ok(e)
}
