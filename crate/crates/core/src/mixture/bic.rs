use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use super::{sa_fit, MixtureOfNormals, SaConfig, UnivariateMixture};
use crate::{DataMatrix, Error, MarginalizableDensity, Result, RngStream};

/// Free parameters of an `m`-component, `p`-dimensional mixture with `k`
/// regressors: `(m-1) + mp + mp(p+1)/2 + kp`.
pub fn parameter_count(m: usize, p: usize, k: usize) -> usize {
    (m - 1) + m * p + m * p * (p + 1) / 2 + k * p
}

/// One row of the BIC table.
#[derive(Debug, Clone, PartialEq)]
pub struct BicEntry {
    pub m: usize,
    /// `Ok((log-likelihood, BIC))`, or the error that stopped this fit.
    pub outcome: Result<(f64, f64)>,
}

impl BicEntry {
    pub fn bic(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|(_, b)| *b)
    }
}

#[derive(Debug, Clone)]
pub struct BicSelection {
    pub model: MixtureOfNormals,
    pub table: Vec<BicEntry>,
}

impl BicSelection {
    pub fn selected_m(&self) -> usize {
        self.model.components()
    }
}

/// Fits `m` components on the stream reserved for that candidate and scores
/// the fit by BIC.
pub fn fit_candidate(
    data: &DataMatrix,
    z: Option<&DataMatrix>,
    m: usize,
    cfg: &SaConfig,
    stream: &RngStream,
) -> (BicEntry, Option<MixtureOfNormals>) {
    let fit = sa_fit(data, z, m, cfg, &mut stream.child(m as u64).rng()).and_then(|model| {
        let loglik = model.log_likelihood(data, z)?;
        if !loglik.is_finite() {
            return Err(Error::NonFiniteParameter {
                iteration: cfg.iterations,
            });
        }
        let d = parameter_count(m, data.ncols(), z.map_or(0, |z| z.ncols()));
        let bic = -2.0 * loglik + d as f64 * (data.nrows() as f64).ln();
        Ok((model, loglik, bic))
    });
    match fit {
        Ok((model, loglik, bic)) => (
            BicEntry {
                m,
                outcome: Ok((loglik, bic)),
            },
            Some(model),
        ),
        Err(e) => {
            log::warn!("fit with {m} components failed and is excluded from BIC selection: {e}");
            (BicEntry { m, outcome: Err(e) }, None)
        }
    }
}

/// Picks the smallest BIC among candidates `(entry, model)`; ties go to the
/// smaller `m`.
pub fn select_by_bic(
    candidates: Vec<(BicEntry, Option<MixtureOfNormals>)>,
) -> Result<BicSelection> {
    let mut best: Option<(f64, usize, MixtureOfNormals)> = None;
    let mut table = Vec::with_capacity(candidates.len());
    for (entry, model) in candidates {
        if let (Some(bic), Some(model)) = (entry.bic(), model) {
            let better = match &best {
                None => true,
                Some((b, m, _)) => bic < *b || (bic == *b && entry.m < *m),
            };
            if better {
                best = Some((bic, entry.m, model));
            }
        }
        table.push(entry);
    }
    table.sort_by_key(|e| e.m);
    let (_, _, model) = best.ok_or(Error::NoCandidate)?;
    Ok(BicSelection { model, table })
}

/// Fits `m = 1..=max_m` and returns the BIC minimizer with the full table.
/// Candidate `m` uses `stream.child(m)`, so the result does not depend on
/// the order in which candidates are fitted.
pub fn bic_select(
    data: &DataMatrix,
    z: Option<&DataMatrix>,
    max_m: usize,
    cfg: &SaConfig,
    stream: &RngStream,
) -> Result<BicSelection> {
    if max_m == 0 {
        return Err(Error::Domain {
            name: "max_m",
            value: 0.0,
            domain: "max_m >= 1",
        });
    }
    let candidates = (1..=max_m)
        .map(|m| fit_candidate(data, z, m, cfg, stream))
        .collect();
    select_by_bic(candidates)
}

/// BIC-selected univariate mixture for every column of `data`; column `j`
/// uses `stream.child(j)`.
pub fn fit_marginals(
    data: &DataMatrix,
    max_m: usize,
    cfg: &SaConfig,
    stream: &RngStream,
) -> Result<Vec<UnivariateMixture>> {
    data.ensure_finite()?;
    (0..data.ncols())
        .map(|j| {
            let column = DataMatrix::from_column(&data.column(j));
            let sel = bic_select(&column, None, max_m, cfg, &stream.child(j as u64))?;
            Ok(sel.model.marginal(0))
        })
        .collect()
}
