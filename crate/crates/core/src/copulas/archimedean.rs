//! Clayton, Frank and Gumbel copulas `C(u) = psi(sum_i G(u_i))` with
//! `psi = G^{-1}`. Densities use `c(u) = |psi^{(p)}(s)| prod_i |G'(u_i)|`.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01};

use crate::math::logsumexp;
use crate::math::optimize::grid_then_golden;
use crate::mixture::UnivariateMixture;
use crate::{DataMatrix, Error, Result, UnivariateDensity};

use super::latent::U_CLAMP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchimedeanFamily {
    Clayton,
    Frank,
    Gumbel,
}

const GRID_POINTS: usize = 40;
const GOLDEN_ITERATIONS: usize = 60;

impl ArchimedeanFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Clayton => "clayton",
            Self::Frank => "frank",
            Self::Gumbel => "gumbel",
        }
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        let ok = match self {
            Self::Clayton | Self::Frank => theta > 0.0 && theta.is_finite(),
            Self::Gumbel => theta >= 1.0 && theta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain {
                name: "theta",
                value: theta,
                domain: match self {
                    Self::Clayton | Self::Frank => "(0, inf)",
                    Self::Gumbel => "[1, inf)",
                },
            })
        }
    }

    /// Search range for the fitted parameter.
    pub fn bracket(&self) -> (f64, f64) {
        match self {
            Self::Clayton => (1e-4, 100.0),
            Self::Frank => (1e-4, 200.0),
            Self::Gumbel => (1.0 + 1e-4, 50.0),
        }
    }

    /// Kendall's tau in closed form (Clayton and Gumbel).
    pub fn kendall_tau(&self, theta: f64) -> Option<f64> {
        match self {
            Self::Clayton => Some(theta / (theta + 2.0)),
            Self::Gumbel => Some(1.0 - 1.0 / theta),
            Self::Frank => None,
        }
    }

    /// `C(u)`.
    pub fn cdf(&self, theta: f64, u: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        check_interior(u)?;
        Ok(match self {
            Self::Clayton => (-clayton_log_a(theta, u) / theta).exp(),
            Self::Frank => {
                let s = u.iter().map(|&ui| frank_generator(theta, ui)).sum::<f64>();
                -frank_log_one_minus_z(theta, s) / theta
            }
            Self::Gumbel => (-(gumbel_log_s(theta, u) / theta).exp()).exp(),
        })
    }

    /// `log c(u)` for `u` in the open unit cube.
    pub fn logpdf(&self, theta: f64, u: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        check_interior(u)?;
        Ok(self.logpdf_unchecked(theta, u, &stirling_row(u.len())))
    }

    fn logpdf_unchecked(&self, theta: f64, u: &[f64], stirling: &[f64]) -> f64 {
        match self {
            Self::Clayton => clayton_logpdf(theta, u),
            Self::Frank => frank_logpdf(theta, u, stirling),
            Self::Gumbel => gumbel_logpdf(theta, u),
        }
    }

    /// Pseudo log-likelihood `sum_i log c(u_i)` over the rows of `u`.
    pub fn log_likelihood(&self, theta: f64, u: &DataMatrix) -> Result<f64> {
        self.check_theta(theta)?;
        for row in u.rows() {
            check_interior(row)?;
        }
        let stirling = stirling_row(u.ncols());
        Ok(u.rows()
            .map(|row| self.logpdf_unchecked(theta, row, &stirling))
            .sum())
    }

    /// Maximum pseudo-likelihood estimate on the rows of `u` (a log-spaced
    /// grid followed by golden-section refinement).
    pub fn fit(&self, u: &DataMatrix) -> Result<f64> {
        if u.ncols() < 2 {
            return Err(Error::Unsupported(
                "Archimedean copulas need at least two coordinates",
            ));
        }
        for row in u.rows() {
            check_interior(row)?;
        }
        let (lo, hi) = self.bracket();
        let offset = if matches!(self, Self::Gumbel) {
            1.0
        } else {
            0.0
        };
        let (llo, lhi) = ((lo - offset).ln(), (hi - offset).ln());
        let grid: Vec<f64> = (0..GRID_POINTS)
            .map(|k| llo + (lhi - llo) * k as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        let stirling = stirling_row(u.ncols());
        let objective = |t: f64| {
            let theta = offset + t.exp();
            u.rows()
                .map(|row| self.logpdf_unchecked(theta, row, &stirling))
                .sum::<f64>()
        };
        let (t, _) =
            grid_then_golden(objective, &grid, GOLDEN_ITERATIONS).ok_or(Error::NoCandidate)?;
        Ok(offset + t.exp())
    }

    /// One draw by the frailty construction `U_i = psi(E_i / V)`. Writes `u`
    /// and `1 - u`, both computed without cancellation.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        theta: f64,
        rng: &mut R,
        u: &mut [f64],
        upper: &mut [f64],
    ) {
        match self {
            Self::Clayton => {
                let v: f64 = Gamma::new(1.0 / theta, 1.0).map_or(1.0, |g| g.sample(rng));
                for (ui, si) in u.iter_mut().zip(upper.iter_mut()) {
                    let e: f64 = Exp1.sample(rng);
                    let l = -(e / v).ln_1p() / theta;
                    *ui = l.exp();
                    *si = -l.exp_m1();
                }
            }
            Self::Gumbel => {
                let alpha = 1.0 / theta;
                let v = if alpha < 1.0 {
                    positive_stable(alpha, rng)
                } else {
                    1.0
                };
                for (ui, si) in u.iter_mut().zip(upper.iter_mut()) {
                    let e: f64 = Exp1.sample(rng);
                    let l = -(e / v).powf(alpha);
                    *ui = l.exp();
                    *si = -l.exp_m1();
                }
            }
            Self::Frank => {
                let v = logarithmic(theta, rng) as f64;
                let c = -(-theta).exp_m1();
                for (ui, si) in u.iter_mut().zip(upper.iter_mut()) {
                    let e: f64 = Exp1.sample(rng);
                    let t = e / v;
                    *ui = -(-c * (-t).exp()).ln_1p() / theta;
                    // 1 + ln(1 - c e^{-t}) / theta = (ln(1 + e^theta expm1(t)) - t) / theta
                    *si = ((theta.exp() * t.exp_m1()).ln_1p() - t) / theta;
                    if !si.is_finite() {
                        *si = 1.0 - *ui;
                    }
                }
            }
        }
    }
}

fn check_interior(u: &[f64]) -> Result<()> {
    match u.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        Some(&x) => Err(Error::Domain {
            name: "u",
            value: x,
            domain: "(0, 1)",
        }),
        None => Ok(()),
    }
}

/// Marginal probabilities `H_j(y_ij)`, clamped to `[U_CLAMP, 1 - U_CLAMP]`.
pub fn to_uniform(data: &DataMatrix, marginals: &[UnivariateMixture]) -> Result<DataMatrix> {
    if marginals.len() != data.ncols() {
        return Err(Error::DimensionMismatch {
            expected: data.ncols(),
            got: marginals.len(),
        });
    }
    data.ensure_finite()?;
    let mut u = DataMatrix::zeros(data.nrows(), data.ncols());
    for i in 0..data.nrows() {
        for (j, h) in marginals.iter().enumerate() {
            u.set(i, j, h.cdf(data.get(i, j)).clamp(U_CLAMP, 1.0 - U_CLAMP));
        }
    }
    Ok(u)
}

/// Fits `theta` holding the marginals fixed.
pub fn fit_archimedean(
    family: ArchimedeanFamily,
    data: &DataMatrix,
    marginals: &[UnivariateMixture],
) -> Result<f64> {
    family.fit(&to_uniform(data, marginals)?)
}

/// `log c(u)`.
pub fn archimedean_logpdf(family: ArchimedeanFamily, theta: f64, u: &[f64]) -> Result<f64> {
    family.logpdf(theta, u)
}

// Clayton: G(u) = u^{-theta} - 1, psi(s) = (1 + s)^{-1/theta}.

/// `ln(sum_i u_i^{-theta} - p + 1)`.
fn clayton_log_a(theta: f64, u: &[f64]) -> f64 {
    let a_max = u.iter().map(|&x| -theta * x.ln()).fold(0.0, f64::max);
    if a_max <= 1.0 {
        u.iter()
            .map(|&x| (-theta * x.ln()).exp_m1())
            .sum::<f64>()
            .ln_1p()
    } else {
        let p = u.len() as f64;
        let scaled: f64 = u.iter().map(|&x| (-theta * x.ln() - a_max).exp()).sum();
        a_max + (scaled - (p - 1.0) * (-a_max).exp()).ln()
    }
}

fn clayton_logpdf(theta: f64, u: &[f64]) -> f64 {
    let p = u.len();
    let log_const: f64 = (0..p).map(|k| (k as f64).mul_add(theta, 1.0).ln()).sum();
    let sum_log_u: f64 = u.iter().map(|x| x.ln()).sum();
    log_const - (p as f64 + 1.0 / theta) * clayton_log_a(theta, u) - (theta + 1.0) * sum_log_u
}

// Frank: G(u) = ln(1 - e^{-theta}) - ln(1 - e^{-theta u}),
// psi(s) = -ln(1 - c e^{-s}) / theta with c = 1 - e^{-theta}.

fn frank_generator(theta: f64, u: f64) -> f64 {
    let c = -(-theta).exp_m1();
    // ratio = (e^{-theta u} - e^{-theta}) / c, so G = -ln(1 - ratio)
    let ratio = (-theta * u).exp() * -(-theta * (1.0 - u)).exp_m1() / c;
    if ratio < 0.5 {
        -(-ratio).ln_1p()
    } else {
        c.ln() - (-(-theta * u).exp_m1()).ln()
    }
}

/// `ln(1 - c e^{-s})`.
fn frank_log_one_minus_z(theta: f64, s: f64) -> f64 {
    (-(-s).exp_m1() + (-theta - s).exp()).ln()
}

/// Row `k! S(n+1, k+1)`, `k = 0..=n`, for `n = p - 1`, used by
/// `Li_{-n}(z) = sum_k k! S(n+1, k+1) w^{k+1}` with `w = z / (1 - z)`.
fn stirling_row(p: usize) -> Vec<f64> {
    let n = p.saturating_sub(1);
    // S(m, j) for m = 0..=n+1
    let mut row = alloc::vec![1.0];
    for m in 1..=n + 1 {
        let mut next = alloc::vec![0.0; m + 1];
        for j in 1..=m {
            let carry = if j < row.len() {
                j as f64 * row[j]
            } else {
                0.0
            };
            next[j] = row[j - 1] + carry;
        }
        row = next;
    }
    let mut factorial = 1.0;
    (0..=n)
        .map(|k| {
            if k > 0 {
                factorial *= k as f64;
            }
            factorial * row[k + 1]
        })
        .collect()
}

fn frank_logpdf(theta: f64, u: &[f64], stirling: &[f64]) -> f64 {
    let s: f64 = u.iter().map(|&x| frank_generator(theta, x)).sum();
    let log_z = (-(-theta).exp_m1()).ln() - s;
    let log_w = log_z - frank_log_one_minus_z(theta, s);
    let terms: Vec<f64> = stirling
        .iter()
        .enumerate()
        .map(|(k, &a)| a.ln() + (k + 1) as f64 * log_w)
        .collect();
    let log_deriv = -theta.ln() + logsumexp(&terms);
    let log_jac: f64 = u
        .iter()
        .map(|&x| theta.ln() - theta * x - (-(-theta * x).exp_m1()).ln())
        .sum();
    log_deriv + log_jac
}

// Gumbel: G(u) = (-ln u)^theta, psi(s) = exp(-s^{1/theta}).

fn gumbel_log_s(theta: f64, u: &[f64]) -> f64 {
    let terms: Vec<f64> = u.iter().map(|&x| theta * (-x.ln()).ln()).collect();
    logsumexp(&terms)
}

fn gumbel_logpdf(theta: f64, u: &[f64]) -> f64 {
    let p = u.len();
    let alpha = 1.0 / theta;
    let log_s = gumbel_log_s(theta, u);
    let s_alpha = (alpha * log_s).exp();
    // h_k = |alpha (alpha - 1) ... (alpha - k + 1)| s^alpha, k = 1..=p
    let mut h = Vec::with_capacity(p);
    let mut falling = 1.0;
    for k in 0..p {
        falling *= (alpha - k as f64).abs();
        h.push(falling * s_alpha);
    }
    // complete Bell polynomial B_p(h_1, ..., h_p); all terms are non-negative
    let mut bell = alloc::vec![1.0];
    for n in 0..p {
        let mut binom = 1.0;
        let mut next = 0.0;
        for i in 0..=n {
            next += binom * bell[n - i] * h[i];
            binom = binom * (n - i) as f64 / (i + 1) as f64;
        }
        bell.push(next);
    }
    let log_deriv = -s_alpha + bell[p].ln() - p as f64 * log_s;
    let log_jac: f64 = u
        .iter()
        .map(|&x| theta.ln() + (theta - 1.0) * (-x.ln()).ln() - x.ln())
        .sum();
    log_deriv + log_jac
}

/// Positive stable variable with Laplace transform `exp(-s^alpha)`,
/// `0 < alpha < 1` (Kanter's representation).
fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let open: f64 = Open01.sample(rng);
    let theta = core::f64::consts::PI * open;
    let w: f64 = Exp1.sample(rng);
    let a = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha);
    let b = (((1.0 - alpha) * theta).sin() / w).powf((1.0 - alpha) / alpha);
    a * b
}

/// Logarithmic series variable with `P(V = k) = c^k / (k theta)`,
/// `c = 1 - e^{-theta}` (Kemp's LK algorithm).
fn logarithmic<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> u64 {
    let c = -(-theta).exp_m1();
    let u2: f64 = Open01.sample(rng);
    if u2 > c {
        return 1;
    }
    let u1: f64 = Open01.sample(rng);
    let q = -(-theta * u1).exp_m1();
    if u2 < q * q {
        let k = 1.0 + u2.ln() / q.ln();
        if k.is_finite() && k < u64::MAX as f64 {
            return k.floor() as u64;
        }
        return u64::MAX;
    }
    if u2 > q {
        1
    } else {
        2
    }
}
