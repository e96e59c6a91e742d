//! Bracketed inversion of monotone increasing functions.
//!
//! Both solvers halve the bracket 20 times before switching to a faster
//! local method, because mixture cdfs can be almost flat between
//! well-separated components and a bare Newton step would shoot out of the
//! bracket there.

use crate::{Error, Result};

const INITIAL_BISECTIONS: usize = 20;
const MAX_ITERATIONS: usize = 200;
const VALUE_TOLERANCE: f64 = 1e-10;

fn converged(lo: f64, hi: f64) -> bool {
    hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1.0)
}

fn check_bracket(f_lo: f64, f_hi: f64, target: f64) -> Result<()> {
    if f_lo <= target && target <= f_hi {
        Ok(())
    } else {
        Err(Error::NotBracketed { target, f_lo, f_hi })
    }
}

/// Solves `f(x) = target` for increasing `f` on `bracket`.
///
/// Returns `x` with `|f(x) - target| <= 1e-10` or a final bracket narrower
/// than `1e-12` (relative to the magnitude of its endpoints).
pub fn find_root<F: Fn(f64) -> f64>(f: F, target: f64, bracket: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let mut f_lo = f(lo) - target;
    let mut f_hi = f(hi) - target;
    check_bracket(f_lo + target, f_hi + target, target)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    for _ in 0..INITIAL_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid) - target;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
            f_hi = fm;
        }
    }
    // Illinois false position with a bisection fallback.
    let mut side = 0i8;
    for _ in 0..MAX_ITERATIONS {
        if converged(lo, hi) {
            break;
        }
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x) - target;
        if fx.abs() <= VALUE_TOLERANCE * 1e-4 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Like [`find_root`], with `f` returning `(value, derivative)` so the local
/// phase can take Newton steps.
pub fn find_root_newton<F: Fn(f64) -> (f64, f64)>(
    f: F,
    target: f64,
    bracket: (f64, f64),
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let f_lo = f(lo).0;
    let f_hi = f(hi).0;
    check_bracket(f_lo, f_hi, target)?;
    if f_lo == target {
        return Ok(lo);
    }
    if f_hi == target {
        return Ok(hi);
    }
    for _ in 0..INITIAL_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid).0 - target;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let (fx, dfx) = f(x);
        let g = fx - target;
        if g == 0.0 {
            return Ok(x);
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if converged(lo, hi) {
            break;
        }
        let mut next = x - g / dfx;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::special::{normal_cdf, normal_pdf};

    #[test]
    fn identity_root() {
        let r = find_root(|x| x, 0.3, (0.0, 1.0)).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
        let r = find_root_newton(|x| (x, 1.0), 0.3, (0.0, 1.0)).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
    }

    #[test]
    fn normal_median() {
        let r = find_root(normal_cdf, 0.5, (-10.0, 10.0)).unwrap();
        assert!(r.abs() < 1e-10);
        let r = find_root_newton(|x| (normal_cdf(x), normal_pdf(x)), 0.5, (-10.0, 7.0)).unwrap();
        assert!(r.abs() < 1e-10);
    }

    #[test]
    fn symmetric_mixture_median() {
        let cdf = |x: f64| 0.5 * normal_cdf(x + 1.0) + 0.5 * normal_cdf(x - 1.0);
        let pdf = |x: f64| 0.5 * normal_pdf(x + 1.0) + 0.5 * normal_pdf(x - 1.0);
        let r = find_root(cdf, 0.5, (-9.0, 5.0)).unwrap();
        assert!(r.abs() < 1e-10);
        let r = find_root_newton(|x| (cdf(x), pdf(x)), 0.5, (-9.0, 5.0)).unwrap();
        assert!(r.abs() < 1e-10);
    }

    #[test]
    fn separated_components_flat_region() {
        // plateau near 0.5 between the two modes
        let cdf = |x: f64| 0.5 * normal_cdf((x + 20.0) / 0.3) + 0.5 * normal_cdf((x - 20.0) / 0.3);
        let pdf = |x: f64| {
            0.5 * normal_pdf((x + 20.0) / 0.3) / 0.3 + 0.5 * normal_pdf((x - 20.0) / 0.3) / 0.3
        };
        for &u in &[0.1, 0.49, 0.51, 0.9] {
            let r = find_root_newton(|x| (cdf(x), pdf(x)), u, (-40.0, 40.0)).unwrap();
            assert!((cdf(r) - u).abs() < 1e-10, "u = {u}");
            let r = find_root(cdf, u, (-40.0, 40.0)).unwrap();
            assert!((cdf(r) - u).abs() < 1e-10, "u = {u}");
        }
    }

    #[test]
    fn target_outside_image() {
        assert!(matches!(
            find_root(|x| x, 2.0, (0.0, 1.0)),
            Err(Error::NotBracketed { .. })
        ));
        assert!(find_root_newton(|x| (x, 1.0), -1.0, (0.0, 1.0)).is_err());
    }
}
