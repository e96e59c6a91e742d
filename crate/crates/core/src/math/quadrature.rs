//! Composite Gauss-Legendre quadrature in one and two dimensions.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule with `order` nodes on [-1, 1].
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess then Newton on P_n
            let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped onto `panels` equal sub-intervals of [a, b].
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.nodes.len());
        let mut ws = Vec::with_capacity(panels * self.nodes.len());
        for k in 0..panels {
            let left = a + k as f64 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(left + 0.5 * h * (x + 1.0));
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let (xs, ws) = self.composite(a, b, panels);
        xs.iter().zip(&ws).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
        &self,
        mut f: F,
        x_range: (f64, f64),
        y_range: (f64, f64),
        panels: usize,
    ) -> f64 {
        let (xs, wx) = self.composite(x_range.0, x_range.1, panels);
        let (ys, wy) = self.composite(y_range.0, y_range.1, panels);
        let mut total = 0.0;
        for (&x, &a) in xs.iter().zip(&wx) {
            let mut row = 0.0;
            for (&y, &b) in ys.iter().zip(&wy) {
                row += b * f(x, y);
            }
            total += a * row;
        }
        total
    }
}

// P_n(x) and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Accuracy target and effort limit for the doubling integrators.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings {
    pub order: usize,
    pub initial_panels: usize,
    pub max_panels: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            order: 10,
            initial_panels: 16,
            max_panels: 1024,
            abs_tol: 1e-9,
            rel_tol: 1e-9,
        }
    }
}

impl QuadratureSettings {
    pub fn two_dimensional() -> Self {
        Self {
            order: 10,
            initial_panels: 16,
            max_panels: 256,
            abs_tol: 1e-7,
            rel_tol: 1e-7,
        }
    }
}

/// Doubles the panel count until successive estimates agree.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadratureSettings,
) -> Result<f64> {
    let rule = GaussLegendre::new(settings.order);
    let mut panels = settings.initial_panels;
    let mut previous = rule.integrate(&mut f, a, b, panels);
    loop {
        panels *= 2;
        let current = rule.integrate(&mut f, a, b, panels);
        if (current - previous).abs() <= settings.abs_tol.max(settings.rel_tol * current.abs()) {
            return Ok(current);
        }
        if panels >= settings.max_panels || !current.is_finite() {
            return Err(Error::QuadratureNotConverged { previous, current });
        }
        previous = current;
    }
}

/// Two-dimensional counterpart of [`integrate_adaptive`] on a rectangle.
pub fn integrate_2d_adaptive<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    x_range: (f64, f64),
    y_range: (f64, f64),
    settings: &QuadratureSettings,
) -> Result<f64> {
    let rule = GaussLegendre::new(settings.order);
    let mut panels = settings.initial_panels;
    let mut previous = rule.integrate_2d(&mut f, x_range, y_range, panels);
    loop {
        panels *= 2;
        let current = rule.integrate_2d(&mut f, x_range, y_range, panels);
        if (current - previous).abs() <= settings.abs_tol.max(settings.rel_tol * current.abs()) {
            return Ok(current);
        }
        if panels >= settings.max_panels || !current.is_finite() {
            return Err(Error::QuadratureNotConverged { previous, current });
        }
        previous = current;
    }
}
