const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)` over every point evaluated, endpoints excluded.
pub fn golden_section_max<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    iterations: usize,
) -> (f64, f64) {
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for _ in 0..iterations {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
        if (b - a).abs() <= 1e-12 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
    }
    best
}

/// Maximizes `f` over a grid, then refines with golden-section search
/// between the neighbours of the best grid point. Non-finite values count
/// as -inf. Returns `None` if no grid value is finite.
pub fn grid_then_golden<F: FnMut(f64) -> f64>(
    mut f: F,
    grid: &[f64],
    iterations: usize,
) -> Option<(f64, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    let (i, v) = best?;
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    if lo == hi {
        return Some((grid[i], v));
    }
    let (x, fx) = golden_section_max(
        |x| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        iterations,
    );
    if fx > v {
        Some((x, fx))
    } else {
        Some((grid[i], v))
    }
}
