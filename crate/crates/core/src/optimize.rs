//! One-dimensional maximization on a closed interval.

/// Argmax and value of a scalar function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub arg: f64,
    pub value: f64,
}

/// Default number of grid points for [`maximize`].
pub const GRID_POINTS: usize = 10_000;

/// Maximizes `f` on `[lo, hi]`: uniform grid of `grid` points, then
/// golden-section refinement on the bracket around the best grid point until
/// the bracket is narrower than `tol`.
///
/// Exact for unimodal `f`; for other shapes it returns the refined best grid
/// point, never anything worse than the grid maximum. On a flat top the
/// largest grid argument wins.
pub fn maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize, tol: f64) -> Maximum {
    assert!(lo <= hi && grid >= 2, "bad interval or grid");
    if lo == hi {
        return Maximum { arg: lo, value: f(lo) };
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let at = |i: usize| if i + 1 == grid { hi } else { lo + step * i as f64 };
    let mut best = Maximum { arg: lo, value: f(lo) };
    let mut best_i = 0;
    for i in 1..grid {
        let x = at(i);
        let v = f(x);
        if v >= best.value {
            best = Maximum { arg: x, value: v };
            best_i = i;
        }
    }
    let mut a = at(best_i.saturating_sub(1));
    let mut b = at((best_i + 1).min(grid - 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    for (x, v) in [(c, fc), (d, fd)] {
        if v > best.value {
            best = Maximum { arg: x, value: v };
        }
    }
    best
}

/// Dense-grid maximum with spacing `step`, endpoints included.
pub fn maximize_dense(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Maximum {
    let count = ((hi - lo) / step).round() as usize;
    let mut best = Maximum { arg: lo, value: f(lo) };
    for i in 1..=count {
        let x = if i == count { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v > best.value {
            best = Maximum { arg: x, value: v };
        }
    }
    best
}
