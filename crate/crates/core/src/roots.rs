//! Bracketed scalar root finding shared across the solver.

/// Bisection on a bracketing interval, run until the interval collapses to
/// machine width (or `max_width` if positive). Assumes `f(lo)` and `f(hi)`
/// have opposite signs; the caller is responsible for the bracket.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, max_width: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    debug_assert!(flo * f(hi) <= 0.0, "bisect called without a bracket");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) < max_width {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Expands `hi` geometrically from `start` until `f(hi)` changes sign against
/// `f(start)`, then returns the bracket. `None` if no sign change is found.
pub(crate) fn expand_upward(
    f: impl Fn(f64) -> f64,
    start: f64,
    first_step: f64,
) -> Option<(f64, f64)> {
    let fstart = f(start);
    let mut step = first_step;
    let mut lo = start;
    for _ in 0..200 {
        let hi = lo + step;
        if f(hi) * fstart <= 0.0 {
            return Some((lo, hi));
        }
        lo = hi;
        step *= 2.0;
    }
    None
}

/// Newton refinement of a simple root inside `[lo, hi]`, starting from the
/// midpoint. Falls back to the seed whenever an iterate leaves the bracket.
pub(crate) fn newton_polish(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    seed: f64,
    f_tol: f64,
) -> f64 {
    let mut x = seed;
    let mut best = seed;
    let mut best_val = f(seed).abs();
    for _ in 0..60 {
        let fx = f(x);
        if fx.abs() < best_val {
            best = x;
            best_val = fx.abs();
        }
        if fx.abs() <= f_tol {
            return x;
        }
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - fx / d;
        if !(lo..=hi).contains(&next) || next == x {
            break;
        }
        x = next;
    }
    best
}
