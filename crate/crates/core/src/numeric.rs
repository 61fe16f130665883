//! Shared numerical kernels: adaptive quadrature and bracketed root finding.

/// Default maximum recursion depth for adaptive Simpson quadrature.
/// Bisection concentrates nodes near integrable endpoint singularities.
pub(crate) const MAX_QUAD_DEPTH: u32 = 60;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`. Assumes `f` is finite on the closed interval.
pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_QUAD_DEPTH)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Solves `f(v) = target` for `v` in the open interval `(lo, hi)` by pure
/// bisection, assuming `f` is nondecreasing with `f(lo+) <= target <= f(hi-)`.
/// Only interior points are ever evaluated. Runs until the bracket width
/// drops below `xtol` (capped at `max_iter` halvings).
pub(crate) fn bisect_increasing<F: Fn(f64) -> f64>(
    f: &F,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    xtol: f64,
    max_iter: usize,
) -> f64 {
    for _ in 0..max_iter {
        if hi - lo < xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        debug_assert!(fm.is_finite(), "non-finite objective in bisection");
        if fm < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `f(x) = target` for a strictly decreasing `f` on `[0, inf)` with
/// `f(0) >= target`. Grows the bracket by doubling, then bisects to `xtol`.
/// Returns `None` when no finite bracket can be established.
pub(crate) fn invert_decreasing<F: Fn(f64) -> f64>(
    f: &F,
    target: f64,
    xtol: f64,
    max_iter: usize,
) -> Option<f64> {
    let mut hi = 1.0;
    let mut grow = 0;
    while f(hi) > target {
        hi *= 2.0;
        grow += 1;
        if grow > 1200 {
            return None;
        }
    }
    let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
    for _ in 0..max_iter {
        if hi - lo < xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        // decreasing: value above target means the root lies to the right
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
