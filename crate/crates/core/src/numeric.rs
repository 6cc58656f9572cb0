//! Small numerical helpers shared across modules.

use statrs::function::gamma::ln_gamma;

/// `ln C(n, k)` via log-gamma.
pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `e * ln(base)` with the convention `0 * ln(0) = 0`, so that `q^0 = 1` at `q = 0`.
#[inline]
pub(crate) fn ln_pow(ln_base: f64, e: usize) -> f64 {
    if e == 0 {
        0.0
    } else {
        e as f64 * ln_base
    }
}

/// Composite trapezoid rule for samples on a uniform grid over `[0, 1]`.
pub(crate) fn trapezoid_unit(values: &[f64]) -> f64 {
    let g = values.len() - 1;
    if g == 0 {
        return 0.0;
    }
    let inner: f64 = values[1..g].iter().sum();
    (inner + 0.5 * (values[0] + values[g])) / g as f64
}

/// Composite Simpson rule on `[a, b]` with `cells` panels.
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cells: usize) -> f64 {
    let cells = cells.max(1);
    let h = (b - a) / cells as f64;
    (0..cells)
        .map(|c| {
            let lo = a + c as f64 * h;
            let hi = if c + 1 == cells { b } else { lo + h };
            (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi))
        })
        .sum()
}

/// Bisection for the smallest `v` in `[lo, hi]` with `f(v) >= target`, `f` non-decreasing.
pub(crate) fn bisect_increasing<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Uniform grid `j / g` for `j = 0..=g`.
pub(crate) fn unit_grid(g: usize) -> impl Iterator<Item = f64> + Clone {
    (0..=g).map(move |j| j as f64 / g as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_choose_small_values() {
        assert!((ln_choose(5, 2).exp() - 10.0).abs() < 1e-12);
        assert_eq!(ln_choose(7, 0), 0.0);
        assert!((ln_choose(100, 50) - 66.78381_f64).abs() < 1e-4);
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let got = simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1);
        assert!((got - 0.0).abs() < 1e-14);
    }
}
