//! Shared numeric routines: log-gamma, adaptive quadrature, stable summation.
//!
//! All probability computation in the crate happens in log space. Counts of
//! 10^4 individuals overflow Γ directly, so every score formula is expressed
//! through `ln_gamma`.

/// Natural log of the gamma function for strictly positive arguments.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    libm::lgamma(x)
}

/// The gamma function itself, used where ratios stay small.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Sum in a fixed (slice) order. Callers sort their terms first so the result
/// is bit-identical across runs regardless of how the terms were produced.
pub fn sum_ordered(terms: &[f64]) -> f64 {
    terms.iter().sum()
}

/// Adaptive Simpson quadrature over a finite interval.
///
/// Used to verify closed forms (compound density normalization, Hellinger
/// affinity, marginal-likelihood cluster terms) against the defining
/// integrals. Not on any hot path.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
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
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(a, b, fa, fm, fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Quadrature over `[0, ∞)` by mapping through `t = x / (1 - x)`.
pub fn adaptive_simpson_half_line<F: Fn(f64) -> f64>(f: &F, tol: f64) -> f64 {
    let mapped = |x: f64| {
        if x >= 1.0 {
            return 0.0;
        }
        let t = x / (1.0 - x);
        let jac = 1.0 / ((1.0 - x) * (1.0 - x));
        f(t) * jac
    };
    adaptive_simpson(&mapped, 0.0, 1.0 - 1e-12, tol)
}

/// SplitMix64 step, used to derive independent per-unit RNG seeds from a
/// master seed without correlation between streams.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
