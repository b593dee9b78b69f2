//! Thin wrappers around the adaptive Gauss-Kronrod integrator from `gkquad`.

use gkquad::single::Integrator;
use gkquad::{RuntimeError, Tolerance};

const MAX_ITERS: usize = 2000;

/// Result of one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    /// False when the integrator hit its subdivision limit or a bad interval.
    pub converged: bool,
}

/// Integrate `f` over `[a, b]` (either end may be infinite), splitting at
/// `points`. Stops once the error is below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate_full<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Quad {
    if a == b {
        return Quad {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let inner: Vec<f64> = points.iter().copied().filter(|&p| p > lo && p < hi).collect();
    let res = Integrator::new(f)
        .tolerance(Tolerance::AbsOrRel(abs_tol, rel_tol))
        .max_iters(MAX_ITERS)
        .points(&inner)
        .run(lo..hi);
    // SAFETY: the accessors are only marked unsafe because the numbers may be
    // inaccurate after a runtime error; the fields are always initialised.
    let (value, error) = unsafe { res.estimate_delta_unchecked() };
    let converged = !matches!(
        res.err(),
        Some(RuntimeError::InsufficientIteration)
            | Some(RuntimeError::SubrangeTooSmall)
            | Some(RuntimeError::Divergent)
    );
    Quad {
        value: sign * value,
        error,
        converged,
    }
}

/// Integrate `f` over `[a, b]` to absolute tolerance `tol` (or 1e-13 relative).
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_full(f, a, b, &[], tol, 1e-13).value
}

/// Integrate `f` over `[a, b]` to relative tolerance `rel`.
pub fn integrate_rel<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> f64 {
    integrate_full(f, a, b, &[], 1e-300, rel).value
}

/// Integrate over `[knots[0], knots[last]]` with break points at the interior knots.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(f: F, knots: &[f64], tol: f64) -> f64 {
    match knots {
        [] | [_] => 0.0,
        [a, inner @ .., b] => integrate_full(f, *a, *b, inner, tol, 1e-13).value,
    }
}

/// Integrate `f` over `[a, ∞)`.
pub fn integrate_to_inf<F: FnMut(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
    integrate(f, a, f64::INFINITY, tol)
}

/// Composite trapezoid weights for an increasing grid.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 1..n {
        let h = 0.5 * (x[i] - x[i - 1]);
        w[i - 1] += h;
        w[i] += h;
    }
    w
}

/// Sum in a fixed pairwise order, so results do not depend on how the
/// input was produced.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_integral() {
        let v = integrate_to_inf(|x| (-x * x).exp(), 0.0, 1e-14);
        assert!((v - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let v = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-13);
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let v = integrate(|x| x * x, 1.0, 0.0, 1e-14);
        assert!((v + 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
    }
}
