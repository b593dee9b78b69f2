//! Special-function kernel used by the model zoo and the SVI/EVT code.
//!
//! Everything here is real-argument and double precision. Where a value can
//! leave the f64 range a log-scaled variant is provided.

use crate::quad;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Tolerances for the series/quadrature kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for Accuracy {
    fn default() -> Self {
        Self {
            abs_tol: 1e-300,
            rel_tol: 1e-16,
            max_terms: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialFnError {
    #[error("{function} overflows f64 at x = {x}; use the log-scaled variant")]
    Overflow { function: &'static str, x: f64 },
    #[error("{function} did not converge after {terms} terms")]
    NonConvergence { function: &'static str, terms: usize },
    #[error("{function}: argument {x} outside the domain ({reason})")]
    Domain {
        function: &'static str,
        x: f64,
        reason: &'static str,
    },
}

type Result<T> = std::result::Result<T, SpecialFnError>;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// ln Γ(x) for x > 0; NaN otherwise.
pub fn ln_gamma(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    libm::lgamma_r(x).0
}

/// Γ(x).
pub fn gamma_fn(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Modified Bessel function of the first kind, I_α(x), α ≥ 0, x ≥ 0.
pub fn bessel_i(alpha: f64, x: f64) -> Result<f64> {
    let ln = ln_bessel_i(alpha, x)?;
    if ln > 709.0 {
        return Err(SpecialFnError::Overflow {
            function: "bessel_i",
            x,
        });
    }
    Ok(ln.exp())
}

/// e^{-x} I_α(x).
pub fn bessel_i_scaled(alpha: f64, x: f64) -> Result<f64> {
    Ok((ln_bessel_i(alpha, x)? - x).exp())
}

/// ln I_α(x). Power series for moderate x, Hankel expansion once x > max(25, α²).
pub fn ln_bessel_i(alpha: f64, x: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(SpecialFnError::Domain {
            function: "bessel_i",
            x: alpha,
            reason: "order must be >= 0",
        });
    }
    if !(x >= 0.0) {
        return Err(SpecialFnError::Domain {
            function: "bessel_i",
            x,
            reason: "argument must be >= 0",
        });
    }
    if x == 0.0 {
        return Ok(if alpha == 0.0 { 0.0 } else { f64::NEG_INFINITY });
    }
    if x > 25.0 && x > alpha * alpha {
        return Ok(ln_bessel_i_asymptotic(alpha, x));
    }
    let ln_t0 = alpha * (0.5 * x).ln() - ln_gamma(alpha + 1.0);
    let q = 0.25 * x * x;
    let (mut sum, mut term, mut offset) = (1.0_f64, 1.0_f64, 0.0_f64);
    let max_terms = Accuracy::default().max_terms;
    for k in 0..max_terms {
        let kf = k as f64;
        term *= q / ((kf + 1.0) * (kf + 1.0 + alpha));
        sum += term;
        if sum > 1e250 {
            sum *= 1e-250;
            term *= 1e-250;
            offset += 250.0 * std::f64::consts::LN_10;
        }
        if term < 1e-17 * sum && kf > 0.5 * x {
            return Ok(ln_t0 + sum.ln() + offset);
        }
    }
    Err(SpecialFnError::NonConvergence {
        function: "bessel_i",
        terms: max_terms,
    })
}

fn ln_bessel_i_asymptotic(alpha: f64, x: f64) -> f64 {
    let mu = 4.0 * alpha * alpha;
    let (mut sum, mut term) = (1.0_f64, 1.0_f64);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= -(mu - odd * odd) / (8.0 * kf * x);
        if term.abs() > last {
            break;
        }
        sum += term;
        last = term.abs();
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}

/// Kummer's confluent hypergeometric function ₁F₁(a; b; x).
pub fn hyp1f1(a: f64, b: f64, x: f64) -> Result<f64> {
    hyp1f1_with(a, b, x, &Accuracy::default())
}

/// ₁F₁ with explicit tolerances. Series below |x| = 30, the Euler integral
/// (when b > a > 0) above it.
pub fn hyp1f1_with(a: f64, b: f64, x: f64, acc: &Accuracy) -> Result<f64> {
    if b <= 0.0 && b == b.floor() {
        return Err(SpecialFnError::Domain {
            function: "hyp1f1",
            x: b,
            reason: "b is a non-positive integer",
        });
    }
    if x == 0.0 || a == 0.0 {
        return Ok(1.0);
    }
    if a == b {
        return Ok(x.exp());
    }
    if x.abs() >= 30.0 && b > a && a > 0.0 {
        return hyp1f1_integral(a, b, x);
    }
    if x < 0.0 && b > 0.0 {
        // Kummer's transformation: the direct series cancels badly for x < 0.
        let s = hyp1f1_series(b - a, b, -x, acc)?;
        return Ok(x.exp() * s);
    }
    hyp1f1_series(a, b, x, acc)
}

fn hyp1f1_series(a: f64, b: f64, x: f64, acc: &Accuracy) -> Result<f64> {
    let (mut sum, mut term) = (1.0_f64, 1.0_f64);
    for k in 0..acc.max_terms {
        let kf = k as f64;
        term *= (a + kf) / (b + kf) * x / (kf + 1.0);
        sum += term;
        if !sum.is_finite() {
            return Err(SpecialFnError::Overflow {
                function: "hyp1f1",
                x,
            });
        }
        if term == 0.0
            || (term.abs() <= acc.rel_tol * sum.abs() + acc.abs_tol && kf > x.abs())
        {
            return Ok(sum);
        }
    }
    Err(SpecialFnError::NonConvergence {
        function: "hyp1f1",
        terms: acc.max_terms,
    })
}

fn hyp1f1_integral(a: f64, b: f64, x: f64) -> Result<f64> {
    if x > 700.0 {
        return Err(SpecialFnError::Overflow {
            function: "hyp1f1",
            x,
        });
    }
    // Γ(b)/(Γ(a)Γ(b-a)) ∫₀¹ e^{xu} u^{a-1} (1-u)^{b-a-1} du, split at 1/2. The
    // substitutions s = u^a and t = (1-u)^{b-a} absorb the endpoint powers.
    let c = b - a;
    let shift = x.max(0.0);
    let left = |s: f64| {
        let u = s.powf(1.0 / a);
        (x * u - shift).exp() * ((-u).ln_1p() * (c - 1.0)).exp()
    };
    let right = |t: f64| {
        let v = t.powf(1.0 / c);
        (x * (1.0 - v) - shift).exp() * ((-v).ln_1p() * (a - 1.0)).exp()
    };
    // Knots at a few decay lengths of the exponential.
    let pieces = |p: f64| -> Vec<f64> {
        let mut k = vec![0.0];
        for m in [1.0, 5.0, 20.0, 60.0] {
            let u = m / x.abs();
            if u < 0.5 {
                k.push(u.powf(p));
            }
        }
        k.push(0.5_f64.powf(p));
        k
    };
    let (kl, kr) = if x < 0.0 {
        (pieces(a), vec![0.0, 0.5_f64.powf(c)])
    } else {
        (vec![0.0, 0.5_f64.powf(a)], pieces(c))
    };
    let piece = |f: &dyn Fn(f64) -> f64, k: &[f64]| {
        quad::integrate_full(f, k[0], k[k.len() - 1], &k[1..k.len() - 1], 1e-300, 1e-14).value
    };
    let v = piece(&left, &kl) / a + piece(&right, &kr) / c;
    let ln_norm = ln_gamma(b) - ln_gamma(a) - ln_gamma(c);
    Ok((ln_norm + shift).exp() * v)
}

/// ∂/∂a ₁F₁(a; b; x) at a = 0, via ₁F₁(a;b;x) = 1 + (a/b)∫₀ˣ ₁F₁(a+1;b+1;t)dt.
pub fn hyp1f1_da_at_zero(b: f64, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    // The integrand is monotone in t, so its endpoint value sets the scale.
    let scale = hyp1f1(1.0, b + 1.0, x)?.abs().max(hyp1f1(1.0, b + 1.0, 0.0)?);
    let v = quad::integrate(
        |t| hyp1f1(1.0, b + 1.0, t).unwrap_or(f64::NAN),
        0.0,
        x,
        1e-14 * scale,
    );
    if !v.is_finite() {
        return Err(SpecialFnError::NonConvergence {
            function: "hyp1f1_da_at_zero",
            terms: 0,
        });
    }
    Ok(v / b)
}

/// Dawson's integral D₊(x) = e^{-x²} ∫₀ˣ e^{u²} du.
pub fn dawson(x: f64) -> f64 {
    if x < 0.0 {
        return -dawson(-x);
    }
    if x == 0.0 {
        return 0.0;
    }
    if x < 6.0 {
        // e^{-x²} Σ x^{2n+1} / (n! (2n+1)): positive terms, no cancellation.
        let x2 = x * x;
        let mut p = x; // x^{2n+1}/n!
        let mut sum = x;
        for n in 1..500 {
            let nf = n as f64;
            p *= x2 / nf;
            let t = p / (2.0 * nf + 1.0);
            sum += t;
            if t < 1e-17 * sum {
                break;
            }
        }
        return (-x2).exp() * sum;
    }
    // 1/(2x) Σ (2n-1)!! / (2x²)^n
    let y = 2.0 * x * x;
    let (mut sum, mut term) = (1.0_f64, 1.0_f64);
    for n in 1..200 {
        let next = term * (2.0 * n as f64 - 1.0) / y;
        if next > term {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * x)
}

/// Exponential integral Ei(x) = -∫_{-x}^∞ e^{-r}/r dr (principal value for x > 0).
pub fn expint_ei(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(SpecialFnError::Domain {
            function: "expint_ei",
            x,
            reason: "logarithmic pole at 0",
        });
    }
    if x < 0.0 {
        return Ok(-expint_e1(-x));
    }
    if x > 709.0 {
        return Err(SpecialFnError::Overflow {
            function: "expint_ei",
            x,
        });
    }
    if x <= 40.0 {
        let (mut sum, mut term) = (0.0_f64, 1.0_f64);
        for k in 1..1000 {
            let kf = k as f64;
            term *= x / kf;
            let t = term / kf;
            sum += t;
            if t < 1e-17 * sum {
                break;
            }
        }
        return Ok(EULER_GAMMA + x.ln() + sum);
    }
    let (mut sum, mut term) = (1.0_f64, 1.0_f64);
    for k in 1..200 {
        let next = term * k as f64 / x;
        if next > term {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    Ok(x.exp() / x * sum)
}

/// E₁(z) for z > 0.
pub fn expint_e1(z: f64) -> f64 {
    if z <= 1.0 {
        let (mut sum, mut term) = (0.0_f64, 1.0_f64);
        for k in 1..200 {
            let kf = k as f64;
            term *= -z / kf;
            let t = term / kf;
            sum -= t;
            if t.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return -EULER_GAMMA - z.ln() + sum;
    }
    // Modified Lentz on the continued fraction for e^{z} E₁(z).
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}
