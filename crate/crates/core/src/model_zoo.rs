//! Stochastic-volatility models with closed-form moment boundaries.
//!
//! Each model exposes ξ̃ (MGF of VIX² explodes beyond it), q̃ (negative
//! moments of S explode beyond it), p̃ where known, its VIX map and the
//! densities needed to test those boundaries numerically.
//!
//! Notation: the CIR shape α = 2Ȳκ/γ² − 1 is `cir_shape_alpha`, SABR's
//! vol-of-vol is `sabr_alpha`. In the closed-form MGF of
//! ∫ 1/Y the exponents are called `cs_a` and `cs_b`.

use crate::black_scholes::{bs_price, BsInputs};
use crate::market_data::OptionKind;
use crate::quad;
use crate::special_fn::{dawson, expint_e1, hyp1f1, hyp1f1_da_at_zero, ln_bessel_i, ln_gamma, norm_cdf, norm_pdf, EULER_GAMMA, SpecialFnError};
use nalgebra::Complex;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("outside the formula's validity: {0}")]
    Regime(String),
    #[error(transparent)]
    Special(#[from] SpecialFnError),
}

type Result<T> = std::result::Result<T, ModelError>;

/// dS = S^a dW, optionally stopped once ∫ σ² reaches `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CevPrice {
    pub exponent: f64,
    pub cap: Option<f64>,
}

/// d log S = −Y²/2 dt + Y(√(1−ρ²) dW + ρ dB), dY = α Y dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sabr {
    pub sabr_alpha: f64,
    pub rho: f64,
    pub y0: f64,
}

/// d log S = −Y²/2 dt + Y(√(1−ρ²) dW + ρ dB), dY = c Y² dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CevVol {
    pub c: f64,
    pub rho: f64,
    pub y0: f64,
}

/// d log S = −Y/2 dt + √Y dW, dY = κ(Ȳ − Y) dt + γ√Y dB, dW dB = ρ dt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heston {
    pub kappa: f64,
    pub ybar: f64,
    pub gamma: f64,
    pub rho: f64,
    pub y0: f64,
}

/// d log S = −e^{2Y}/2 dt + e^Y dW, dY = κ(Ȳ − Y) dt + γ dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpOu {
    pub kappa: f64,
    pub ybar: f64,
    pub gamma: f64,
    pub rho: f64,
    pub y0: f64,
}

/// d log S = −Z/2 dt + √Z dW with Z = 1/Y and Y the CIR process (κ, Ȳ, γ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeHalves {
    pub kappa: f64,
    pub ybar: f64,
    pub gamma: f64,
    pub rho: f64,
    pub z0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    CevPrice(CevPrice),
    Sabr(Sabr),
    CevVol(CevVol),
    Heston(Heston),
    ExpOu(ExpOu),
    ThreeHalves(ThreeHalves),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    Gaussian { mean: f64, sd: f64 },
}

/// Independent compound-Poisson jumps in log S.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpOverlay {
    pub lambda: f64,
    #[serde(flatten)]
    pub law: JumpLaw,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(ModelError::Invalid(msg()))
    }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::CevPrice(_) => "cev_price",
            ModelSpec::Sabr(_) => "sabr",
            ModelSpec::CevVol(_) => "cev_vol",
            ModelSpec::Heston(_) => "heston",
            ModelSpec::ExpOu(_) => "exp_ou",
            ModelSpec::ThreeHalves(_) => "three_halves",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::CevPrice(m) => {
                check((0.0..1.0).contains(&m.exponent), || format!("exponent {} not in [0, 1)", m.exponent))?;
                check(m.cap.map_or(true, |c| c > 0.0), || "cap must be positive".into())
            }
            ModelSpec::Sabr(m) => {
                check(m.sabr_alpha > 0.0 && m.y0 > 0.0, || "need sabr_alpha, y0 > 0".into())?;
                check((-1.0..=0.0).contains(&m.rho), || format!("rho = {} > 0: price is not a martingale", m.rho))
            }
            ModelSpec::CevVol(m) => {
                check(m.c > 0.0 && m.y0 > 0.0, || "need c, y0 > 0".into())?;
                check((-1.0..=0.0).contains(&m.rho), || format!("rho = {} > 0 not covered", m.rho))
            }
            ModelSpec::Heston(m) => {
                check(m.kappa > 0.0 && m.ybar > 0.0 && m.gamma > 0.0 && m.y0 > 0.0, || {
                    "need kappa, ybar, gamma, y0 > 0".into()
                })?;
                check(m.rho.abs() <= 1.0, || format!("rho = {}", m.rho))?;
                check(m.gamma * m.gamma <= 2.0 * m.ybar * m.kappa, || {
                    format!("Feller condition fails: γ² = {} > 2Ȳκ = {}", m.gamma * m.gamma, 2.0 * m.ybar * m.kappa)
                })
            }
            ModelSpec::ExpOu(m) => {
                check(m.kappa > 0.0 && m.gamma > 0.0, || "need kappa, gamma > 0".into())?;
                check(m.rho.abs() < 1.0, || format!("rho = {}", m.rho))
            }
            ModelSpec::ThreeHalves(m) => {
                check(m.kappa > 0.0 && m.ybar > 0.0 && m.gamma > 0.0 && m.z0 > 0.0, || {
                    "need kappa, ybar, gamma, z0 > 0".into()
                })?;
                check(m.rho.abs() < 1.0, || format!("rho = {}", m.rho))?;
                let g2 = m.gamma * m.gamma;
                check(2.0 * m.ybar * m.kappa > g2, || "need 2Ȳκ > γ²".into())?;
                check(m.kappa * m.ybar - m.rho * m.gamma >= g2 / 2.0, || {
                    "need κȲ − ργ ≥ γ²/2 for a martingale price".into()
                })
            }
        }
    }
}

// ---------------------------------------------------------------------------
// CIR process

/// dY = κ(Ȳ − Y) dt + γ√Y dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cir {
    pub kappa: f64,
    pub ybar: f64,
    pub gamma: f64,
}

impl Cir {
    pub fn cir_shape_alpha(&self) -> f64 {
        2.0 * self.ybar * self.kappa / (self.gamma * self.gamma) - 1.0
    }

    /// c = 2κ / (γ²(1 − e^{−κ dt})).
    pub fn c(&self, dt: f64) -> f64 {
        2.0 * self.kappa / (self.gamma * self.gamma * -(-self.kappa * dt).exp_m1())
    }

    pub fn mean(&self, y0: f64, dt: f64) -> f64 {
        self.ybar + (y0 - self.ybar) * (-self.kappa * dt).exp()
    }

    pub fn variance(&self, y0: f64, dt: f64) -> f64 {
        let e = (-self.kappa * dt).exp();
        let g2k = self.gamma * self.gamma / self.kappa;
        y0 * g2k * (e - e * e) + self.ybar * g2k / 2.0 * (1.0 - e).powi(2)
    }

    /// Log transition density ln c − u − v + (α/2) ln(v/u) + ln I_α(2√(uv)).
    pub fn ln_density(&self, y0: f64, y: f64, dt: f64) -> Result<f64> {
        if y <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        let c = self.c(dt);
        let u = c * y0 * (-self.kappa * dt).exp();
        let v = c * y;
        let al = self.cir_shape_alpha();
        Ok(c.ln() - u - v + 0.5 * al * (v / u).ln() + ln_bessel_i(al, 2.0 * (u * v).sqrt())?)
    }

    pub fn density(&self, y0: f64, y: f64, dt: f64) -> Result<f64> {
        Ok(self.ln_density(y0, y, dt)?.exp())
    }

    /// Stationary gamma density, shape α+1 and scale γ²/(2κ).
    pub fn stationary_density(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let k = self.cir_shape_alpha() + 1.0;
        let theta = self.gamma * self.gamma / (2.0 * self.kappa);
        ((k - 1.0) * y.ln() - y / theta - ln_gamma(k) - k * theta.ln()).exp()
    }

    /// E e^{sY} = (1 − s/c)^{−(α+1)} exp(u s / (c − s)) for s < c, else ∞.
    pub fn mgf(&self, y0: f64, s: f64, dt: f64) -> f64 {
        let c = self.c(dt);
        if s >= c {
            return f64::INFINITY;
        }
        let u = c * y0 * (-self.kappa * dt).exp();
        ((-(self.cir_shape_alpha() + 1.0)) * (-s / c).ln_1p() + u * s / (c - s)).exp()
    }

    /// E[1/Y_t | Y_0 = y] = (ζ_t/α) ₁F₁(1; 1+α; −y ν_t), which is
    /// (1/α) ζ e^{−yν} ₁F₁(α; 1+α; yν) after Kummer's transformation.
    pub fn inverse_mean(&self, y: f64, t: f64) -> Result<f64> {
        let al = self.cir_shape_alpha();
        if al <= 0.0 {
            return Err(ModelError::Regime(format!("E[1/Y] is infinite for shape {al} ≤ 0")));
        }
        if t == 0.0 {
            return Ok(1.0 / y);
        }
        let zeta = self.c(t);
        let nu = zeta * (-self.kappa * t).exp();
        Ok(zeta / al * hyp1f1(1.0, 1.0 + al, -y * nu)?)
    }
}

impl Heston {
    pub fn cir(&self) -> Cir {
        Cir {
            kappa: self.kappa,
            ybar: self.ybar,
            gamma: self.gamma,
        }
    }
}

impl ThreeHalves {
    pub fn cir(&self) -> Cir {
        Cir {
            kappa: self.kappa,
            ybar: self.ybar,
            gamma: self.gamma,
        }
    }

    pub fn cir_shape_alpha(&self) -> f64 {
        self.cir().cir_shape_alpha()
    }
}

// ---------------------------------------------------------------------------
// Moment boundaries

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundary {
    /// E e^{ξ VIX_T²} < ∞ for ξ < ξ̃; ∞ means finite for every ξ.
    pub xi_tilde: f64,
    /// E S_{T+τ}^{−q} < ∞ for q < q̃.
    pub q_tilde: f64,
    /// E S^{1+p} < ∞ for p < p̃; None where the model's p̃ is not available.
    pub p_tilde: Option<f64>,
    /// E VIX_T^p < ∞ for p below this; ∞ when every moment exists.
    pub vix_moment: f64,
    /// Heston only: T*(1), the horizon at which E S^{−1} explodes.
    pub explosion_time: Option<f64>,
    pub notes: Vec<String>,
}

/// Horizon at which E S_T^ω explodes under Heston, or None if it never does.
/// b = κ − ργω and D = b² − γ²ω(ω−1); negative moments use ω = −q, where
/// b = qγρ + κ.
pub fn heston_explosion_time(h: &Heston, omega: f64) -> Option<f64> {
    let b = h.kappa - h.rho * h.gamma * omega;
    let d = b * b - h.gamma * h.gamma * omega * (omega - 1.0);
    if d < 0.0 {
        let s = (-d).sqrt();
        let pi = if b > 0.0 { PI } else { 0.0 };
        Some(2.0 * (pi + (-s / b).atan()) / s)
    } else if b < 0.0 && omega * (omega - 1.0) > 0.0 {
        let s = d.sqrt();
        Some(((b - s) / (b + s)).ln() / s)
    } else {
        None
    }
}

/// Smallest order in (0, cap] whose moment explodes before `horizon`.
fn first_exploding(horizon: f64, cap: f64, explodes: impl Fn(f64) -> bool) -> f64 {
    let mut hi = 1e-3;
    while !explodes(hi) {
        hi *= 2.0;
        if hi > cap {
            return f64::INFINITY;
        }
    }
    let mut lo = if hi > 1e-3 { hi / 2.0 } else { 0.0 };
    let _ = horizon;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if explodes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    hi
}

/// ξ̃ = 2κ²τ / (γ²(1 − e^{−κ(T−t)})(1 − e^{−κτ})) = c/b.
pub fn heston_xi_tilde(h: &Heston, dt: f64, tau: f64) -> f64 {
    let g2 = h.gamma * h.gamma;
    2.0 * h.kappa * h.kappa * tau / (g2 * -(-h.kappa * dt).exp_m1() * -(-h.kappa * tau).exp_m1())
}

pub fn three_halves_xi_tilde(m: &ThreeHalves, tau: f64) -> f64 {
    let al = m.cir_shape_alpha();
    m.gamma * m.gamma * tau * al * (al + 1.0) / 2.0
}

pub fn three_halves_q_tilde(m: &ThreeHalves) -> f64 {
    let al = m.cir_shape_alpha();
    ((1.0 + m.gamma * m.gamma * al * al).sqrt() - 1.0) / 2.0
}

pub fn cev_vol_xi_tilde(c: f64, tau: f64) -> f64 {
    1.5 * tau * c * c
}

pub fn cev_vol_q_tilde(c: f64) -> f64 {
    ((1.0 + c * c).sqrt() - 1.0) / 2.0
}

/// Boundaries for valuation time t, VIX expiry T and window τ.
pub fn moment_boundary(model: &ModelSpec, t: f64, big_t: f64, tau: f64) -> Result<MomentBoundary> {
    model.validate()?;
    if !(big_t > t && tau > 0.0) {
        return Err(ModelError::Invalid(format!("need T > t and τ > 0 (t = {t}, T = {big_t}, τ = {tau})")));
    }
    let dt = big_t - t;
    let horizon = dt + tau;
    let mut notes = Vec::new();
    let b = match *model {
        ModelSpec::CevPrice(m) => match m.cap {
            None => {
                notes.push("S hits 0 with positive probability: VIX and every negative moment are infinite".into());
                (0.0, 0.0, None, 0.0, None)
            }
            Some(cap) => {
                notes.push(format!("VIX ≤ √M = {}; E S^−q ≤ e^(qM) for q ≤ 1, so q̃ ≥ 1", cap.sqrt()));
                (f64::INFINITY, 1.0, None, f64::INFINITY, None)
            }
        },
        ModelSpec::Sabr(m) => {
            let r2 = m.rho * m.rho;
            let p = if r2 < 1.0 { r2 / (1.0 - r2) } else { f64::INFINITY };
            notes.push("VIX_T = C Y_T with Y_T lognormal: MGF infinite, hence q̃ = 0".into());
            (0.0, 0.0, Some(p), f64::INFINITY, None)
        }
        ModelSpec::CevVol(m) => {
            notes.push("p̃ for the price is not available for this model".into());
            (cev_vol_xi_tilde(m.c, tau), cev_vol_q_tilde(m.c), None, 3.0, None)
        }
        ModelSpec::Heston(h) => {
            let q = first_exploding(horizon, 1e6, |q| heston_explosion_time(&h, -q).map_or(false, |ts| ts <= horizon));
            let p = first_exploding(horizon, 1e6, |p| {
                heston_explosion_time(&h, 1.0 + p).map_or(false, |ts| ts <= horizon)
            });
            notes.push(format!("q̃ and p̃ are the first orders exploding within T−t+τ = {horizon}"));
            (heston_xi_tilde(&h, dt, tau), q, Some(p), f64::INFINITY, heston_explosion_time(&h, -1.0))
        }
        ModelSpec::ExpOu(_) => {
            notes.push("VIX² dominates a lognormal: MGF infinite, hence q̃ = 0".into());
            (0.0, 0.0, None, f64::INFINITY, None)
        }
        ModelSpec::ThreeHalves(m) => {
            if m.rho != 0.0 {
                notes.push("q̃ derived for ρ = 0".into());
            }
            (three_halves_xi_tilde(&m, tau), three_halves_q_tilde(&m), None, f64::INFINITY, None)
        }
    };
    Ok(MomentBoundary {
        xi_tilde: b.0,
        q_tilde: b.1,
        p_tilde: b.2,
        vix_moment: b.3,
        explosion_time: b.4,
        notes,
    })
}

// ---------------------------------------------------------------------------
// Heston

/// VIX² = a + bY with b = (1 − e^{−κτ})/(κτ), a = Ȳ(1 − b).
pub fn heston_vix_transform(kappa: f64, ybar: f64, tau: f64) -> (f64, f64) {
    let x = kappa * tau;
    let b = if x == 0.0 { 1.0 } else { -(-x).exp_m1() / x };
    (ybar * (1.0 - b), b)
}

/// Value of an expectation that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaybeFinite {
    Finite { value: f64, error: f64 },
    Divergent { last_estimate: f64 },
}

impl MaybeFinite {
    pub fn value(&self) -> f64 {
        match *self {
            MaybeFinite::Finite { value, .. } => value,
            MaybeFinite::Divergent { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, MaybeFinite::Finite { .. })
    }
}

/// ∫₀^∞ exp(lf(y)) dy by the cutoff-doubling protocol. The first cutoff is
/// past the point where lf has dropped 40 below its running maximum; then
/// four doublings. Divergent when each doubling grows the estimate by more
/// than 10%.
pub fn doubling_integral(lf: impl Fn(f64) -> f64, start: f64) -> MaybeFinite {
    let mut peak = lf(start);
    let mut l0 = f64::NAN;
    let mut y = start;
    for _ in 0..60 {
        y *= 2.0;
        let v = lf(y);
        if !v.is_finite() {
            break;
        }
        if v > peak {
            peak = v;
        } else if v < peak - 40.0 {
            l0 = y;
            break;
        }
    }
    if l0.is_nan() {
        // never turned down: the integrand grows without bound
        return MaybeFinite::Divergent {
            last_estimate: f64::INFINITY,
        };
    }
    let shift = if peak.is_finite() { peak } else { 0.0 };
    let est = |l: f64| {
        let r = quad::integrate_full(|y| (lf(y) - shift).exp(), 0.0, l, &[l / 1024.0, l / 64.0, l / 8.0], 1e-300, 1e-12);
        r.value
    };
    let mut prev = est(l0);
    let mut grew = 0;
    let mut l = l0;
    let mut err = 0.0;
    for _ in 0..4 {
        l *= 2.0;
        let next = est(l);
        if !(next.is_finite()) || next > 1.1 * prev {
            grew += 1;
        }
        err = (next - prev).abs();
        prev = next;
    }
    let scale = shift.exp();
    if grew == 4 || !prev.is_finite() {
        MaybeFinite::Divergent {
            last_estimate: prev * scale,
        }
    } else {
        MaybeFinite::Finite {
            value: prev * scale,
            error: err * scale,
        }
    }
}

/// E_t e^{ξ VIX_T²} by quadrature of e^{ξ(a+by)} against the CIR transition
/// density over T − t.
pub fn heston_vix2_mgf(h: &Heston, xi: f64, dt: f64, tau: f64) -> Result<MaybeFinite> {
    ModelSpec::Heston(*h).validate()?;
    if xi == 0.0 {
        return Ok(MaybeFinite::Finite { value: 1.0, error: 0.0 });
    }
    let cir = h.cir();
    let (a, b) = heston_vix_transform(h.kappa, h.ybar, tau);
    let start = cir.mean(h.y0, dt) + 20.0 * cir.variance(h.y0, dt).sqrt();
    Ok(doubling_integral(
        |y| xi * (a + b * y) + cir.ln_density(h.y0, y, dt).unwrap_or(f64::NAN),
        start,
    ))
}

/// Closed form of the same expectation, e^{ξa} E e^{ξbY}.
pub fn heston_vix2_mgf_exact(h: &Heston, xi: f64, dt: f64, tau: f64) -> f64 {
    let (a, b) = heston_vix_transform(h.kappa, h.ybar, tau);
    (xi * a).exp() * h.cir().mgf(h.y0, xi * b, dt)
}

/// Large-(T−t) limit e^{ξa}(1 − γ²ξb/(2κ))^{−(α+1)}.
pub fn heston_vix2_mgf_stationary(h: &Heston, xi: f64, tau: f64) -> f64 {
    let (a, b) = heston_vix_transform(h.kappa, h.ybar, tau);
    let x = h.gamma * h.gamma * xi * b / (2.0 * h.kappa);
    if x >= 1.0 {
        return f64::INFINITY;
    }
    (xi * a).exp() * (1.0 - x).powf(-(h.cir().cir_shape_alpha() + 1.0))
}

/// E S_T^ω / S_0^ω by integrating the Riccati system
/// B' = ω(ω−1)/2 + (ργω − κ)B + γ²B²/2, A' = κȲB. Divergent once B blows up.
pub fn heston_moment(h: &Heston, omega: f64, horizon: f64, steps: usize) -> MaybeFinite {
    let f = |b: f64| 0.5 * omega * (omega - 1.0) + (h.rho * h.gamma * omega - h.kappa) * b + 0.5 * h.gamma * h.gamma * b * b;
    let dt = horizon / steps as f64;
    let (mut a, mut b) = (0.0_f64, 0.0_f64);
    for _ in 0..steps {
        let k1 = f(b);
        let k2 = f(b + 0.5 * dt * k1);
        let k3 = f(b + 0.5 * dt * k2);
        let k4 = f(b + dt * k3);
        let nb = b + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        a += h.kappa * h.ybar * dt / 6.0 * (b + 2.0 * (b + 0.5 * dt * k1) + 2.0 * (b + 0.5 * dt * k2) + nb);
        b = nb;
        if !b.is_finite() || b.abs() > 1e8 {
            return MaybeFinite::Divergent {
                last_estimate: f64::INFINITY,
            };
        }
    }
    MaybeFinite::Finite {
        value: (a + b * h.y0).exp(),
        error: 0.0,
    }
}

/// Characteristic function of log(S_T/F) under Heston.
pub fn heston_cf(h: &Heston, u: Complex<f64>, t: f64) -> Complex<f64> {
    let i = Complex::new(0.0, 1.0);
    let g2 = h.gamma * h.gamma;
    let beta = Complex::new(h.kappa, 0.0) - h.rho * h.gamma * i * u;
    let d = (beta * beta + g2 * (i * u + u * u)).sqrt();
    let g = (beta - d) / (beta + d);
    let e = (-d * t).exp();
    let cc = h.kappa * h.ybar / g2 * ((beta - d) * t - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
    let dd = (beta - d) / g2 * (1.0 - e) / (1.0 - g * e);
    (cc + dd * h.y0).exp()
}

/// Out-of-the-money Heston option price by Lewis' formula.
pub fn heston_option_price(h: &Heston, forward: f64, strike: f64, t: f64, discount: f64) -> (OptionKind, f64) {
    let k = (forward / strike).ln();
    let integrand = |u: f64| {
        let z = Complex::new(u, -0.5);
        let v = Complex::new(0.0, u * k).exp() * heston_cf(h, z, t);
        v.re / (u * u + 0.25)
    };
    let i = quad::integrate_full(integrand, 0.0, f64::INFINITY, &[1.0, 10.0, 50.0], 1e-15, 1e-13).value;
    let call = forward - (forward * strike).sqrt() / PI * i;
    if strike > forward {
        (OptionKind::Call, discount * call.max(0.0))
    } else {
        (OptionKind::Put, discount * (call - (forward - strike)).max(0.0))
    }
}

// ---------------------------------------------------------------------------
// SABR

/// C_{τ,α} = √((e^{α²τ} − 1)/(τα²)).
pub fn sabr_vix_constant(sabr_alpha: f64, tau: f64) -> f64 {
    let x = sabr_alpha * sabr_alpha * tau;
    if x == 0.0 {
        1.0
    } else {
        (x.exp_m1() / x).sqrt()
    }
}

pub fn sabr_vix(m: &Sabr, y_t: f64, tau: f64) -> f64 {
    sabr_vix_constant(m.sabr_alpha, tau) * y_t
}

/// E (VIX_T − K)⁺ = C E(Y_T − K/C)⁺ with Y_T lognormal.
pub fn sabr_vix_call(m: &Sabr, strike: f64, dt: f64, tau: f64) -> f64 {
    let c = sabr_vix_constant(m.sabr_alpha, tau);
    c * bs_price(
        &BsInputs {
            forward: m.y0,
            strike: strike / c,
            vol: m.sabr_alpha,
            ttm: dt,
            discount: 1.0,
        },
        OptionKind::Call,
    )
}

// ---------------------------------------------------------------------------
// 3/2 and CEV-vol negative moments

/// E exp(ξ ∫₀ᵀ Z dt) for a 3/2 process Z with CIR shape α and vol γ,
/// φ = Z₀(e^{κT} − 1)/κ:
/// Γ(b−a)/Γ(b) (2/(γ²φ))^a ₁F₁(a; b; −2/(γ²φ)), a = −α/2 + √(α² − 8ξ/γ²)/2,
/// b = 1 + 2a + α. Divergent when the square root is imaginary.
pub fn integrated_inverse_cir_mgf(cir_shape_alpha: f64, gamma: f64, phi: f64, xi: f64) -> Result<MaybeFinite> {
    let al = cir_shape_alpha;
    let mut disc = al * al - 8.0 * xi / (gamma * gamma);
    // the boundary order itself is finite; absorb rounding there
    if disc < 0.0 && disc > -1e-12 * al * al {
        disc = 0.0;
    }
    if disc < 0.0 {
        return Ok(MaybeFinite::Divergent {
            last_estimate: f64::INFINITY,
        });
    }
    let cs_a = -al / 2.0 + disc.sqrt() / 2.0;
    let cs_b = 1.0 + 2.0 * cs_a + al;
    let x = 2.0 / (gamma * gamma * phi);
    let m = hyp1f1(cs_a, cs_b, -x)?;
    let v = (ln_gamma(cs_b - cs_a) - ln_gamma(cs_b) + cs_a * x.ln()).exp() * m;
    Ok(MaybeFinite::Finite { value: v, error: 0.0 })
}

/// E S_T^{−q} = E exp(q(q+1)/2 ∫₀ᵀ Z dt) for the 3/2 model with S₀ = 1 and ρ = 0.
pub fn three_halves_neg_moment(m: &ThreeHalves, q: f64, big_t: f64) -> Result<MaybeFinite> {
    ModelSpec::ThreeHalves(*m).validate()?;
    if m.rho != 0.0 {
        return Err(ModelError::Regime(format!("the closed form needs ρ = 0, got {}", m.rho)));
    }
    if q == 0.0 {
        return Ok(MaybeFinite::Finite { value: 1.0, error: 0.0 });
    }
    let phi = m.z0 * (m.kappa * big_t).exp_m1() / m.kappa;
    integrated_inverse_cir_mgf(m.cir_shape_alpha(), m.gamma, phi, q * (q + 1.0) / 2.0)
}

/// E S_T^{−q} for the CEV-vol model with ρ = 0: X = Y² is a 3/2 process with
/// shape 1/2, vol 2c and φ = X₀T.
pub fn cev_vol_neg_moment(m: &CevVol, q: f64, big_t: f64) -> Result<MaybeFinite> {
    if m.rho != 0.0 {
        return Err(ModelError::Regime(format!("the closed form needs ρ = 0, got {}", m.rho)));
    }
    if q == 0.0 {
        return Ok(MaybeFinite::Finite { value: 1.0, error: 0.0 });
    }
    integrated_inverse_cir_mgf(0.5, 2.0 * m.c, m.y0 * m.y0 * big_t, q * (q + 1.0) / 2.0)
}

/// VIX² = (1/τ) ∫₀^τ E[Z_{T+u} | Y_T = y] du = (2/(γ²τ)) ∫₀¹ r^{α−1} E₁((1−r) y ν_τ) dr,
/// with Z = 1/Y and ν_τ = 2κ/(γ²(e^{κτ} − 1)).
pub fn three_halves_vix2(m: &ThreeHalves, y: f64, tau: f64) -> f64 {
    let al = m.cir_shape_alpha();
    let g2 = m.gamma * m.gamma;
    let nu = 2.0 * m.kappa / (g2 * (m.kappa * tau).exp_m1());
    // s = r^α removes the r^{α−1} singularity
    let i = quad::integrate_full(
        |s: f64| {
            let one_minus_r = -(s.ln() / al).exp_m1();
            if one_minus_r <= 0.0 {
                return 0.0;
            }
            expint_e1(one_minus_r * y * nu)
        },
        0.0,
        1.0,
        &[],
        1e-300,
        1e-12,
    )
    .value;
    2.0 / (g2 * tau) * i / al
}

/// Second-order expansion (1/τ)∫ [1/y − (E Y_{T+u} − y)/y² + E(Y_{T+u} − y)²/y³] du.
pub fn three_halves_vix2_approx(m: &ThreeHalves, y: f64, tau: f64) -> f64 {
    let cir = m.cir();
    let i = quad::integrate(
        |u| {
            let d = cir.mean(y, u) - y;
            let second = cir.variance(y, u) + d * d;
            1.0 / y - d / (y * y) + second / (y * y * y)
        },
        0.0,
        tau,
        1e-14,
    );
    i / tau
}

// ---------------------------------------------------------------------------
// CEV vol moments, dY = Y² dB, time-scaled by c²

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CevMoment {
    Mean,
    Second,
    Log,
    Call { strike: f64 },
}

/// E g(Y_T) for dY = cY² dB, Y₀ = y. Uses E^c g(Y_T) = E^1 g(Y_{c²T}).
/// The log moment is ½(γₑ − 2 + log(2/T) + ∂ₐ₁F₁(0; 3/2; −1/(2Ty²))).
pub fn cev_vol_moments(c: f64, y: f64, big_t: f64, which: CevMoment) -> Result<f64> {
    if !(c > 0.0 && y > 0.0 && big_t > 0.0) {
        return Err(ModelError::Invalid(format!("need c, y, T > 0 (c = {c}, y = {y}, T = {big_t})")));
    }
    let t = c * c * big_t;
    Ok(match which {
        CevMoment::Mean => y * (1.0 - 2.0 * norm_cdf(-1.0 / (y * t.sqrt()))),
        CevMoment::Second => (2.0 * y * y / t).sqrt() * dawson(1.0 / (y * (2.0 * t).sqrt())),
        CevMoment::Log => {
            0.5 * (EULER_GAMMA - 2.0 + (2.0 / t).ln() + hyp1f1_da_at_zero(1.5, -1.0 / (2.0 * t * y * y))?)
        }
        CevMoment::Call { strike } => {
            let d = 1.0 / (y * t.sqrt());
            let k = 1.0 / (strike * t.sqrt());
            y * (norm_cdf(k - d) - norm_cdf(-d) + norm_cdf(d) - norm_cdf(d + k))
                - strike * (norm_cdf(k + d) - norm_cdf(d - k) + (norm_pdf(k + d) - norm_pdf(k - d)) / d)
        }
    })
}

/// Transition density of dY = cY² dB over `dt`.
pub fn cev_vol_density(c: f64, y: f64, z: f64, dt: f64) -> f64 {
    let s2 = c * c * dt;
    let (iz, iy) = (1.0 / z, 1.0 / y);
    y / (z * z * z) / (2.0 * PI * s2).sqrt()
        * ((-(iz - iy).powi(2) / (2.0 * s2)).exp() - (-(iz + iy).powi(2) / (2.0 * s2)).exp())
}

/// VIX² = (1/τ)∫₀^τ E[Y_{T+u}² | Y_T = y] du.
pub fn cev_vol_vix2(c: f64, y: f64, tau: f64) -> Result<f64> {
    let i = quad::integrate(
        |u| {
            if u == 0.0 {
                y * y
            } else {
                cev_vol_moments(c, y, u, CevMoment::Second).unwrap_or(f64::NAN)
            }
        },
        0.0,
        tau,
        1e-14 * y * y,
    );
    Ok(i / tau)
}

// ---------------------------------------------------------------------------
// Exp-OU

/// VIX² = (1/τ)∫₀^τ exp(2 E_T Y_{T+u} + 2 Var_T Y_{T+u}) du.
pub fn exp_ou_vix2(m: &ExpOu, y: f64, tau: f64) -> f64 {
    let f = |u: f64| {
        let e = (-m.kappa * u).exp();
        let mean = y * e + m.ybar * (1.0 - e);
        let var = m.gamma * m.gamma / (2.0 * m.kappa) * -(-2.0 * m.kappa * u).exp_m1();
        (2.0 * mean + 2.0 * var).exp()
    };
    let scale = f(0.0).max(f(tau));
    quad::integrate(f, 0.0, tau, 1e-15 * scale) / tau
}

// ---------------------------------------------------------------------------
// Jumps

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpAdjustment {
    /// −2λ E[e^Y − 1 − Y − Y²/2].
    pub additive: f64,
    pub variance_swap_rate: f64,
    /// Q_x = Var(X₁)/(log E e^{X₁} − E X₁), so that the swap rate is Q_x VIX²/2.
    pub multiplier: f64,
}

/// e^x − 1 − x − x²/2 without cancellation.
fn exp_rem3(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let (mut term, mut sum): (f64, f64) = (x * x * x / 6.0, 0.0);
        let mut n = 3.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) {
            sum += term;
            n += 1.0;
            term *= x / n;
        }
        sum
    } else {
        x.exp_m1() - x - x * x / 2.0
    }
}

impl JumpOverlay {
    /// (E e^Y − 1 − E Y, E Y², E[e^Y − 1 − Y − Y²/2]).
    fn moments(&self) -> (f64, f64, f64) {
        match self.law {
            JumpLaw::Gaussian { mean, sd } => {
                let s2 = sd * sd;
                let x = mean + s2 / 2.0;
                let comp = x.exp_m1() - mean;
                let rem = exp_rem3(x) + mean * s2 / 2.0 + s2 * s2 / 8.0;
                (comp, mean * mean + s2, rem)
            }
        }
    }
}

/// Jump corrections to the variance-swap rate given the strip value VIX².
pub fn jump_adjustments(jump: &JumpOverlay, vix2: f64) -> Result<JumpAdjustment> {
    if !(jump.lambda >= 0.0 && vix2 > 0.0) {
        return Err(ModelError::Invalid(format!("need λ ≥ 0 and VIX² > 0 (λ = {}, VIX² = {vix2})", jump.lambda)));
    }
    let (comp, ey2, rem) = jump.moments();
    let additive = -2.0 * jump.lambda * rem;
    let diffusive = vix2 - 2.0 * jump.lambda * comp;
    let multiplier = (diffusive + jump.lambda * ey2) / (diffusive / 2.0 + jump.lambda * comp);
    Ok(JumpAdjustment {
        additive,
        variance_swap_rate: vix2 + additive,
        multiplier,
    })
}

// ---------------------------------------------------------------------------
// Table of moment relationships

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    /// Where E VIX_T^p = ∞.
    pub vix_moment: String,
    /// Where E e^{ξ VIX_T²} = ∞.
    pub mgf: String,
    /// Where E S_{T+τ}^{−q} = ∞.
    pub neg_moment: String,
}

fn row(model: &str, v: &str, m: &str, q: &str) -> TableRow {
    TableRow {
        model: model.into(),
        vix_moment: v.into(),
        mgf: m.into(),
        neg_moment: q.into(),
    }
}

/// Symbolic table of where each moment is infinite, one row per model.
pub fn summary_table() -> Vec<TableRow> {
    vec![
        row("CEV model, dS = S^a dW with 0 ≤ a < 1", "∀p > 0", "∀ξ > 0", "∀q > 0"),
        row("SABR with ρ ≤ 0", "p = ∞", "∀ξ > 0", "∀q > 0"),
        row(
            "CEV volatility, dS = S√Y dW and dY = cY² dB, with dW dB = ρ dt and ρ ≤ 0",
            "∀p > 3",
            "∀ξ > 3τc²/2",
            "∀q > (√(1+c²) − 1)/2",
        ),
        row(
            "Heston model",
            "p = ∞",
            "∀ξ ≥ 2κ²τ/(γ²(1−e^{−κT})(1−e^{−κτ}))",
            "∀q > 0 such that (qγρ+κ)² < γ²q(1+q) and T+τ ≥ T*(q)",
        ),
        row("3/2 model", "p = ∞", "∀ξ ≥ γ²τα(α+1)/2", "∀q > (√(1+γ²α²) − 1)/2"),
        row("Exp-OU model", "p = ∞", "∀ξ > 0", "∀q > 0"),
    ]
}

/// T*(q) = 2(π 1{qγρ+κ>0} + atan(−√(γ²q(1+q) − (qγρ+κ)²)/(qγρ+κ))) / √(γ²q(1+q) − (qγρ+κ)²).
pub const HESTON_T_STAR: &str =
    "T*(q) = 2(π·1{qγρ+κ>0} + atan(−√(γ²q(1+q)−(qγρ+κ)²)/(qγρ+κ)))/√(γ²q(1+q)−(qγρ+κ)²)";

/// The same table with each threshold evaluated for concrete parameters.
pub fn numeric_table(models: &[ModelSpec], t: f64, big_t: f64, tau: f64) -> Result<Vec<TableRow>> {
    let fmt = |x: f64| if x.is_infinite() { "∞".to_string() } else { format!("{x:.6}") };
    models
        .iter()
        .map(|m| {
            let b = moment_boundary(m, t, big_t, tau)?;
            let v = if b.vix_moment.is_infinite() {
                "p = ∞".to_string()
            } else {
                format!("∀p > {}", fmt(b.vix_moment))
            };
            let strict_xi = matches!(m, ModelSpec::CevVol(_)) || b.xi_tilde == 0.0;
            let x = match (b.xi_tilde, strict_xi) {
                (x, _) if x.is_infinite() => "none".to_string(),
                (x, true) => format!("∀ξ > {}", fmt(x)),
                (x, false) => format!("∀ξ ≥ {}", fmt(x)),
            };
            let q = if b.q_tilde.is_infinite() {
                "none".to_string()
            } else {
                format!("∀q > {}", fmt(b.q_tilde))
            };
            Ok(TableRow {
                model: m.name().into(),
                vix_moment: v,
                mgf: x,
                neg_moment: q,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heston() -> Heston {
        Heston {
            kappa: 2.0,
            ybar: 0.04,
            gamma: 0.25,
            rho: -0.7,
            y0: 0.04,
        }
    }

    #[test]
    fn vix_transform_limits() {
        let (a, b) = heston_vix_transform(2.0, 0.04, 30.0 / 365.0);
        assert!((a + b * 0.04 - 0.04).abs() < 1e-17);
        let (a, b) = heston_vix_transform(1e-12, 0.04, 30.0 / 365.0);
        assert!(a.abs() < 1e-13 && (b - 1.0).abs() < 1e-12);
        let (a, b) = heston_vix_transform(1e6, 0.04, 1.0);
        assert!((a - 0.04).abs() < 1e-7 && b < 1e-5);
    }

    #[test]
    fn cir_density_mass_and_mean() {
        let cir = heston().cir();
        let dt = 41.0 / 365.0;
        let f = |y: f64| cir.density(0.04, y, dt).unwrap();
        let mass = quad::integrate(f, 0.0, 2.0, 1e-12);
        let mean = quad::integrate(|y| y * f(y), 0.0, 2.0, 1e-12);
        assert!((mass - 1.0).abs() < 1e-6);
        assert!((mean - cir.mean(0.04, dt)).abs() < 1e-8);
    }

    #[test]
    fn cir_density_goes_stationary() {
        let cir = heston().cir();
        let sup = (1..400)
            .map(|i| {
                let y = 0.0005 * i as f64;
                (cir.density(0.1, y, 20.0).unwrap() - cir.stationary_density(y)).abs()
            })
            .fold(0.0, f64::max);
        assert!(sup < 1e-8, "{sup}");
    }

    #[test]
    fn heston_mgf_matches_closed_form() {
        let h = heston();
        let (dt, tau) = (41.0 / 365.0, 30.0 / 365.0);
        let xt = heston_xi_tilde(&h, dt, tau);
        for f in [0.1, 0.5, 0.9] {
            let q = heston_vix2_mgf(&h, f * xt, dt, tau).unwrap();
            let exact = heston_vix2_mgf_exact(&h, f * xt, dt, tau);
            assert!(q.is_finite());
            assert!((q.value() / exact - 1.0).abs() < 1e-8, "{f}: {q:?} vs {exact}");
        }
        assert!(!heston_vix2_mgf(&h, 1.1 * xt, dt, tau).unwrap().is_finite());
        assert_eq!(heston_vix2_mgf(&h, 0.0, dt, tau).unwrap().value(), 1.0);
    }

    #[test]
    fn heston_stationary_limit() {
        let h = heston();
        let tau = 30.0 / 365.0;
        let xi = 0.3 * heston_xi_tilde(&h, 1e3, tau);
        let q = heston_vix2_mgf(&h, xi, 50.0, tau).unwrap().value();
        assert!((q / heston_vix2_mgf_stationary(&h, xi, tau) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn explosion_time_brackets_riccati() {
        let h = Heston {
            kappa: 0.5,
            ybar: 0.04,
            gamma: 0.6,
            rho: 0.5,
            y0: 0.04,
        };
        for q in [2.0, 4.0, 8.0] {
            let ts = heston_explosion_time(&h, -q).unwrap();
            assert!(heston_moment(&h, -q, 0.9 * ts, 20000).is_finite());
            assert!(!heston_moment(&h, -q, 1.05 * ts, 20000).is_finite());
        }
    }

    #[test]
    fn three_halves_boundary_values() {
        let m = ThreeHalves {
            kappa: 2.0,
            ybar: 0.09,
            gamma: 0.3,
            rho: 0.0,
            z0: 1.0 / 0.09,
        };
        assert!((m.cir_shape_alpha() - 3.0).abs() < 1e-12);
        let tau = 30.0 / 365.0;
        assert!((three_halves_xi_tilde(&m, tau) - 0.54 * tau).abs() < 1e-15);
        let qt = three_halves_q_tilde(&m);
        assert!((qt - (1.81_f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!(three_halves_neg_moment(&m, qt, 0.5).unwrap().is_finite());
        assert!(!three_halves_neg_moment(&m, 1.05 * qt, 0.5).unwrap().is_finite());
        let tiny = three_halves_neg_moment(&m, 1e-9, 0.5).unwrap().value();
        assert!((tiny - 1.0).abs() < 1e-6);
    }

    #[test]
    fn three_halves_vix_map_agrees_with_inverse_mean() {
        let m = ThreeHalves {
            kappa: 2.0,
            ybar: 0.375,
            gamma: 1.0,
            rho: 0.0,
            z0: 1.0,
        };
        let tau = 30.0 / 365.0;
        for y in [0.01, 0.05, 0.4] {
            let direct = quad::integrate(|u| m.cir().inverse_mean(y, u).unwrap(), 0.0, tau, 1e-12) / tau;
            let v = three_halves_vix2(&m, y, tau);
            assert!((v / direct - 1.0).abs() < 1e-9, "{y}: {v} vs {direct}");
        }
    }

    #[test]
    fn cev_vol_table_against_density() {
        let (c, y, t) = (1.3, 0.8, 0.6 / 1.69);
        let f = |z: f64| cev_vol_density(c, y, z, t);
        let pts = [0.0, 0.2, 0.4, 0.8, 1.6, 4.0, 16.0, f64::INFINITY];
        let e = |g: &dyn Fn(f64) -> f64| {
            pts.windows(2).map(|w| quad::integrate(|z| g(z) * f(z), w[0], w[1], 1e-14)).sum::<f64>()
        };
        let m1 = e(&|z| z);
        let m2 = e(&|z| z * z);
        let ml = e(&|z| z.ln());
        assert!((cev_vol_moments(c, y, t, CevMoment::Mean).unwrap() - m1).abs() < 1e-10);
        assert!((cev_vol_moments(c, y, t, CevMoment::Second).unwrap() - m2).abs() < 1e-9);
        assert!((cev_vol_moments(c, y, t, CevMoment::Log).unwrap() - ml).abs() < 1e-9);
        // frozen from a 30-digit quadrature at (y, T) = (0.8, 0.6), c = 1
        assert!((ml + 0.453_339_779_190_289_86).abs() < 1e-9);
    }

    #[test]
    fn exp_ou_frozen_and_monotone() {
        let m = ExpOu {
            kappa: 1.0,
            ybar: -1.5,
            gamma: 1e-9,
            rho: 0.0,
            y0: -1.5,
        };
        assert!((exp_ou_vix2(&m, -1.5, 0.1) - (-3.0_f64).exp()).abs() < 1e-12);
        let m = ExpOu { gamma: 0.8, ..m };
        assert!(exp_ou_vix2(&m, -1.0, 0.1) > exp_ou_vix2(&m, -1.2, 0.1));
    }

    #[test]
    fn jumps_reduce_to_identity() {
        let j = JumpOverlay {
            lambda: 0.0,
            law: JumpLaw::Gaussian { mean: -0.1, sd: 0.2 },
        };
        let a = jump_adjustments(&j, 0.04).unwrap();
        assert_eq!(a.additive, 0.0);
        assert_eq!(a.multiplier, 2.0);
        assert_eq!(a.variance_swap_rate, 0.04);
    }

    #[test]
    fn sabr_constant_limit() {
        assert_eq!(sabr_vix_constant(0.0, 0.1), 1.0);
        assert!((sabr_vix_constant(1e-6, 0.1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_has_six_rows() {
        assert_eq!(summary_table().len(), 6);
    }
}
