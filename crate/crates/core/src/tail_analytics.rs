//! The moment formula in both directions, tail-slope estimators, the
//! Hölder MGF inequality between the two markets and the static arbitrage
//! built when it fails.

use crate::black_scholes::implied_vol;
use crate::market_data::{put_call_split, OptionKind, OptionSlice, OtmQuote};
use crate::strip_replication::{
    mgf_claim_vix_strip, power_claim_call_strip, power_claim_put_strip, StripConfig, StripError,
    StripLeg, StripResult,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// σ̂²(T−t)/|log(K/F)| at the most extreme quote; a lower bound on the limsup.
    ExtremeQuote,
    /// Least-squares slope of total implied variance on |log-moneyness| over
    /// the last `n` quotes.
    Regression { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSlope {
    pub side: Side,
    pub beta: f64,
    pub estimator: Estimator,
    pub moneyness_cut: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBounds {
    pub q_tilde: f64,
    pub p_tilde: f64,
    pub xi_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TailError {
    #[error("need at least 2 quotes beyond |log-moneyness| {cut} on the {side:?} side, found {found}")]
    InsufficientQuotes { side: Side, cut: f64, found: usize },
    #[error("right-side bound needs 4ξ̃/τ ≥ 1, got {0}")]
    RightBoundPrecondition(f64),
    #[error("Hölder exponents must satisfy p, q > 1 and 1/p + 1/q = 1 (p = {p}, q = {q})")]
    Conjugate { p: f64, q: f64 },
    #[error("refusing to build an arbitrage portfolio: margin {0} is positive")]
    NoViolation(f64),
    #[error(transparent)]
    Strip(#[from] StripError),
}

/// m = 1/(2β) + β/8 − 1/2, with 1/0 = ∞.
pub fn beta_to_moment(beta: f64) -> f64 {
    if beta <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 / (2.0 * beta) + beta / 8.0 - 0.5).max(0.0)
}

/// β = 2 − 4(√(m²+m) − m), evaluated without cancellation for large m.
pub fn moment_to_beta(m: f64) -> f64 {
    if m.is_infinite() {
        return 0.0;
    }
    if m <= 0.0 {
        return 2.0;
    }
    let u = m / ((m * m + m).sqrt() + m);
    2.0 - 4.0 * u
}

/// Normalized implied-variance slope of one out-of-the-money quote.
fn quote_slope(slice: &OptionSlice, q: &OtmQuote) -> Option<(f64, f64)> {
    let x = (q.strike / slice.forward).ln().abs();
    if x == 0.0 {
        return None;
    }
    let v = implied_vol(q.price, slice.forward, q.strike, slice.ttm(), slice.discount, q.kind).ok()?;
    if !v.is_finite() {
        return None;
    }
    Some((x, v * v * slice.ttm()))
}

/// Tail slope of one wing. Quotes with |log(K/F)| < cut are ignored.
pub fn beta_from_slice(
    slice: &OptionSlice,
    side: Side,
    cut: f64,
    estimator: Estimator,
) -> Result<TailSlope, TailError> {
    let split = put_call_split(slice);
    let wing: Vec<&OtmQuote> = match side {
        Side::Left => split.puts.iter().rev().collect(),
        Side::Right => split.calls.iter().collect(),
    };
    // Ordered from the money outward; keep the part beyond the cut.
    let pts: Vec<(f64, f64)> = wing
        .iter()
        .filter_map(|q| quote_slope(slice, q))
        .filter(|&(x, _)| x >= cut)
        .collect();
    if pts.len() < 2 {
        return Err(TailError::InsufficientQuotes {
            side,
            cut,
            found: pts.len(),
        });
    }
    let beta = match estimator {
        Estimator::ExtremeQuote => {
            let (x, w) = pts[pts.len() - 1];
            w / x
        }
        Estimator::Regression { n } => {
            let tail = &pts[pts.len().saturating_sub(n.max(2))..];
            let k = tail.len() as f64;
            let mx = tail.iter().map(|p| p.0).sum::<f64>() / k;
            let my = tail.iter().map(|p| p.1).sum::<f64>() / k;
            let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
            sxy / sxx
        }
    };
    Ok(TailSlope {
        side,
        beta: beta.clamp(0.0, 2.0),
        estimator,
        moneyness_cut: cut,
    })
}

/// Lower bound on β_L (left) or β_R (right) implied by a finite ξ̃.
pub fn implied_vol_lower_bounds(xi_tilde: f64, tau: f64, side: Side) -> Result<f64, TailError> {
    let x = 4.0 * xi_tilde / tau;
    match side {
        Side::Left => Ok(moment_to_beta(x)),
        Side::Right => {
            if x < 1.0 {
                return Err(TailError::RightBoundPrecondition(x));
            }
            Ok(moment_to_beta(x - 1.0))
        }
    }
}

/// The three portfolio values at a declared (ξ, p, q).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioTriple {
    pub pi1: f64,
    pub pi2: f64,
    pub pi3: f64,
    pub xi: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfCheck {
    pub triple: PortfolioTriple,
    /// Π¹ + Π² − Π³; positive on arbitrage-free data.
    pub margin: f64,
    pub violated: bool,
    /// Units in which the underlier is measured inside the power claims.
    pub scale: f64,
    pub tau: f64,
    pub pi1: StripResult,
    pub pi2: StripResult,
    pub pi3: StripResult,
}

fn conjugate(p: f64) -> Result<f64, TailError> {
    if !(p > 1.0) {
        return Err(TailError::Conjugate { p, q: f64::NAN });
    }
    Ok(p / (p - 1.0))
}

/// Computes Π¹ (puts at T+τ), Π² (calls at T) and Π³ (VIX calls at T) and
/// the margin Π¹ + Π² − Π³.
///
/// The underlier is measured in units of `F_{t,T+τ}` inside the power claims.
/// Young's inequality holds in any units, and index levels raised to powers
/// in the hundreds would otherwise overflow.
pub fn check_mgf_inequality(
    spx_t: &OptionSlice,
    spx_ttau: &OptionSlice,
    vix_t: &OptionSlice,
    xi: f64,
    p: f64,
    cfg: &StripConfig,
) -> Result<MgfCheck, TailError> {
    let q = conjugate(p)?;
    let tau = spx_ttau.expiry - spx_t.expiry;
    let b_t_ttau = spx_ttau.discount / spx_t.discount;
    let scale = spx_ttau.forward;
    let pi1 = power_claim_put_strip(spx_ttau, xi, q, tau, b_t_ttau, scale, cfg)?;
    let pi2 = power_claim_call_strip(spx_t, xi, p, tau, b_t_ttau, scale, cfg)?;
    let pi3 = mgf_claim_vix_strip(vix_t, xi, cfg)?;
    let margin = if pi3.value.is_infinite() && (pi1.value + pi2.value).is_infinite() {
        // ∞ − ∞: the data say nothing at this ξ.
        f64::NAN
    } else {
        pi1.value + pi2.value - pi3.value
    };
    Ok(MgfCheck {
        triple: PortfolioTriple {
            pi1: pi1.value,
            pi2: pi2.value,
            pi3: pi3.value,
            xi,
            p,
            q,
        },
        margin,
        violated: margin <= 0.0,
        scale,
        tau,
        pi1,
        pi2,
        pi3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instrument {
    UnderlierOption,
    VolIndexOption,
    /// Zero-coupon bond paying 1 at the leg's expiry.
    Bond,
    /// Forward on the underlier or the vol index; zero entry cost.
    Forward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub portfolio: String,
    pub instrument: Instrument,
    pub kind: Option<OptionKind>,
    pub strike: Option<f64>,
    pub expiry: f64,
    /// Positive = long.
    pub quantity: f64,
    pub unit_price: f64,
    /// True for extrapolated strikes that are not listed.
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeList {
    pub trades: Vec<Trade>,
    /// Cash received at entry (−Σ quantity·price).
    pub entry_value: f64,
}

fn push_legs(out: &mut Vec<Trade>, name: &str, r: &StripResult, expiry: f64, sign: f64, inst: Instrument) {
    for l in &r.legs {
        let (instrument, kind, strike) = match l {
            StripLeg::Option { kind, strike, .. } => (inst, Some(*kind), Some(*strike)),
            StripLeg::Bond { .. } => (Instrument::Bond, None, None),
            StripLeg::Forward { .. } => (Instrument::Forward, None, None),
        };
        out.push(Trade {
            portfolio: name.into(),
            instrument,
            kind,
            strike,
            expiry,
            quantity: sign * l.quantity(),
            unit_price: l.price(),
            synthetic: l.synthetic(),
        });
    }
}

/// Static trade list for t < T: long Π¹ and Π², short Π³. Refuses when the
/// margin is positive.
pub fn arbitrage_portfolio_on_violation(
    check: &MgfCheck,
    spx_t: &OptionSlice,
    spx_ttau: &OptionSlice,
    vix_t: &OptionSlice,
) -> Result<TradeList, TailError> {
    if !(check.margin <= 0.0) {
        return Err(TailError::NoViolation(check.margin));
    }
    let mut trades = Vec::new();
    push_legs(&mut trades, "pi1", &check.pi1, spx_ttau.expiry, 1.0, Instrument::UnderlierOption);
    push_legs(&mut trades, "pi2", &check.pi2, spx_t.expiry, 1.0, Instrument::UnderlierOption);
    push_legs(&mut trades, "pi3", &check.pi3, vix_t.expiry, -1.0, Instrument::VolIndexOption);
    let cost: Vec<f64> = trades.iter().map(|t| t.quantity * t.unit_price).collect();
    let entry_value = -crate::quad::pairwise_sum(&cost);
    Ok(TradeList { trades, entry_value })
}

/// Which of the two expiry-date constructions applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpiryVariant {
    /// e^{ξVIX²} priced above the power claim on S_{T+τ}/F.
    LogContract,
    /// Power claim priced above Π¹ + Π².
    YoungSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpiryLeg {
    pub description: String,
    pub quantity: f64,
    /// Forward (undiscounted to T+τ) value of one unit.
    pub unit_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpiryArbitrage {
    pub variant: ExpiryVariant,
    pub legs: Vec<ExpiryLeg>,
    /// Forward value of the position at T; ≤ 0 for an arbitrage.
    pub entry_cost: f64,
}

/// Arbitrage at t = T in forward terms. `middle` is the forward value of the
/// claim (S_{T+τ}/F_{T,T+τ})^{−2ξ/τ}; `pi1`, `pi2` are the forward values of
/// the two power portfolios. Returns `None` when neither leg is reversed.
pub fn arbitrage_at_expiry(
    vix: f64,
    xi: f64,
    tau: f64,
    pi1: f64,
    pi2: f64,
    middle: f64,
    b_t_ttau: f64,
) -> Option<ExpiryArbitrage> {
    let x0 = xi * vix * vix;
    let e0 = x0.exp();
    if e0 >= middle {
        let legs = vec![
            ExpiryLeg {
                description: format!("short claims on -(2ξ/τ)·log(S/F), ξ = {xi}, τ = {tau}"),
                quantity: -e0,
                unit_value: x0,
            },
            ExpiryLeg {
                description: "long claim on (S/F)^(-2ξ/τ)".into(),
                quantity: 1.0,
                unit_value: middle,
            },
            ExpiryLeg {
                description: "bonds maturing at T+τ".into(),
                quantity: (x0 - 1.0) * e0,
                unit_value: 1.0,
            },
        ];
        let entry_cost = legs.iter().map(|l| l.quantity * l.unit_value).sum();
        return Some(ExpiryArbitrage {
            variant: ExpiryVariant::LogContract,
            legs,
            entry_cost,
        });
    }
    if middle >= pi1 + pi2 {
        let legs = vec![
            ExpiryLeg {
                description: "short claim on (S/F)^(-2ξ/τ)".into(),
                quantity: -1.0,
                unit_value: middle,
            },
            ExpiryLeg {
                description: "long B_{T,T+τ} units of the put portfolio".into(),
                quantity: b_t_ttau,
                unit_value: pi1 / b_t_ttau,
            },
            ExpiryLeg {
                description: "bonds maturing at T+τ, one per unit of the settled call portfolio".into(),
                quantity: pi2,
                unit_value: 1.0,
            },
        ];
        let entry_cost = legs.iter().map(|l| l.quantity * l.unit_value).sum();
        return Some(ExpiryArbitrage {
            variant: ExpiryVariant::YoungSplit,
            legs,
            entry_cost,
        });
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub beta_l: Option<f64>,
    pub beta_r: Option<f64>,
    pub beta_r_vix: Option<f64>,
    pub q_tilde: f64,
    pub p_tilde: f64,
    /// Upper estimate of ξ̃ from the fitted decay of the VIX call wing.
    pub xi_tilde: f64,
    pub gpd_alpha: Option<f64>,
    pub xi: f64,
    pub p: f64,
    pub inequality_margin: f64,
    pub triple: PortfolioTriple,
    pub flags: Vec<String>,
}

/// Collects slopes, implied moment bounds, the GPD index and the margin.
pub fn tail_report(
    spx_t: &OptionSlice,
    spx_ttau: &OptionSlice,
    vix_t: &OptionSlice,
    xi: f64,
    p: f64,
    cfg: &StripConfig,
) -> Result<TailReport, TailError> {
    let est = Estimator::ExtremeQuote;
    let mut flags = Vec::new();
    let mut get = |s: &OptionSlice, side, name: &str| match beta_from_slice(s, side, 0.0, est) {
        Ok(t) => Some(t.beta),
        Err(e) => {
            flags.push(format!("{name}: {e}"));
            None
        }
    };
    let beta_l = get(spx_ttau, Side::Left, "beta_L");
    let beta_r = get(spx_t, Side::Right, "beta_R");
    let beta_r_vix = get(vix_t, Side::Right, "beta_R_vix");
    let check = check_mgf_inequality(spx_t, spx_ttau, vix_t, xi, p, cfg)?;
    for (n, r) in [("pi1", &check.pi1), ("pi2", &check.pi2), ("pi3", &check.pi3)] {
        for note in &r.diagnostics.notes {
            flags.push(format!("{n}: {note}"));
        }
    }
    if check.violated {
        flags.push("MGF inequality violated".into());
    }
    let gpd_alpha = beta_r_vix
        .filter(|b| *b > 0.0 && *b < 2.0)
        .map(|b| crate::svi_evt::gpd_alpha(b));
    Ok(TailReport {
        beta_l,
        beta_r,
        beta_r_vix,
        q_tilde: beta_l.map(beta_to_moment).unwrap_or(f64::NAN),
        p_tilde: beta_r.map(beta_to_moment).unwrap_or(f64::NAN),
        xi_tilde: check.pi3.diagnostics.decay_rate.unwrap_or(f64::NAN),
        gpd_alpha,
        xi,
        p,
        inequality_margin: check.margin,
        triple: check.triple,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(beta_to_moment(2.0), 0.0);
        assert_eq!(moment_to_beta(f64::INFINITY), 0.0);
        assert_eq!(moment_to_beta(0.0), 2.0);
        assert_eq!(beta_to_moment(0.0), f64::INFINITY);
    }

    #[test]
    fn unit_moment() {
        let want = 2.0 - 4.0 * (2.0_f64.sqrt() - 1.0);
        assert!((moment_to_beta(1.0) - want).abs() < 1e-15);
        // Inverse by bisection on the decreasing map.
        let (mut lo, mut hi) = (1e-9, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if beta_to_moment(mid) > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - want).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_cases() {
        let tau = 30.0 / 365.0;
        assert_eq!(implied_vol_lower_bounds(0.0, tau, Side::Left).unwrap(), 2.0);
        assert!(implied_vol_lower_bounds(1e12, tau, Side::Left).unwrap() < 1e-10);
        let b = implied_vol_lower_bounds(tau / 4.0, tau, Side::Left).unwrap();
        assert!((b - (2.0 - 4.0 * (2.0_f64.sqrt() - 1.0))).abs() < 1e-14);
        assert!(implied_vol_lower_bounds(tau / 8.0, tau, Side::Right).is_err());
        // Closed form of part 2 agrees with the shifted moment map.
        let x: f64 = 3.0;
        let direct = -2.0 - 4.0 * ((x * x - x).sqrt() - x);
        let b = implied_vol_lower_bounds(x * tau / 4.0, tau, Side::Right).unwrap();
        assert!((b - direct).abs() < 1e-12);
    }

    #[test]
    fn expiry_variant_selection() {
        // e^{ξVIX²} above the middle claim: log-contract construction.
        let a = arbitrage_at_expiry(0.3, 2.0, 0.08, 5.0, 5.0, 1.1, 0.999).unwrap();
        assert_eq!(a.variant, ExpiryVariant::LogContract);
        assert!(a.entry_cost < 0.0);
        assert!((a.entry_cost - (1.1 - (2.0_f64 * 0.09).exp())).abs() < 1e-14);
        // Only the Young leg reversed.
        let a = arbitrage_at_expiry(0.3, 2.0, 0.08, 0.6, 0.6, 1.5, 0.999).unwrap();
        assert_eq!(a.variant, ExpiryVariant::YoungSplit);
        assert!((a.entry_cost - (1.2 - 1.5)).abs() < 1e-14);
        assert!(arbitrage_at_expiry(0.3, 2.0, 0.08, 1.0, 1.0, 1.5, 0.999).is_none());
    }
}
