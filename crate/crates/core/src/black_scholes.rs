//! Black (forward-form) pricing and implied-volatility inversion.
//!
//! The same formulas serve both markets; for the vol index the forward is the
//! VIX future X_{t,T}, never spot VIX.

use crate::market_data::{OptionKind, OptionSlice};
use crate::special_fn::{norm_cdf, norm_pdf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsInputs {
    pub forward: f64,
    pub strike: f64,
    pub vol: f64,
    pub ttm: f64,
    pub discount: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BsError {
    #[error("price {price} outside the no-arbitrage band [{lower}, {upper}]")]
    BandViolation { price: f64, lower: f64, upper: f64 },
    #[error("invalid inputs: {0}")]
    Invalid(String),
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
}

/// (d₊, d₋) = ln(F/K)/(σ√T) ± σ√T/2.
pub fn d_pm(forward: f64, strike: f64, total_sd: f64) -> (f64, f64) {
    let x = (forward / strike).ln() / total_sd;
    (x + 0.5 * total_sd, x - 0.5 * total_sd)
}

/// Black price of a call or put.
pub fn bs_price(inp: &BsInputs, kind: OptionKind) -> f64 {
    let BsInputs {
        forward: f,
        strike: k,
        vol,
        ttm,
        discount: b,
    } = *inp;
    let sd = vol * ttm.sqrt();
    if sd <= 0.0 {
        return b * match kind {
            OptionKind::Call => (f - k).max(0.0),
            OptionKind::Put => (k - f).max(0.0),
        };
    }
    if sd.is_infinite() {
        return b * match kind {
            OptionKind::Call => f,
            OptionKind::Put => k,
        };
    }
    let (dp, dm) = d_pm(f, k, sd);
    b * match kind {
        OptionKind::Call => f * norm_cdf(dp) - k * norm_cdf(dm),
        OptionKind::Put => k * norm_cdf(-dm) - f * norm_cdf(-dp),
    }
}

/// ∂price/∂σ (same for calls and puts).
pub fn bs_vega(inp: &BsInputs) -> f64 {
    let sd = inp.vol * inp.ttm.sqrt();
    if sd <= 0.0 || !sd.is_finite() {
        return 0.0;
    }
    let (dp, _) = d_pm(inp.forward, inp.strike, sd);
    inp.discount * inp.forward * norm_pdf(dp) * inp.ttm.sqrt()
}

/// Implied volatility. Returns 0 at the intrinsic edge and +∞ at the upper
/// edge of the band; errors outside it.
pub fn implied_vol(
    price: f64,
    forward: f64,
    strike: f64,
    ttm: f64,
    discount: f64,
    kind: OptionKind,
) -> Result<f64, BsError> {
    if !(forward > 0.0 && strike > 0.0 && ttm > 0.0 && discount > 0.0 && discount <= 1.0) {
        return Err(BsError::Invalid(format!(
            "forward {forward}, strike {strike}, ttm {ttm}, discount {discount}"
        )));
    }
    let (lower, upper) = crate::market_data::static_band(forward, strike, discount, kind);
    let eps = 1e-14 * discount * forward.max(strike);
    if !(price >= lower - eps && price <= upper + eps) {
        return Err(BsError::BandViolation { price, lower, upper });
    }
    // Work with the out-of-the-money option in undiscounted units; its price
    // is the time value and carries all the information.
    let otm_kind = if strike <= forward { OptionKind::Put } else { OptionKind::Call };
    let target = if otm_kind == kind {
        price / discount
    } else {
        match kind {
            OptionKind::Call => price / discount - (forward - strike),
            OptionKind::Put => price / discount - (strike - forward),
        }
    };
    let cap = match otm_kind {
        OptionKind::Call => forward,
        OptionKind::Put => strike,
    };
    if target <= 1e-15 * cap.max(forward) || price <= lower {
        return Ok(0.0);
    }
    if target >= cap * (1.0 - 1e-15) || price >= upper {
        return Ok(f64::INFINITY);
    }

    let model = |s: f64| {
        bs_price(
            &BsInputs {
                forward,
                strike,
                vol: s,
                ttm,
                discount: 1.0,
            },
            otm_kind,
        )
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while model(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(f64::INFINITY);
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = model(s);
        if v > target {
            hi = s;
        } else {
            lo = s;
        }
        if (hi - lo) <= 1e-12 * hi.max(1e-3) || v == target {
            return Ok(s);
        }
        let vega = bs_vega(&BsInputs {
            forward,
            strike,
            vol: s,
            ttm,
            discount: 1.0,
        });
        let newton = if vega > 0.0 { s - (v - target) / vega } else { f64::NAN };
        s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(BsError::NonConvergence(200))
}

/// Implied vols for every quote of a slice, measured against the slice forward.
pub fn slice_implied_vols(slice: &OptionSlice) -> Vec<(f64, OptionKind, Result<f64, BsError>)> {
    slice
        .quotes
        .iter()
        .map(|q| {
            (
                q.strike,
                q.kind,
                implied_vol(q.price, slice.forward, q.strike, slice.ttm(), slice.discount, q.kind),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inp(f: f64, k: f64, v: f64, t: f64, b: f64) -> BsInputs {
        BsInputs {
            forward: f,
            strike: k,
            vol: v,
            ttm: t,
            discount: b,
        }
    }

    #[test]
    fn zero_vol_is_intrinsic() {
        assert_eq!(bs_price(&inp(110.0, 100.0, 0.0, 1.0, 1.0), OptionKind::Call), 10.0);
    }

    #[test]
    fn atm_call_closed_form() {
        let want = 100.0 * (2.0 * norm_cdf(0.1) - 1.0);
        let got = bs_price(&inp(100.0, 100.0, 0.2, 1.0, 1.0), OptionKind::Call);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn parity_with_discount() {
        let b = (-0.0028_f64 * 37.0 / 365.0).exp();
        for k in [600.0, 900.0, 1101.97, 1300.0] {
            let i = inp(1101.97, k, 0.35, 37.0 / 365.0, b);
            let lhs = bs_price(&i, OptionKind::Call) - bs_price(&i, OptionKind::Put);
            assert!((lhs - b * (1101.97 - k)).abs() < 1e-12 * 1101.97);
        }
    }

    #[test]
    fn round_trip() {
        let i = inp(100.0, 120.0, 0.2, 0.5, 0.99);
        let p = bs_price(&i, OptionKind::Call);
        let v = implied_vol(p, 100.0, 120.0, 0.5, 0.99, OptionKind::Call).unwrap();
        assert!((v - 0.2).abs() < 1e-10);
    }

    #[test]
    fn vix_call_uses_future_as_forward() {
        let x = 0.2775;
        let i = inp(x, 0.35, 0.9, 40.0 / 365.0, 1.0);
        let p = bs_price(&i, OptionKind::Call);
        let v = implied_vol(p, x, 0.35, 40.0 / 365.0, 1.0, OptionKind::Call).unwrap();
        assert!((v - 0.9).abs() < 1e-10);
    }

    #[test]
    fn below_intrinsic_is_band_error() {
        let e = implied_vol(5.0, 110.0, 100.0, 1.0, 1.0, OptionKind::Call).unwrap_err();
        assert!(matches!(e, BsError::BandViolation { lower, .. } if lower == 10.0));
    }

    #[test]
    fn band_edges() {
        assert_eq!(implied_vol(10.0, 110.0, 100.0, 1.0, 1.0, OptionKind::Call).unwrap(), 0.0);
        assert_eq!(
            implied_vol(110.0, 110.0, 100.0, 1.0, 1.0, OptionKind::Call).unwrap(),
            f64::INFINITY
        );
    }
}
