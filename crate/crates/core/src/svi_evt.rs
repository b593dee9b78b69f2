//! SVI smiles, the butterfly test, the implied density and the
//! generalized-Pareto law of the right tail.
//!
//! Total implied variance ω(k) = a + b(ρ(k−m) + √((k−m)² + σ²)) in
//! log-moneyness k = log(K/F).

use crate::black_scholes::implied_vol;
use crate::market_data::{put_call_split, OptionSlice};
use crate::quad;
use crate::special_fn::norm_cdf;
use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SviError {
    #[error("need at least 5 usable quotes, found {0}")]
    TooFewQuotes(usize),
    #[error("optimizer failed: {0}")]
    NonConvergence(String),
    #[error("negative total variance {w} at k = {k}")]
    NegativeVariance { k: f64, w: f64 },
    #[error("butterfly arbitrage: g({k}) = {g} < 0, density is negative")]
    NegativeDensity { k: f64, g: f64 },
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("unsupported tail regime: {0}")]
    UnsupportedRegime(String),
}

type Result<T> = std::result::Result<T, SviError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SviParams {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub m: f64,
    pub sigma: f64,
}

/// Forward, time to expiry and discount factor of the fitted slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceMeta {
    pub forward: f64,
    pub ttm: f64,
    pub discount: f64,
}

impl SliceMeta {
    pub fn of(slice: &OptionSlice) -> Self {
        Self {
            forward: slice.forward,
            ttm: slice.ttm(),
            discount: slice.discount,
        }
    }
}

impl SviParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b >= 0.0 && self.rho.abs() <= 1.0 && self.sigma > 0.0) {
            return Err(SviError::Invalid(format!("{self:?}")));
        }
        let min_w = self.a + self.b * self.sigma * (1.0 - self.rho * self.rho).sqrt();
        if min_w < -1e-14 {
            return Err(SviError::Invalid(format!("minimum total variance {min_w} < 0")));
        }
        Ok(())
    }

    pub fn w(&self, k: f64) -> f64 {
        let x = k - self.m;
        self.a + self.b * (self.rho * x + x.hypot(self.sigma))
    }

    pub fn dw(&self, k: f64) -> f64 {
        let x = k - self.m;
        self.b * (self.rho + x / x.hypot(self.sigma))
    }

    pub fn d2w(&self, k: f64) -> f64 {
        let r = (k - self.m).hypot(self.sigma);
        self.b * self.sigma * self.sigma / (r * r * r)
    }

    /// Large-k slope b(1+ρ) of ω(k)/k; this is β_R for the slice.
    pub fn right_slope(&self) -> f64 {
        self.b * (1.0 + self.rho)
    }

    pub fn left_slope(&self) -> f64 {
        self.b * (1.0 - self.rho)
    }

    /// b(1+|ρ|) ≤ 4/T, the usual wing cap.
    pub fn within_wing_cap(&self, ttm: f64) -> bool {
        self.b * (1.0 + self.rho.abs()) <= 4.0 / ttm
    }
}

fn d_minus(p: &SviParams, k: f64) -> f64 {
    let s = p.w(k).sqrt();
    -k / s - 0.5 * s
}

/// C = B F (Φ(d₊) − e^k Φ(d₋)) with d± = −k/√ω ± √ω/2.
pub fn svi_call_price(params: &SviParams, meta: &SliceMeta, k: f64) -> Result<f64> {
    let w = params.w(k);
    if w < 0.0 {
        return Err(SviError::NegativeVariance { k, w });
    }
    if w == 0.0 {
        return Ok(meta.discount * meta.forward * (1.0 - k.exp()).max(0.0));
    }
    let s = w.sqrt();
    let (dp, dm) = (-k / s + 0.5 * s, -k / s - 0.5 * s);
    Ok(meta.discount * meta.forward * (norm_cdf(dp) - k.exp() * norm_cdf(dm)))
}

/// g(k) = (1 − kω'/(2ω))² − ω'²/4 (1/ω + 1/4) + ω''/2.
pub fn butterfly_g(params: &SviParams, k: f64) -> f64 {
    let (w, w1, w2) = (params.w(k), params.dw(k), params.d2w(k));
    let t = 1.0 - k * w1 / (2.0 * w);
    t * t - w1 * w1 / 4.0 * (1.0 / w + 0.25) + w2 / 2.0
}

/// Log of the density of log(VIX/F) at k; None where g ≤ 0.
fn ln_density(params: &SviParams, k: f64) -> Option<f64> {
    let g = butterfly_g(params, k);
    let w = params.w(k);
    if !(g > 0.0 && w > 0.0) {
        return None;
    }
    let dm = d_minus(params, k);
    Some(g.ln() - 0.5 * (2.0 * PI * w).ln() - 0.5 * dm * dm)
}

/// Density of log(S_T/F) at k: g(k)/√(2πω) · exp(−d₋²/2).
pub fn svi_density(params: &SviParams, k: f64) -> Result<f64> {
    let w = params.w(k);
    if !(w > 0.0) {
        return Err(SviError::NegativeVariance { k, w });
    }
    let g = butterfly_g(params, k);
    if g < 0.0 {
        return Err(SviError::NegativeDensity { k, g });
    }
    let dm = d_minus(params, k);
    Ok(g / (2.0 * PI * w).sqrt() * (-0.5 * dm * dm).exp())
}

/// Density in k from the second strike derivative of SVI call prices,
/// K·∂²C/∂K² / B, by central differences with step h in k.
pub fn breeden_litzenberger_density(params: &SviParams, meta: &SliceMeta, k: f64, h: f64) -> Result<f64> {
    let c = |k: f64| svi_call_price(params, meta, k);
    let (k0, k1, k2) = (k - h, k, k + h);
    let f = meta.forward;
    let (x0, x1, x2) = (f * k0.exp(), f * k1.exp(), f * k2.exp());
    let (c0, c1, c2) = (c(k0)?, c(k1)?, c(k2)?);
    // non-uniform second difference in K
    let d2 = 2.0 * (c0 / ((x1 - x0) * (x2 - x0)) - c1 / ((x2 - x1) * (x1 - x0)) + c2 / ((x2 - x1) * (x2 - x0)));
    Ok(x1 * d2 / meta.discount)
}

/// The k-grid used for g scans: [m − 10σ, k_max + 5] in steps of 0.01.
pub fn g_scan_grid(params: &SviParams, k_max: f64) -> Vec<f64> {
    let lo = params.m - 10.0 * params.sigma;
    let hi = k_max + 5.0;
    let n = ((hi - lo) / 0.01).ceil() as usize;
    (0..=n).map(|i| lo + 0.01 * i as f64).collect()
}

/// Smallest g on a grid and where it occurs.
pub fn min_g(params: &SviParams, grid: &[f64]) -> (f64, f64) {
    grid.iter()
        .map(|&k| (k, butterfly_g(params, k)))
        .fold((f64::NAN, f64::INFINITY), |acc, (k, g)| if g < acc.1 { (k, g) } else { acc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SviFit {
    pub params: SviParams,
    pub meta: SliceMeta,
    /// Weighted root-mean-square error in total variance.
    pub rmse: f64,
    pub n_quotes: usize,
    pub k_range: (f64, f64),
    pub min_g: f64,
    pub within_wing_cap: bool,
    pub notes: Vec<String>,
}

struct Data {
    k: Vec<f64>,
    w: Vec<f64>,
    wt: Vec<f64>,
}

fn lsq(cols: &[Vec<f64>], d: &Data) -> Option<(Vec<f64>, f64)> {
    let n = d.k.len();
    let a = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i] * d.wt[i]);
    let y = DVector::from_iterator(n, (0..n).map(|i| d.w[i] * d.wt[i]));
    let sol = a.clone().svd(true, true).solve(&y, 1e-15).ok()?;
    let r = &a * &sol - &y;
    Some((sol.iter().copied().collect(), r.norm_squared()))
}

/// Best (a, ρ, b) for fixed (m, σ), with c = bσ ≥ 0, |d| ≤ c and non-negative
/// minimum variance, where ω = a + d y + c √(y²+1), y = (k−m)/σ.
fn inner(d: &Data, m: f64, sigma: f64) -> (SviParams, f64) {
    let y: Vec<f64> = d.k.iter().map(|k| (k - m) / sigma).collect();
    let one = vec![1.0; y.len()];
    let root: Vec<f64> = y.iter().map(|y| y.hypot(1.0)).collect();
    let mut cands: Vec<(f64, f64, f64, f64)> = Vec::new(); // (a, d, c, sse)
    if let Some((s, e)) = lsq(&[one.clone(), y.clone(), root.clone()], d) {
        cands.push((s[0], s[1], s[2], e));
    }
    for sign in [1.0, -1.0] {
        let wing: Vec<f64> = y.iter().zip(&root).map(|(y, r)| sign * y + r).collect();
        if let Some((s, e)) = lsq(&[one.clone(), wing.clone()], d) {
            cands.push((s[0], sign * s[1], s[1], e));
        }
        if let Some((s, e)) = lsq(&[wing], d) {
            cands.push((0.0, sign * s[0], s[0], e));
        }
    }
    if let Some((s, e)) = lsq(&[one], d) {
        cands.push((s[0], 0.0, 0.0, e));
    }
    let feasible = |&(a, dd, c, _): &(f64, f64, f64, f64)| {
        c >= 0.0 && dd.abs() <= c * (1.0 + 1e-12) && a + (c * c - dd * dd).max(0.0).sqrt() >= -1e-14
    };
    let best = cands
        .into_iter()
        .filter(feasible)
        .min_by(|x, y| x.3.total_cmp(&y.3))
        .unwrap_or((0.0, 0.0, 0.0, f64::INFINITY));
    let (a, dd, c, sse) = best;
    let b = c / sigma;
    let rho = if c > 0.0 { (dd / c).clamp(-1.0, 1.0) } else { 0.0 };
    (SviParams { a, b, rho, m, sigma }, sse)
}

struct Outer<'a>(&'a Data);

impl CostFunction for Outer<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let sigma = p[1].exp();
        if !sigma.is_finite() || sigma < 1e-8 || sigma > 1e3 {
            return Ok(f64::INFINITY);
        }
        Ok(inner(self.0, p[0], sigma).1)
    }
}

fn halton(i: usize, base: usize) -> f64 {
    let (mut f, mut r, mut i) = (1.0, 0.0, i);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Total-variance points (k, ω, weight) of the out-of-the-money quotes.
pub fn total_variance_points(slice: &OptionSlice) -> Vec<(f64, f64, f64)> {
    let split = put_call_split(slice);
    let t = slice.ttm();
    split
        .puts
        .iter()
        .chain(&split.calls)
        .filter_map(|q| {
            let v = implied_vol(q.price, slice.forward, q.strike, t, slice.discount, q.kind).ok()?;
            if !(v.is_finite() && v > 0.0) {
                return None;
            }
            let wt = slice
                .quote(q.strike, q.kind)
                .and_then(|oq| oq.spread())
                .filter(|s| *s > 0.0)
                .map(|s| 1.0 / s)
                .unwrap_or(1.0);
            Some(((q.strike / slice.forward).ln(), v * v * t, wt))
        })
        .collect()
}

/// Weighted least squares in total variance. Five Halton starts over (m, log σ)
/// plus `init` if given, each refined by Nelder-Mead with (a, b, ρ) solved
/// linearly.
pub fn svi_fit(slice: &OptionSlice, init: Option<SviParams>) -> Result<SviFit> {
    let pts = total_variance_points(slice);
    svi_fit_points(&pts, SliceMeta::of(slice), init)
}

pub fn svi_fit_points(pts: &[(f64, f64, f64)], meta: SliceMeta, init: Option<SviParams>) -> Result<SviFit> {
    if pts.len() < 5 {
        return Err(SviError::TooFewQuotes(pts.len()));
    }
    // Normalize weights so the cost does not depend on their scale.
    let wmax = pts.iter().map(|p| p.2).fold(0.0, f64::max);
    let data = Data {
        k: pts.iter().map(|p| p.0).collect(),
        w: pts.iter().map(|p| p.1).collect(),
        wt: pts.iter().map(|p| p.2 / wmax).collect(),
    };
    let kmin = data.k.iter().copied().fold(f64::INFINITY, f64::min);
    let kmax = data.k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (kmax - kmin).max(1e-3);

    let mut starts: Vec<[f64; 2]> = Vec::new();
    if let Some(p) = init {
        starts.push([p.m, p.sigma.max(1e-6).ln()]);
    }
    for i in 1..=5 {
        let m = kmin + span * halton(i, 2);
        let ls = (0.01_f64).ln() + ((2.0_f64).ln() - (0.01_f64).ln()) * halton(i, 3);
        starts.push([m, ls]);
    }

    let mut best: Option<(SviParams, f64)> = None;
    for s in starts {
        let simplex = vec![
            vec![s[0], s[1]],
            vec![s[0] + 0.1 * span, s[1]],
            vec![s[0], s[1] + 0.5],
        ];
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(1e-30)
            .map_err(|e| SviError::NonConvergence(e.to_string()))?;
        let res = Executor::new(Outer(&data), solver)
            .configure(|st| st.max_iters(3000))
            .run()
            .map_err(|e| SviError::NonConvergence(e.to_string()))?;
        let st = res.state();
        let Some(p) = st.get_best_param() else { continue };
        let (params, sse) = inner(&data, p[0], p[1].exp());
        if best.as_ref().map_or(true, |b| sse < b.1) {
            best = Some((params, sse));
        }
    }
    let (params, sse) = best.ok_or_else(|| SviError::NonConvergence("no start produced a fit".into()))?;
    if !sse.is_finite() {
        return Err(SviError::NonConvergence("no feasible parameters".into()));
    }
    let wsum: f64 = data.wt.iter().map(|w| w * w).sum();
    let (_, g) = min_g(&params, &g_scan_grid(&params, kmax));
    let mut notes = Vec::new();
    let cap = params.within_wing_cap(meta.ttm);
    if !cap {
        notes.push(format!("b(1+|ρ|) = {} exceeds 4/T", params.b * (1.0 + params.rho.abs())));
    }
    if g < 0.0 {
        notes.push(format!("butterfly arbitrage: min g = {g}"));
    }
    Ok(SviFit {
        params,
        meta,
        rmse: (sse / wsum).sqrt(),
        n_quotes: pts.len(),
        k_range: (kmin, kmax),
        min_g: g,
        within_wing_cap: cap,
        notes,
    })
}

/// ½(√(1/β) + √β/2)². Defined on (0, 2]; see [`gpd_tail`] for the checked version.
pub fn gpd_alpha(beta: f64) -> f64 {
    0.5 * ((1.0 / beta).sqrt() + beta.sqrt() / 2.0).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdTail {
    pub alpha: f64,
    pub beta_r: f64,
}

impl GpdTail {
    /// Scaling function a(x) = x/α.
    pub fn scale(&self, x: f64) -> f64 {
        x / self.alpha
    }

    /// 1 − G_α(y) = (1 + y/α)^{−α}.
    pub fn survival(&self, y: f64) -> f64 {
        (1.0 + y / self.alpha).powf(-self.alpha)
    }
}

/// GPD index of the peaks over a high threshold for a right slope β ∈ (0, 2).
/// β = 2 may admit arbitrage and β = 0 has no power tail, so both are rejected.
pub fn gpd_tail(beta_r_vix: f64) -> Result<GpdTail> {
    if !(beta_r_vix > 0.0 && beta_r_vix < 2.0) {
        return Err(SviError::UnsupportedRegime(format!(
            "right slope {beta_r_vix} outside (0, 2): at 2 the SVI wing may admit arbitrage, at 0 the tail is not heavy and needs a different scaling"
        )));
    }
    Ok(GpdTail {
        alpha: gpd_alpha(beta_r_vix),
        beta_r: beta_r_vix,
    })
}

/// ∫_{k0}^∞ density(k)/density(k0) dk.
fn scaled_tail(params: &SviParams, k0: f64, l0: f64) -> Result<f64> {
    let mut bad = None;
    let r = quad::integrate_full(
        |k| match ln_density(params, k) {
            Some(l) => (l - l0).exp(),
            None => {
                bad.get_or_insert(k);
                0.0
            }
        },
        k0,
        f64::INFINITY,
        &[],
        1e-300,
        1e-11,
    );
    if let Some(k) = bad {
        return Err(SviError::NegativeDensity {
            k,
            g: butterfly_g(params, k),
        });
    }
    Ok(r.value)
}

/// P(S ≥ x + y·x/α | S ≥ x) under the SVI density, α from the fitted right
/// slope b(1+ρ). Evaluated in log space so far thresholds do not underflow.
pub fn pot_ratio(params: &SviParams, forward: f64, x: f64, y: f64) -> Result<f64> {
    if !(x > forward) {
        return Err(SviError::Invalid(format!("threshold {x} must lie above the forward {forward}")));
    }
    if y < 0.0 {
        return Err(SviError::Invalid(format!("excess {y} must be non-negative")));
    }
    if y == 0.0 {
        return Ok(1.0);
    }
    let gpd = gpd_tail(params.right_slope())?;
    let k0 = (x / forward).ln();
    let k1 = (x * (1.0 + y / gpd.alpha) / forward).ln();
    let neg = |k| SviError::NegativeDensity {
        k,
        g: butterfly_g(params, k),
    };
    let l0 = ln_density(params, k0).ok_or_else(|| neg(k0))?;
    let l1 = ln_density(params, k1).ok_or_else(|| neg(k1))?;
    let i0 = scaled_tail(params, k0, l0)?;
    let i1 = scaled_tail(params, k1, l1)?;
    Ok((l1 - l0).exp() * i1 / i0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::black_scholes::{bs_price, BsInputs};
    use crate::market_data::{Market, OptionKind, OptionQuote};

    fn meta() -> SliceMeta {
        SliceMeta {
            forward: 1.0,
            ttm: 0.5,
            discount: 1.0,
        }
    }

    fn chain_from(p: &SviParams, meta: &SliceMeta, ks: &[f64]) -> OptionSlice {
        let quotes = ks
            .iter()
            .map(|&k| {
                let strike = meta.forward * k.exp();
                let kind = if k <= 0.0 { OptionKind::Put } else { OptionKind::Call };
                let vol = (p.w(k) / meta.ttm).sqrt();
                let price = bs_price(
                    &BsInputs {
                        forward: meta.forward,
                        strike,
                        vol,
                        ttm: meta.ttm,
                        discount: meta.discount,
                    },
                    kind,
                );
                OptionQuote::new(strike, price, kind, Market::VolIndex)
            })
            .collect();
        OptionSlice::new(Market::VolIndex, 0.0, meta.ttm, 0.0, meta.forward, quotes).unwrap()
    }

    #[test]
    fn recovers_known_params() {
        let truth = SviParams {
            a: 0.02,
            b: 0.15,
            rho: -0.3,
            m: 0.05,
            sigma: 0.2,
        };
        let ks: Vec<f64> = (0..41).map(|i| -0.8 + 0.04 * i as f64).collect();
        let pts: Vec<_> = ks.iter().map(|&k| (k, truth.w(k), 1.0)).collect();
        let fit = svi_fit_points(&pts, meta(), None).unwrap();
        let p = fit.params;
        for (x, y) in [(p.a, truth.a), (p.b, truth.b), (p.rho, truth.rho), (p.m, truth.m), (p.sigma, truth.sigma)] {
            assert!((x - y).abs() < 1e-6, "{p:?}");
        }
    }

    #[test]
    fn fit_from_prices() {
        let truth = SviParams {
            a: 0.04,
            b: 0.3,
            rho: 0.4,
            m: 0.1,
            sigma: 0.3,
        };
        let ks: Vec<f64> = (0..25).map(|i| -0.6 + 0.07 * i as f64).collect();
        let s = chain_from(&truth, &meta(), &ks);
        let fit = svi_fit(&s, None).unwrap();
        assert!(fit.rmse < 1e-8);
        assert!((fit.params.right_slope() - truth.right_slope()).abs() < 1e-5);
    }

    #[test]
    fn flat_smile_has_no_slope() {
        let pts: Vec<_> = (0..20).map(|i| (-0.5 + 0.05 * i as f64, 0.04 * 0.5, 1.0)).collect();
        let fit = svi_fit_points(&pts, meta(), None).unwrap();
        assert!(fit.params.b < 1e-8);
        assert!((fit.params.a - 0.02).abs() < 1e-8);
    }

    #[test]
    fn flat_g_is_one() {
        let p = SviParams {
            a: 0.02,
            b: 0.0,
            rho: 0.0,
            m: 0.0,
            sigma: 0.1,
        };
        for k in [-2.0, 0.0, 0.3, 4.0] {
            assert_eq!(butterfly_g(&p, k), 1.0);
        }
    }

    #[test]
    fn atm_price_matches_black() {
        let p = SviParams {
            a: 0.03,
            b: 0.2,
            rho: 0.1,
            m: 0.0,
            sigma: 0.25,
        };
        let m = meta();
        let c = svi_call_price(&p, &m, 0.0).unwrap();
        let want = bs_price(
            &BsInputs {
                forward: 1.0,
                strike: 1.0,
                vol: (p.w(0.0) / m.ttm).sqrt(),
                ttm: m.ttm,
                discount: 1.0,
            },
            OptionKind::Call,
        );
        assert!((c - want).abs() < 1e-15);
    }

    #[test]
    fn gpd_values() {
        assert!((gpd_alpha(2.0) - 1.0).abs() < 1e-15);
        assert!(gpd_tail(2.0).is_err());
        assert!(gpd_tail(0.0).is_err());
        let a = gpd_tail(0.4495 * 0.4495).unwrap().alpha;
        assert!((a - 3.0).abs() < 0.01, "{a}");
        let half = gpd_tail(0.5).unwrap().alpha;
        assert!((half - 0.5 * (2.0_f64.sqrt() + 0.5_f64.sqrt() / 2.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn textbook_arbitrage_params_fail_butterfly() {
        let p = SviParams {
            a: -0.0410,
            b: 0.1331,
            rho: 0.3060,
            m: 0.3586,
            sigma: 0.4153,
        };
        let (_, g) = min_g(&p, &g_scan_grid(&p, 1.5));
        assert!(g < 0.0);
    }

    fn fig4_like() -> SviParams {
        // right slope b(1+ρ) = 0.4495²
        SviParams {
            a: 0.01,
            b: 0.4495 * 0.4495 / 1.5,
            rho: 0.5,
            m: 0.1,
            sigma: 0.3,
        }
    }

    #[test]
    fn density_normalizes_and_is_a_martingale() {
        let p = fig4_like();
        let f = |k: f64| svi_density(&p, k).unwrap();
        let mass = quad::integrate(f, f64::NEG_INFINITY, f64::INFINITY, 1e-12);
        let mean = quad::integrate(|k| k.exp() * f(k), f64::NEG_INFINITY, f64::INFINITY, 1e-12);
        assert!((mass - 1.0).abs() < 1e-4, "{mass}");
        assert!((mean - 1.0).abs() < 1e-4, "{mean}");
    }

    #[test]
    fn pot_ratio_approaches_gpd() {
        let p = fig4_like();
        let alpha = gpd_tail(p.right_slope()).unwrap().alpha;
        let mut prev = f64::INFINITY;
        for x in [5.0, 10.0, 20.0] {
            let err = (0..=30)
                .map(|i| {
                    let y = 0.1 * alpha * i as f64;
                    (pot_ratio(&p, 1.0, x, y).unwrap() - (1.0 + y / alpha).powf(-alpha)).abs()
                })
                .fold(0.0, f64::max);
            assert!(err < prev, "x = {x}: {err} vs {prev}");
            prev = err;
        }
        assert!(prev < 0.05);
    }
}
