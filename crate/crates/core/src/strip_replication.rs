//! Static replication from a discrete strike grid.
//!
//! Every claim f(S_T) is valued through the out-of-the-money decomposition
//!
//! B·E f(S) = B f(F) + f'(F)·(forward, worth 0) + ∫₀^F f''(K) P(K) dK + ∫_F^∞ f''(K) C(K) dK,
//!
//! with the integral discretized by the trapezoid rule on the quoted strikes
//! plus optional extrapolated wings. The result is a list of legs whose
//! quantity-weighted prices sum to the value, so a strip can be traded as is.

use crate::black_scholes::{bs_price, implied_vol, BsInputs};
use crate::market_data::{put_call_split, OptionKind, OptionSlice, Tenor};
use crate::quad::{self, pairwise_sum, trapezoid_weights};
use crate::tail_analytics::{beta_from_slice, beta_to_moment, Estimator, Side};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailPolicy {
    Truncate,
    ExtrapolateFlatVol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripConfig {
    pub tail_policy: TailPolicy,
    /// Flat-vol wings run out to F·multiple and F/multiple.
    pub extrapolation_multiple: f64,
    /// Nodes per extrapolated wing.
    pub extrapolation_points: usize,
    /// Calls used by the VIX-wing decay fit.
    pub decay_fit_points: usize,
}

impl Default for StripConfig {
    fn default() -> Self {
        Self {
            tail_policy: TailPolicy::ExtrapolateFlatVol,
            extrapolation_multiple: 8.0,
            extrapolation_points: 120,
            decay_fit_points: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StripError {
    #[error("slice has no usable out-of-the-money quotes")]
    EmptyWings,
    #[error("negative log-contract value {0}; prices are inconsistent")]
    NegativeRadicand(f64),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// One position of a replicating strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StripLeg {
    Option {
        kind: OptionKind,
        strike: f64,
        quantity: f64,
        price: f64,
        /// Extrapolated strike, not a listed quote.
        synthetic: bool,
    },
    /// Zero-coupon bond paying 1 at the slice expiry.
    Bond { quantity: f64, price: f64 },
    /// Forward contract struck at the slice forward; costs nothing.
    Forward { quantity: f64 },
}

impl StripLeg {
    pub fn quantity(&self) -> f64 {
        match *self {
            StripLeg::Option { quantity, .. } | StripLeg::Bond { quantity, .. } | StripLeg::Forward { quantity } => {
                quantity
            }
        }
    }

    pub fn price(&self) -> f64 {
        match *self {
            StripLeg::Option { price, .. } | StripLeg::Bond { price, .. } => price,
            StripLeg::Forward { .. } => 0.0,
        }
    }

    pub fn synthetic(&self) -> bool {
        matches!(self, StripLeg::Option { synthetic: true, .. })
    }

    fn value(&self) -> f64 {
        let q = self.quantity();
        if q == 0.0 {
            0.0
        } else {
            q * self.price()
        }
    }
}

/// Strike weights of the option part of a strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripWeights {
    pub strikes: Vec<f64>,
    pub weights: Vec<f64>,
    pub tail_policy: TailPolicy,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StripDiagnostics {
    pub divergent: bool,
    pub offending_strikes: Vec<f64>,
    /// Fitted λ in C ≈ exp(c₀ + c₁ log K − λK²) on the VIX call wing.
    pub decay_rate: Option<f64>,
    pub quadrature_error: f64,
    /// Value carried by extrapolated strikes.
    pub extrapolation_contribution: f64,
    /// Estimated value beyond the outermost node, not included.
    pub truncation_remainder: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripResult {
    pub value: f64,
    pub error_bound: f64,
    pub legs: Vec<StripLeg>,
    pub tail_policy: TailPolicy,
    pub diagnostics: StripDiagnostics,
}

impl StripResult {
    pub fn weights(&self) -> StripWeights {
        let (strikes, weights) = self
            .legs
            .iter()
            .filter_map(|l| match *l {
                StripLeg::Option { strike, quantity, .. } => Some((strike, quantity)),
                _ => None,
            })
            .unzip();
        StripWeights {
            strikes,
            weights,
            tail_policy: self.tail_policy,
        }
    }

    fn divergent(policy: TailPolicy, diagnostics: StripDiagnostics) -> Self {
        Self {
            value: f64::INFINITY,
            error_bound: f64::INFINITY,
            legs: Vec::new(),
            tail_policy: policy,
            diagnostics: StripDiagnostics {
                divergent: true,
                ..diagnostics
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    k: f64,
    price: f64,
    kind: OptionKind,
    synthetic: bool,
}

/// How the wing beyond the last quoted call is continued.
#[derive(Debug, Clone, Copy)]
enum Upper {
    Policy,
    /// Fitted C(K) = exp(c0 + c1 ln K − λK²) out to `end`.
    Asymptote { c0: f64, c1: f64, lambda: f64, end: f64 },
}

fn otm_kind(k: f64, f: f64) -> OptionKind {
    if k <= f {
        OptionKind::Put
    } else {
        OptionKind::Call
    }
}

/// Flat-vol price at strike k using the implied vol of `anchor`.
fn flat_vol_pricer(slice: &OptionSlice, anchor: &Node) -> Option<impl Fn(f64) -> f64> {
    let (f, t, b) = (slice.forward, slice.ttm(), slice.discount);
    let vol = implied_vol(anchor.price, f, anchor.k, t, b, anchor.kind).ok()?;
    if !vol.is_finite() {
        return None;
    }
    Some(move |k: f64| {
        bs_price(
            &BsInputs {
                forward: f,
                strike: k,
                vol,
                ttm: t,
                discount: b,
            },
            otm_kind(k, f),
        )
    })
}

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    // n points strictly between a and b.
    let r = (b / a).ln() / (n + 1) as f64;
    (1..=n).map(|i| a * (r * i as f64).exp()).collect()
}

struct Grid {
    nodes: Vec<Node>,
    lower_model: Option<Box<dyn Fn(f64) -> f64>>,
    upper_model: Option<Box<dyn Fn(f64) -> f64>>,
    notes: Vec<String>,
}

fn build_grid(slice: &OptionSlice, cfg: &StripConfig, upper: Upper) -> Result<Grid, StripError> {
    let split = put_call_split(slice);
    let mut quoted: Vec<Node> = split
        .puts
        .iter()
        .chain(split.calls.iter())
        .map(|q| Node {
            k: q.strike,
            price: q.price,
            kind: q.kind,
            synthetic: false,
        })
        .collect();
    if quoted.is_empty() {
        return Err(StripError::EmptyWings);
    }
    quoted.sort_by(|a, b| a.k.total_cmp(&b.k));
    let f = slice.forward;
    let mut notes = Vec::new();
    if split.empty_puts {
        notes.push("no quotes below the forward".into());
    }
    if split.empty_calls {
        notes.push("no quotes above the forward".into());
    }

    let first = quoted[0];
    let last = quoted[quoted.len() - 1];
    let extrapolate = cfg.tail_policy == TailPolicy::ExtrapolateFlatVol;
    let mut lower_nodes = Vec::new();
    let mut lower_model: Option<Box<dyn Fn(f64) -> f64>> = None;
    match flat_vol_pricer(slice, &first) {
        Some(p) => {
            let lo = f / cfg.extrapolation_multiple;
            if extrapolate && first.k > lo {
                for k in geometric(lo, first.k, cfg.extrapolation_points)
                    .into_iter()
                    .chain(std::iter::once(lo))
                {
                    lower_nodes.push(Node {
                        k,
                        price: p(k),
                        kind: otm_kind(k, f),
                        synthetic: true,
                    });
                }
            }
            lower_model = Some(Box::new(p));
        }
        None => notes.push(format!("no implied vol at lowest strike {}; lower wing truncated", first.k)),
    }

    let mut upper_nodes = Vec::new();
    let mut upper_model: Option<Box<dyn Fn(f64) -> f64>> = None;
    match upper {
        Upper::Policy => match flat_vol_pricer(slice, &last) {
            Some(p) => {
                let hi = f * cfg.extrapolation_multiple;
                if extrapolate && last.k < hi {
                    for k in geometric(last.k, hi, cfg.extrapolation_points)
                        .into_iter()
                        .chain(std::iter::once(hi))
                    {
                        upper_nodes.push(Node {
                            k,
                            price: p(k),
                            kind: otm_kind(k, f),
                            synthetic: true,
                        });
                    }
                }
                upper_model = Some(Box::new(p));
            }
            None => notes.push(format!("no implied vol at highest strike {}; upper wing truncated", last.k)),
        },
        Upper::Asymptote { c0, c1, lambda, end } => {
            let model = move |k: f64| (c0 + c1 * k.ln() - lambda * k * k).exp();
            if end > last.k {
                let n = cfg.extrapolation_points.max(2);
                let h = (end - last.k) / n as f64;
                for i in 1..=n {
                    let k = last.k + h * i as f64;
                    upper_nodes.push(Node {
                        k,
                        price: model(k),
                        kind: OptionKind::Call,
                        synthetic: true,
                    });
                }
            }
            upper_model = Some(Box::new(model));
        }
    }

    lower_nodes.sort_by(|a, b| a.k.total_cmp(&b.k));
    let mut nodes = lower_nodes;
    nodes.extend(quoted);
    nodes.extend(upper_nodes);
    Ok(Grid {
        nodes,
        lower_model,
        upper_model,
        notes,
    })
}

fn trapezoid_subset(nodes: &[Node], g: &dyn Fn(&Node) -> f64) -> f64 {
    let mut idx: Vec<usize> = (0..nodes.len()).step_by(2).collect();
    if *idx.last().unwrap() != nodes.len() - 1 {
        idx.push(nodes.len() - 1);
    }
    let ks: Vec<f64> = idx.iter().map(|&i| nodes[i].k).collect();
    let w = trapezoid_weights(&ks);
    let terms: Vec<f64> = idx.iter().zip(&w).map(|(&i, w)| w * g(&nodes[i])).collect();
    pairwise_sum(&terms)
}

/// Static replication strip for a claim with payoff f, first derivative fp and second derivative fpp.
fn claim_strip(
    slice: &OptionSlice,
    f: &dyn Fn(f64) -> f64,
    fp: &dyn Fn(f64) -> f64,
    fpp: &dyn Fn(f64) -> f64,
    cfg: &StripConfig,
    upper: Upper,
    mut diagnostics: StripDiagnostics,
) -> Result<StripResult, StripError> {
    let grid = build_grid(slice, cfg, upper)?;
    diagnostics.notes.extend(grid.notes);
    let nodes = &grid.nodes;
    let ks: Vec<f64> = nodes.iter().map(|n| n.k).collect();
    let w = trapezoid_weights(&ks);
    let fwd = slice.forward;

    let mut legs = Vec::with_capacity(nodes.len() + 2);
    legs.push(StripLeg::Bond {
        quantity: f(fwd),
        price: slice.discount,
    });
    legs.push(StripLeg::Forward { quantity: fp(fwd) });
    let mut extrap = Vec::new();
    for (n, w) in nodes.iter().zip(&w) {
        let leg = StripLeg::Option {
            kind: n.kind,
            strike: n.k,
            quantity: w * fpp(n.k),
            price: n.price,
            synthetic: n.synthetic,
        };
        if n.synthetic {
            extrap.push(leg.value());
        }
        legs.push(leg);
    }
    let vals: Vec<f64> = legs.iter().map(StripLeg::value).collect();
    let value = pairwise_sum(&vals);

    let g = |n: &Node| fpp(n.k) * n.price;
    let full: Vec<f64> = nodes.iter().zip(&w).map(|(n, w)| w * g(n)).collect();
    let coarse = trapezoid_subset(nodes, &g);
    diagnostics.quadrature_error = (pairwise_sum(&full) - coarse).abs();
    diagnostics.extrapolation_contribution = pairwise_sum(&extrap);

    let lo = nodes[0].k;
    let hi = nodes[nodes.len() - 1].k;
    let mut remainder = 0.0;
    if let Some(m) = &grid.lower_model {
        let r = quad::integrate_full(|k| fpp(k) * m(k), 0.0, lo, &[], 1e-14, 1e-6);
        remainder += r.value.abs();
    }
    if let Some(m) = &grid.upper_model {
        let r = quad::integrate_full(|k| fpp(k) * m(k), hi, f64::INFINITY, &[], 1e-14, 1e-6);
        remainder += r.value.abs();
    }
    if !remainder.is_finite() {
        diagnostics.notes.push("tail remainder estimate is not finite".into());
    }
    diagnostics.truncation_remainder = remainder;
    let error_bound =
        diagnostics.quadrature_error + diagnostics.extrapolation_contribution.abs() + diagnostics.truncation_remainder;
    if !value.is_finite() {
        diagnostics.notes.push("strip value overflowed".into());
        return Ok(StripResult::divergent(cfg.tail_policy, diagnostics));
    }
    Ok(StripResult {
        value,
        error_bound,
        legs,
        tail_policy: cfg.tail_policy,
        diagnostics,
    })
}

/// Result of the VIX strip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VixEstimate {
    pub vix: f64,
    pub vix2: f64,
    pub error_bound: f64,
    /// The log-contract strip ∫ OTM(K)/K² dK.
    pub strip: StripResult,
}

/// VIX² = (2/(τB)) [∫₀^F P/K² dK + ∫_F^∞ C/K² dK] on a slice expiring at t + τ.
pub fn vix_from_strip(slice: &OptionSlice, tenor: Tenor, cfg: &StripConfig) -> Result<VixEstimate, StripError> {
    let fwd = slice.forward;
    let tau = tenor.tau;
    let mut diag = StripDiagnostics::default();
    if (slice.ttm() - tau).abs() > 1e-9 * tau.max(1.0) {
        diag.notes.push(format!(
            "slice time to expiry {} differs from the VIX window {}",
            slice.ttm(),
            tau
        ));
    }
    let strip = claim_strip(
        slice,
        &|k| -(k / fwd).ln(),
        &|k| -1.0 / k,
        &|k| 1.0 / (k * k),
        cfg,
        Upper::Policy,
        diag,
    )?;
    if strip.value < 0.0 {
        return Err(StripError::NegativeRadicand(strip.value));
    }
    let c = 2.0 / (tau * slice.discount);
    let vix2 = c * strip.value;
    let vix = vix2.sqrt();
    let error_bound = if vix > 0.0 {
        c * strip.error_bound / (2.0 * vix)
    } else {
        (c * strip.error_bound).sqrt()
    };
    Ok(VixEstimate {
        vix,
        vix2,
        error_bound,
        strip,
    })
}

/// Π¹: value of (1/(q B_{T,T+τ}))·(S_{T+τ}/scale)^{−n}, n = 2ξq/τ, from the
/// slice expiring at T+τ.
pub fn power_claim_put_strip(
    slice: &OptionSlice,
    xi: f64,
    q: f64,
    tau: f64,
    b_t_ttau: f64,
    scale: f64,
    cfg: &StripConfig,
) -> Result<StripResult, StripError> {
    if !(q > 1.0 && tau > 0.0 && scale > 0.0) {
        return Err(StripError::Precondition(format!("q = {q} must exceed 1, tau = {tau} and scale = {scale} positive")));
    }
    let p = q / (q - 1.0);
    if !(xi > 0.0 && 2.0 * xi * p / tau > 1.0) {
        return Err(StripError::Precondition(format!("need ξ > 0 and 2ξp/τ > 1 (ξ = {xi}, p = {p})")));
    }
    let n = 2.0 * xi * q / tau;
    power_put_claim(slice, n, 1.0 / (q * b_t_ttau), scale, cfg)
}

/// weight·(S/scale)^{−n} for any n > 0; the moment oracle behind Π¹.
pub fn power_put_claim(
    slice: &OptionSlice,
    n: f64,
    weight: f64,
    scale: f64,
    cfg: &StripConfig,
) -> Result<StripResult, StripError> {
    let mut diag = StripDiagnostics::default();
    match beta_from_slice(slice, Side::Left, 0.0, Estimator::ExtremeQuote) {
        Ok(t) => {
            let q_max = beta_to_moment(t.beta);
            if n > q_max {
                diag.notes.push(format!(
                    "left-wing slope {:.4} allows negative moments up to {q_max:.4}, below {n:.4}",
                    t.beta
                ));
                diag.offending_strikes = slice.strikes().into_iter().take(1).collect();
                return Ok(StripResult::divergent(cfg.tail_policy, diag));
            }
        }
        Err(e) => diag.notes.push(format!("left-wing slope unavailable: {e}")),
    }
    let c = scale;
    claim_strip(
        slice,
        &|k| weight * (k / c).powf(-n),
        &|k| -weight * n / c * (k / c).powf(-n - 1.0),
        &|k| weight * n * (n + 1.0) / (c * c) * (k / c).powf(-n - 2.0),
        cfg,
        Upper::Policy,
        diag,
    )
}

/// Π²: value of (1/p)·(S_T/(B_{T,T+τ}·scale))^{m}, m = 2ξp/τ > 1, from the
/// slice expiring at T.
pub fn power_claim_call_strip(
    slice: &OptionSlice,
    xi: f64,
    p: f64,
    tau: f64,
    b_t_ttau: f64,
    scale: f64,
    cfg: &StripConfig,
) -> Result<StripResult, StripError> {
    if !(p > 1.0 && tau > 0.0 && scale > 0.0) {
        return Err(StripError::Precondition(format!("p = {p} must exceed 1, tau = {tau} and scale = {scale} positive")));
    }
    let m = 2.0 * xi * p / tau;
    if !(m > 1.0) {
        return Err(StripError::Precondition(format!("need 2ξp/τ > 1, got {m}")));
    }
    power_call_claim(slice, m, 1.0 / p, b_t_ttau * scale, cfg)
}

/// weight·(S/scale)^m for m > 1; the moment oracle behind Π².
pub fn power_call_claim(
    slice: &OptionSlice,
    m: f64,
    weight: f64,
    scale: f64,
    cfg: &StripConfig,
) -> Result<StripResult, StripError> {
    let mut diag = StripDiagnostics::default();
    match beta_from_slice(slice, Side::Right, 0.0, Estimator::ExtremeQuote) {
        Ok(t) => {
            let p_max = beta_to_moment(t.beta);
            if m - 1.0 > p_max {
                diag.notes.push(format!(
                    "right-wing slope {:.4} allows moments up to {:.4}, below {m:.4}",
                    t.beta,
                    1.0 + p_max
                ));
                diag.offending_strikes = slice.strikes().into_iter().rev().take(1).collect();
                return Ok(StripResult::divergent(cfg.tail_policy, diag));
            }
        }
        Err(e) => diag.notes.push(format!("right-wing slope unavailable: {e}")),
    }
    let c = scale;
    claim_strip(
        slice,
        &|k| weight * (k / c).powf(m),
        &|k| weight * m / c * (k / c).powf(m - 1.0),
        &|k| weight * m * (m - 1.0) / (c * c) * (k / c).powf(m - 2.0),
        cfg,
        Upper::Policy,
        diag,
    )
}

/// Least-squares fit of log C = c₀ + c₁ log K − λK² on the outermost calls.
fn fit_call_decay(slice: &OptionSlice, n: usize) -> Option<(f64, f64, f64, Vec<f64>)> {
    let split = put_call_split(slice);
    let pts: Vec<(f64, f64)> = split
        .calls
        .iter()
        .filter(|q| q.price > 0.0)
        .map(|q| (q.strike, q.price))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let tail = &pts[pts.len().saturating_sub(n.max(3))..];
    let a = DMatrix::from_fn(tail.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => tail[i].0.ln(),
        _ => -tail[i].0 * tail[i].0,
    });
    let y = DVector::from_iterator(tail.len(), tail.iter().map(|p| p.1.ln()));
    let sol = a.svd(true, true).solve(&y, 1e-14).ok()?;
    Some((sol[0], sol[1], sol[2], tail.iter().map(|p| p.0).collect()))
}

/// Π³: value of e^{ξ VIX_T²} from VIX options,
/// B + ∫ (2ξ + 4ξ²K²) e^{ξK²} OTM(K) dK split at the VIX future.
///
/// For ξ > 0 the call wing is fitted to exp(c₀ + c₁ log K − λK²). The claim
/// is reported as +∞ when ξ ≥ λ̂, i.e. when K² e^{ξK²} C(K) fails to decay.
/// Otherwise the fitted wing is used as the extrapolation.
pub fn mgf_claim_vix_strip(slice: &OptionSlice, xi: f64, cfg: &StripConfig) -> Result<StripResult, StripError> {
    if xi == 0.0 {
        return Ok(StripResult {
            value: slice.discount,
            error_bound: 0.0,
            legs: vec![StripLeg::Bond {
                quantity: 1.0,
                price: slice.discount,
            }],
            tail_policy: cfg.tail_policy,
            diagnostics: StripDiagnostics::default(),
        });
    }
    let mut diag = StripDiagnostics::default();
    let mut upper = Upper::Policy;
    match fit_call_decay(slice, cfg.decay_fit_points) {
        Some((c0, c1, lambda, ks)) => {
            diag.decay_rate = Some(lambda);
            if xi > 0.0 && xi >= lambda {
                diag.notes.push(format!("call wing decays like exp(-{lambda:.4} K²), too slow for ξ = {xi}"));
                let model = |k: f64| k * k * (xi * k * k).exp() * (c0 + c1 * k.ln() - lambda * k * k).exp();
                diag.offending_strikes = ks
                    .windows(2)
                    .filter(|w| model(w[1]) >= model(w[0]))
                    .map(|w| w[1])
                    .collect();
                if diag.offending_strikes.is_empty() {
                    diag.offending_strikes = ks;
                }
                return Ok(StripResult::divergent(cfg.tail_policy, diag));
            }
            let rate = lambda - xi;
            if rate > 0.0 {
                let last = *ks.last().unwrap();
                let end = (last * last + 50.0 / rate).sqrt();
                upper = Upper::Asymptote { c0, c1, lambda, end };
            } else {
                diag.notes.push("fitted call wing not decaying; using the tail policy".into());
            }
        }
        None => diag
            .notes
            .push("fewer than 3 priced calls above the future; decay test inconclusive".into()),
    }
    claim_strip(
        slice,
        &|k| (xi * k * k).exp(),
        &|k| 2.0 * xi * k * (xi * k * k).exp(),
        &|k| (2.0 * xi + 4.0 * xi * xi * k * k) * (xi * k * k).exp(),
        cfg,
        upper,
        diag,
    )
}

/// B·E VIX_T^n = B X^n + n X^{n−1}·0 + n(n−1) ∫ K^{n−2} OTM(K) dK, n > 1.
pub fn moment_claim_vix_strip(slice: &OptionSlice, n: f64, cfg: &StripConfig) -> Result<StripResult, StripError> {
    if !(n > 1.0) {
        return Err(StripError::Precondition(format!("moment order must exceed 1, got {n}")));
    }
    let mut diag = StripDiagnostics::default();
    match beta_from_slice(slice, Side::Right, 0.0, Estimator::Regression { n: cfg.decay_fit_points }) {
        Ok(t) => {
            let p_max = beta_to_moment(t.beta);
            if n - 1.0 > p_max {
                diag.notes.push(format!(
                    "VIX right-wing slope {:.4} gives finite moments only up to {:.4}",
                    t.beta,
                    1.0 + p_max
                ));
                diag.offending_strikes = slice.strikes().into_iter().rev().take(cfg.decay_fit_points).collect();
                return Ok(StripResult::divergent(cfg.tail_policy, diag));
            }
        }
        Err(e) => diag.notes.push(format!("right-wing slope unavailable: {e}")),
    }
    claim_strip(
        slice,
        &|k| k.powf(n),
        &|k| n * k.powf(n - 1.0),
        &|k| n * (n - 1.0) * k.powf(n - 2.0),
        cfg,
        Upper::Policy,
        diag,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{Market, OptionQuote};

    pub(crate) fn flat_chain(f: f64, vol: f64, t: f64, strikes: &[f64]) -> OptionSlice {
        let quotes = strikes
            .iter()
            .map(|&k| {
                let kind = otm_kind(k, f);
                let p = bs_price(
                    &BsInputs {
                        forward: f,
                        strike: k,
                        vol,
                        ttm: t,
                        discount: 1.0,
                    },
                    kind,
                );
                OptionQuote::new(k, p, kind, Market::Underlier)
            })
            .collect();
        OptionSlice::new(Market::Underlier, 0.0, t, 0.0, f, quotes).unwrap()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn flat_vol_vix() {
        let tau = 30.0 / 365.0;
        let s = flat_chain(100.0, 0.2, tau, &linspace(12.5, 800.0, 400));
        let v = vix_from_strip(&s, Tenor::new(tau).unwrap(), &StripConfig::default()).unwrap();
        assert!((v.vix - 0.2).abs() < 1e-3, "{}", v.vix);
    }

    #[test]
    fn zero_vol_chain_gives_zero() {
        let tau = 30.0 / 365.0;
        let q: Vec<OptionQuote> = [80.0, 90.0, 110.0, 120.0]
            .iter()
            .map(|&k| OptionQuote::new(k, 0.0, otm_kind(k, 100.0), Market::Underlier))
            .collect();
        let s = OptionSlice::new(Market::Underlier, 0.0, tau, 0.0, 100.0, q).unwrap();
        let v = vix_from_strip(&s, Tenor::new(tau).unwrap(), &StripConfig::default()).unwrap();
        assert_eq!(v.vix, 0.0);
    }

    #[test]
    fn redundant_itm_quotes_do_not_matter() {
        let tau = 30.0 / 365.0;
        let ks = linspace(40.0, 250.0, 120);
        let s = flat_chain(100.0, 0.25, tau, &ks);
        let mut quotes = s.quotes.clone();
        for &k in &ks[10..30] {
            let p = bs_price(
                &BsInputs {
                    forward: 100.0,
                    strike: k,
                    vol: 0.25,
                    ttm: tau,
                    discount: 1.0,
                },
                OptionKind::Call,
            );
            quotes.push(OptionQuote::new(k, p, OptionKind::Call, Market::Underlier));
        }
        let s2 = OptionSlice::new(Market::Underlier, 0.0, tau, 0.0, 100.0, quotes).unwrap();
        let cfg = StripConfig::default();
        let a = vix_from_strip(&s, Tenor::new(tau).unwrap(), &cfg).unwrap();
        let b = vix_from_strip(&s2, Tenor::new(tau).unwrap(), &cfg).unwrap();
        assert_eq!(a.vix, b.vix);
    }

    #[test]
    fn lognormal_negative_moment() {
        let (f, vol, t) = (1.0, 0.2, 0.25);
        let s = flat_chain(f, vol, t, &linspace(0.2, 3.0, 600));
        let r = power_put_claim(&s, 0.5, 1.0, 1.0, &StripConfig::default()).unwrap();
        // E S^a = F^a exp(a(a−1)σ²T/2), a = −1/2
        let a: f64 = -0.5;
        let want = f.powf(a) * (a * (a - 1.0) * vol * vol * t / 2.0).exp();
        assert!((r.value - want).abs() < 1e-5, "{} vs {want}", r.value);
        assert!((r.value - want).abs() <= r.error_bound + 1e-12);
    }

    #[test]
    fn lognormal_positive_moment() {
        let (f, vol, t) = (1.0, 0.2, 0.25);
        let s = flat_chain(f, vol, t, &linspace(0.2, 3.0, 600));
        let r = power_call_claim(&s, 3.0, 1.0, 1.0, &StripConfig::default()).unwrap();
        let want = (3.0 * 2.0 * vol * vol * t / 2.0_f64).exp();
        assert!((r.value - want).abs() < 1e-5, "{} vs {want}", r.value);
    }

    #[test]
    fn call_strip_boundary_rejected() {
        let s = flat_chain(1.0, 0.2, 0.25, &linspace(0.5, 2.0, 50));
        let tau = 30.0 / 365.0;
        // 2ξp/τ = 1 exactly
        let xi = tau / 4.0;
        assert!(power_claim_call_strip(&s, xi, 2.0, tau, 1.0, 1.0, &StripConfig::default()).is_err());
    }

    #[test]
    fn xi_zero_is_the_bond() {
        let s = flat_chain(0.25, 0.8, 0.1, &linspace(0.1, 0.6, 40));
        let r = mgf_claim_vix_strip(&s, 0.0, &StripConfig::default()).unwrap();
        assert_eq!(r.value, s.discount);
    }

    #[test]
    fn moment_near_one_is_the_future() {
        let s = flat_chain(0.25, 0.8, 0.1, &linspace(0.05, 2.0, 400));
        let r = moment_claim_vix_strip(&s, 1.0 + 1e-9, &StripConfig::default()).unwrap();
        assert!((r.value - 0.25 * s.discount).abs() < 1e-8);
    }

    #[test]
    fn weights_match_legs() {
        let s = flat_chain(1.0, 0.2, 0.25, &linspace(0.5, 2.0, 50));
        let r = power_call_claim(&s, 2.0, 1.0, 1.0, &StripConfig::default()).unwrap();
        let w = r.weights();
        assert_eq!(w.strikes.len(), w.weights.len());
        assert!(w.strikes.windows(2).all(|p| p[1] > p[0]));
    }
}
