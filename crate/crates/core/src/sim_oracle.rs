//! Monte Carlo oracles for the model zoo.
//!
//! Every path draws from its own ChaCha8 stream (stream index = path index),
//! so a path is reproducible from (seed, index) whatever the thread schedule.
//! Prices are in forward units: S₀ = 1 and r = 0.

use crate::model_zoo::{
    cev_vol_vix2, exp_ou_vix2, heston_vix_transform, sabr_vix, three_halves_vix2, Cir, JumpLaw, JumpOverlay,
    ModelError, ModelSpec,
};
use crate::quad::pairwise_sum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scheme {scheme:?} cannot simulate {model}")]
    SchemeMismatch { scheme: Scheme, model: &'static str },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("nested simulation needs {needed} steps, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Noncentral chi-square CIR steps (Heston, 3/2).
    ExactCir,
    EulerLog,
    Milstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub antithetic: bool,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n_paths < 2 || self.n_steps == 0 {
            return Err(SimError::Invalid(format!(
                "need n_paths ≥ 2 and n_steps ≥ 1, got {} and {}",
                self.n_paths, self.n_steps
            )));
        }
        Ok(())
    }
}

/// Terminal values per path. `state` is the model's own vol state: Y for
/// Heston, SABR, CEV-vol and exp-OU, Z = 1/Y for 3/2, S for CEV price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub model: ModelSpec,
    pub horizon: f64,
    pub config: SimConfig,
    pub s: Vec<f64>,
    pub state: Vec<f64>,
    /// ∫σ² dt of the diffusive part.
    pub realized_var: Vec<f64>,
    /// Jump counts and summed log-jumps, when an overlay was active.
    pub jump_counts: Option<Vec<u32>>,
    pub jump_sums: Option<Vec<f64>>,
    /// Paths where the CEV-vol overflow guard fired.
    pub guarded: usize,
}

struct PathOut {
    s: f64,
    state: f64,
    rv: f64,
    jumps: u32,
    jump_sum: f64,
    guarded: bool,
}

struct Draws {
    rng: ChaCha8Rng,
    sign: f64,
}

impl Draws {
    fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.sign * z
    }
}

/// CEV-vol paths are frozen once Y exceeds this multiple of Y₀.
pub const CEV_VOL_GUARD: f64 = 1e4;

fn check_scheme(model: &ModelSpec, scheme: Scheme) -> Result<()> {
    let ok = match (model, scheme) {
        (ModelSpec::Heston(_), _) => true,
        (ModelSpec::ThreeHalves(_), Scheme::ExactCir | Scheme::EulerLog) => true,
        (ModelSpec::ThreeHalves(_), Scheme::Milstein) => false,
        (_, Scheme::ExactCir) => false,
        _ => true,
    };
    if ok {
        Ok(())
    } else {
        Err(SimError::SchemeMismatch {
            scheme,
            model: model.name(),
        })
    }
}

fn cir_exact_step(cir: &Cir, c: f64, decay: f64, y: f64, d: &mut Draws) -> f64 {
    let u = c * y * decay;
    let n = if u > 0.0 {
        Poisson::new(u).expect("positive mean").sample(&mut d.rng)
    } else {
        0.0
    };
    Gamma::new(cir.cir_shape_alpha() + 1.0 + n, 1.0 / c)
        .expect("positive shape")
        .sample(&mut d.rng)
}

fn path(model: &ModelSpec, horizon: f64, cfg: &SimConfig, d: &mut Draws) -> PathOut {
    let n = cfg.n_steps;
    let h = horizon / n as f64;
    let sq = h.sqrt();
    let mut out = PathOut {
        s: 1.0,
        state: 0.0,
        rv: 0.0,
        jumps: 0,
        jump_sum: 0.0,
        guarded: false,
    };
    match *model {
        ModelSpec::Heston(m) => {
            let cir = m.cir();
            let (c, decay) = (cir.c(h), (-m.kappa * h).exp());
            let rho_c = (1.0 - m.rho * m.rho).sqrt();
            let (mut y, mut x) = (m.y0, 0.0);
            for _ in 0..n {
                let (ny, int_y, int_sqrt_db) = match cfg.scheme {
                    Scheme::ExactCir => {
                        let ny = cir_exact_step(&cir, c, decay, y, d);
                        let iy = 0.5 * (y + ny) * h;
                        // ∫√Y dB recovered from the CIR dynamics
                        (ny, iy, (ny - y - m.kappa * m.ybar * h + m.kappa * iy) / m.gamma)
                    }
                    Scheme::EulerLog | Scheme::Milstein => {
                        // full truncation
                        let yp = y.max(0.0);
                        let db = d.normal() * sq;
                        let mut ny = y + m.kappa * (m.ybar - yp) * h + m.gamma * yp.sqrt() * db;
                        if cfg.scheme == Scheme::Milstein {
                            ny += 0.25 * m.gamma * m.gamma * (db * db - h);
                        }
                        (ny, yp * h, yp.sqrt() * db)
                    }
                };
                x += -0.5 * int_y + m.rho * int_sqrt_db + rho_c * int_y.max(0.0).sqrt() * d.normal();
                out.rv += int_y;
                y = ny;
            }
            out.s = x.exp();
            out.state = y.max(0.0);
        }
        ModelSpec::ThreeHalves(m) => {
            let cir = m.cir();
            let (c, decay) = (cir.c(h), (-m.kappa * h).exp());
            let rho_c = (1.0 - m.rho * m.rho).sqrt();
            let drift_log = m.kappa * m.ybar - 0.5 * m.gamma * m.gamma;
            let (mut y, mut x) = (1.0 / m.z0, 0.0);
            for _ in 0..n {
                let (ny, int_z) = match cfg.scheme {
                    Scheme::ExactCir => {
                        let ny = cir_exact_step(&cir, c, decay, y, d);
                        (ny, 0.5 * (1.0 / y + 1.0 / ny) * h)
                    }
                    _ => {
                        // d log Y = ((κȲ − γ²/2)Z − κ) dt + γ√Z dB
                        let z = 1.0 / y;
                        let ly = y.ln() + (drift_log * z - m.kappa) * h + m.gamma * z.sqrt() * d.normal() * sq;
                        (ly.exp(), z * h)
                    }
                };
                let int_sqrt_z_db = ((ny / y).ln() - drift_log * int_z + m.kappa * h) / m.gamma;
                x += -0.5 * int_z + m.rho * int_sqrt_z_db + rho_c * int_z.sqrt() * d.normal();
                out.rv += int_z;
                y = ny;
            }
            out.s = x.exp();
            out.state = 1.0 / y;
        }
        ModelSpec::Sabr(m) => {
            let rho_c = (1.0 - m.rho * m.rho).sqrt();
            let (mut y, mut x) = (m.y0, 0.0);
            for _ in 0..n {
                let ny = y * (m.sabr_alpha * d.normal() * sq - 0.5 * m.sabr_alpha * m.sabr_alpha * h).exp();
                let int_y2 = 0.5 * (y * y + ny * ny) * h;
                // ∫Y dB = ΔY/α since dY = αY dB
                x += -0.5 * int_y2 + m.rho * (ny - y) / m.sabr_alpha + rho_c * int_y2.sqrt() * d.normal();
                out.rv += int_y2;
                y = ny;
            }
            out.s = x.exp();
            out.state = y;
        }
        ModelSpec::CevVol(m) => {
            let rho_c = (1.0 - m.rho * m.rho).sqrt();
            let cap = CEV_VOL_GUARD * m.y0;
            let (mut y, mut x) = (m.y0, 0.0);
            for _ in 0..n {
                let (db, dw) = (d.normal() * sq, d.normal() * sq);
                x += -0.5 * y * y * h + y * (m.rho * db + rho_c * dw);
                out.rv += y * y * h;
                if !out.guarded {
                    let ny = y * (m.c * y * db - 0.5 * m.c * m.c * y * y * h).exp();
                    if ny > cap || !ny.is_finite() {
                        out.guarded = true;
                    } else {
                        y = ny;
                    }
                }
            }
            out.s = x.exp();
            out.state = y;
        }
        ModelSpec::ExpOu(m) => {
            let rho_c = (1.0 - m.rho * m.rho).sqrt();
            let decay = (-m.kappa * h).exp();
            let sd = m.gamma * (-(-2.0 * m.kappa * h).exp_m1() / (2.0 * m.kappa)).sqrt();
            let (mut y, mut x) = (m.y0, 0.0);
            for _ in 0..n {
                let z = d.normal();
                let ny = m.ybar + (y - m.ybar) * decay + sd * z;
                let vol = y.exp();
                x += -0.5 * vol * vol * h + vol * sq * (m.rho * z + rho_c * d.normal());
                out.rv += 0.5 * ((2.0 * y).exp() + (2.0 * ny).exp()) * h;
                y = ny;
            }
            out.s = x.exp();
            out.state = y;
        }
        ModelSpec::CevPrice(m) => {
            let mut s = 1.0_f64;
            for _ in 0..n {
                if s <= 0.0 {
                    break;
                }
                let var = s.powf(2.0 * m.exponent - 2.0);
                let mut dt = h;
                let mut stop = false;
                if let Some(cap) = m.cap {
                    if out.rv + var * h >= cap {
                        dt = (cap - out.rv) / var;
                        stop = true;
                    }
                }
                s = (s + s.powf(m.exponent) * dt.sqrt() * d.normal()).max(0.0);
                out.rv += var * dt;
                if stop {
                    break;
                }
            }
            out.s = s;
            out.state = s;
        }
    }
    out
}

fn draws(cfg: &SimConfig, i: usize) -> Draws {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (stream, sign) = if cfg.antithetic {
        ((i / 2) as u64, if i % 2 == 1 { -1.0 } else { 1.0 })
    } else {
        (i as u64, 1.0)
    };
    rng.set_stream(stream);
    Draws { rng, sign }
}

fn add_jumps(out: &mut PathOut, jumps: &JumpOverlay, horizon: f64, d: &mut Draws) {
    let JumpLaw::Gaussian { mean, sd } = jumps.law;
    let mu = horizon * jumps.lambda;
    let k = if mu > 0.0 {
        Poisson::new(mu).expect("positive mean").sample(&mut d.rng) as u32
    } else {
        0
    };
    let mut sum = 0.0;
    for _ in 0..k {
        sum += mean + sd * d.normal();
    }
    let compensator = mu * (mean + 0.5 * sd * sd).exp_m1();
    out.s *= (sum - compensator).exp();
    out.jumps = k;
    out.jump_sum = sum;
}

fn run(model: &ModelSpec, jumps: Option<&JumpOverlay>, horizon: f64, cfg: &SimConfig) -> Result<PathBundle> {
    cfg.validate()?;
    model.validate()?;
    check_scheme(model, cfg.scheme)?;
    if !(horizon > 0.0) {
        return Err(SimError::Invalid(format!("horizon {horizon} must be positive")));
    }
    let outs: Vec<PathOut> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut d = draws(cfg, i);
            let mut o = path(model, horizon, cfg, &mut d);
            if let Some(j) = jumps {
                add_jumps(&mut o, j, horizon, &mut d);
            }
            o
        })
        .collect();
    Ok(PathBundle {
        model: *model,
        horizon,
        config: *cfg,
        s: outs.iter().map(|o| o.s).collect(),
        state: outs.iter().map(|o| o.state).collect(),
        realized_var: outs.iter().map(|o| o.rv).collect(),
        jump_counts: jumps.map(|_| outs.iter().map(|o| o.jumps).collect()),
        jump_sums: jumps.map(|_| outs.iter().map(|o| o.jump_sum).collect()),
        guarded: outs.iter().filter(|o| o.guarded).count(),
    })
}

pub fn simulate(model: &ModelSpec, horizon: f64, cfg: &SimConfig) -> Result<PathBundle> {
    run(model, None, horizon, cfg)
}

/// As `simulate`, with compensated compound-Poisson jumps in log S.
pub fn simulate_with_jumps(model: &ModelSpec, jumps: &JumpOverlay, horizon: f64, cfg: &SimConfig) -> Result<PathBundle> {
    if !(jumps.lambda >= 0.0) {
        return Err(SimError::Invalid(format!("jump intensity {} < 0", jumps.lambda)));
    }
    run(model, Some(jumps), horizon, cfg)
}

/// Sample mean and its standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = pairwise_sum(x) / n;
    let dev: Vec<f64> = x.iter().map(|v| (v - m) * (v - m)).collect();
    (m, (pairwise_sum(&dev) / (n - 1.0) / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VixMode {
    /// The model's closed-form map from Y_T to VIX_T.
    Transform,
    /// Inner simulation of ∫σ² over τ from each outer state.
    Nested {
        inner_paths: usize,
        inner_steps: usize,
        /// Cap on outer × inner × steps.
        budget: u64,
    },
}

fn restart(model: &ModelSpec, state: f64) -> ModelSpec {
    match *model {
        ModelSpec::Heston(mut m) => {
            m.y0 = state;
            ModelSpec::Heston(m)
        }
        ModelSpec::ThreeHalves(mut m) => {
            m.z0 = state;
            ModelSpec::ThreeHalves(m)
        }
        ModelSpec::Sabr(mut m) => {
            m.y0 = state;
            ModelSpec::Sabr(m)
        }
        ModelSpec::CevVol(mut m) => {
            m.y0 = state;
            ModelSpec::CevVol(m)
        }
        ModelSpec::ExpOu(mut m) => {
            m.y0 = state;
            ModelSpec::ExpOu(m)
        }
        // nested mode rejects CEV price before getting here
        ModelSpec::CevPrice(m) => ModelSpec::CevPrice(m),
    }
}

/// Per-path VIX_T for the horizon-τ window following the bundle's horizon.
pub fn estimate_vix(bundle: &PathBundle, tau: f64, mode: VixMode) -> Result<Vec<f64>> {
    let model = bundle.model;
    match mode {
        VixMode::Transform => bundle
            .state
            .iter()
            .map(|&y| -> Result<f64> {
                Ok(match model {
                    ModelSpec::Heston(m) => {
                        let (a, b) = heston_vix_transform(m.kappa, m.ybar, tau);
                        (a + b * y).sqrt()
                    }
                    ModelSpec::Sabr(m) => sabr_vix(&m, y, tau),
                    ModelSpec::ExpOu(m) => exp_ou_vix2(&m, y, tau).sqrt(),
                    ModelSpec::ThreeHalves(m) => three_halves_vix2(&m, 1.0 / y, tau).sqrt(),
                    ModelSpec::CevVol(m) => cev_vol_vix2(m.c, y, tau)?.sqrt(),
                    ModelSpec::CevPrice(_) => {
                        return Err(SimError::Model(ModelError::Regime(
                            "CEV price has no closed-form VIX map; use nested mode".into(),
                        )))
                    }
                })
            })
            .collect(),
        VixMode::Nested {
            inner_paths,
            inner_steps,
            budget,
        } => {
            let needed = (bundle.state.len() as u64) * (inner_paths as u64) * (inner_steps as u64);
            if needed > budget {
                return Err(SimError::BudgetExceeded { needed, budget });
            }
            if let ModelSpec::CevPrice(_) = model {
                return Err(SimError::Model(ModelError::Regime(
                    "nested VIX for CEV price is not supported".into(),
                )));
            }
            let scheme = match (model, bundle.config.scheme) {
                (ModelSpec::Heston(_) | ModelSpec::ThreeHalves(_), s) => s,
                (_, Scheme::ExactCir) => Scheme::EulerLog,
                (_, s) => s,
            };
            bundle
                .state
                .iter()
                .enumerate()
                .map(|(i, &y)| {
                    let cfg = SimConfig {
                        n_paths: inner_paths,
                        n_steps: inner_steps,
                        seed: bundle.config.seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                        scheme,
                        antithetic: false,
                    };
                    let inner = simulate(&restart(&model, y), tau, &cfg)?;
                    Ok((pairwise_sum(&inner.realized_var) / inner_paths as f64 / tau).sqrt())
                })
                .collect()
        }
    }
}

/// Default top-1% share above which an estimate is flagged unreliable.
pub const TOP_SHARE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    /// Share of the sum carried by the largest 1% of terms.
    pub top_share: f64,
    /// Hill estimate of the tail index of the summands, from the top 1%.
    pub tail_index: Option<f64>,
    pub unreliable: bool,
    /// The mean is judged infinite: tail index below 1, or an infinite term.
    pub divergent: bool,
}

/// Mean of exp(l_i) with tail diagnostics, working in log space.
pub fn tail_mean(log_terms: &[f64], top_share_threshold: f64) -> TailEstimate {
    let n = log_terms.len();
    let shift = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::INFINITY || log_terms.iter().any(|l| l.is_nan()) {
        return TailEstimate {
            mean: f64::INFINITY,
            std_error: f64::INFINITY,
            n,
            top_share: 1.0,
            tail_index: None,
            unreliable: true,
            divergent: true,
        };
    }
    let w: Vec<f64> = log_terms.iter().map(|l| (l - shift).exp()).collect();
    let (m, se) = mean_se(&w);
    let scale = shift.exp();

    let mut sorted = log_terms.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = (n / 100).max(1);
    let top: Vec<f64> = sorted[..k].iter().map(|l| (l - shift).exp()).collect();
    let total = m * n as f64;
    let top_share = if total > 0.0 { pairwise_sum(&top) / total } else { 0.0 };
    let tail_index = if n >= 200 && sorted[k].is_finite() {
        let h = sorted[..k].iter().map(|l| l - sorted[k]).sum::<f64>() / k as f64;
        Some(if h > 0.0 { 1.0 / h } else { f64::INFINITY })
    } else {
        None
    };
    TailEstimate {
        mean: m * scale,
        std_error: se * scale,
        n,
        top_share,
        tail_index,
        unreliable: top_share > top_share_threshold,
        divergent: tail_index.map_or(false, |a| a < 1.0) || !(m * scale).is_finite(),
    }
}

/// Sample estimate of E e^{ξ v²}.
pub fn empirical_mgf(values: &[f64], xi: f64) -> TailEstimate {
    if xi == 0.0 {
        return TailEstimate {
            mean: 1.0,
            std_error: 0.0,
            n: values.len(),
            top_share: 0.01,
            tail_index: None,
            unreliable: false,
            divergent: false,
        };
    }
    let l: Vec<f64> = values.iter().map(|v| xi * v * v).collect();
    tail_mean(&l, TOP_SHARE_THRESHOLD)
}

/// Sample estimate of E S_T^{−q}.
pub fn empirical_negative_moment(bundle: &PathBundle, q: f64) -> TailEstimate {
    let l: Vec<f64> = bundle.s.iter().map(|s| -q * s.ln()).collect();
    tail_mean(&l, TOP_SHARE_THRESHOLD)
}

/// Sample estimate of E S_T^{p} for any real p.
pub fn empirical_power_moment(bundle: &PathBundle, p: f64) -> TailEstimate {
    let l: Vec<f64> = bundle.s.iter().map(|s| p * s.ln()).collect();
    tail_mean(&l, TOP_SHARE_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{Heston, Sabr};

    fn heston() -> Heston {
        Heston {
            kappa: 2.0,
            ybar: 0.04,
            gamma: 0.25,
            rho: -0.7,
            y0: 0.06,
        }
    }

    fn cfg(n_paths: usize, n_steps: usize, seed: u64, scheme: Scheme) -> SimConfig {
        SimConfig {
            n_paths,
            n_steps,
            seed,
            scheme,
            antithetic: false,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let m = ModelSpec::Heston(heston());
        let c = cfg(500, 20, 7, Scheme::ExactCir);
        let a = simulate(&m, 0.5, &c).unwrap();
        let b = simulate(&m, 0.5, &c).unwrap();
        assert_eq!(a, b);
        let other = simulate(&m, 0.5, &SimConfig { seed: 8, ..c }).unwrap();
        assert_ne!(a.s, other.s);
        // path i does not depend on how many paths were run
        let short = simulate(&m, 0.5, &SimConfig { n_paths: 10, ..c }).unwrap();
        assert_eq!(short.s[..], a.s[..10]);
    }

    #[test]
    fn heston_cir_mean_and_martingale() {
        let h = heston();
        let t = 1.0;
        let b = simulate(&ModelSpec::Heston(h), t, &cfg(100_000, 50, 1, Scheme::ExactCir)).unwrap();
        let (my, sey) = mean_se(&b.state);
        assert!((my - h.cir().mean(h.y0, t)).abs() < 3.0 * sey, "{my} ± {sey}");
        let (ms, ses) = mean_se(&b.s);
        assert!((ms - 1.0).abs() < 3.0 * ses, "{ms} ± {ses}");
        assert!(b.realized_var.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn sabr_vol_is_a_martingale() {
        let m = ModelSpec::Sabr(Sabr {
            sabr_alpha: 0.8,
            rho: -0.5,
            y0: 0.2,
        });
        let b = simulate(&m, 1.0, &cfg(100_000, 50, 3, Scheme::EulerLog)).unwrap();
        let (my, sey) = mean_se(&b.state);
        assert!((my - 0.2).abs() < 3.0 * sey);
        let (ms, ses) = mean_se(&b.s);
        assert!((ms - 1.0).abs() < 3.0 * ses);
    }

    #[test]
    fn exact_cir_rejected_for_sabr() {
        let m = ModelSpec::Sabr(Sabr {
            sabr_alpha: 0.8,
            rho: -0.5,
            y0: 0.2,
        });
        assert!(matches!(
            simulate(&m, 1.0, &cfg(10, 5, 0, Scheme::ExactCir)),
            Err(SimError::SchemeMismatch { .. })
        ));
    }

    #[test]
    fn cev_price_cap_enforced() {
        let m = ModelSpec::CevPrice(crate::model_zoo::CevPrice {
            exponent: 0.5,
            cap: Some(0.05),
        });
        let b = simulate(&m, 2.0, &cfg(2000, 200, 5, Scheme::EulerLog)).unwrap();
        assert!(b.realized_var.iter().all(|v| *v <= 0.05 + 1e-12));
        assert!(b.s.iter().all(|s| *s >= 0.0));
    }

    #[test]
    fn euler_mean_bias_shrinks_with_steps() {
        // the Euler recursion for E Y carries a (1 − κh)ⁿ vs e^{−κT} bias
        let h = Heston { y0: 0.1, ..heston() };
        let exact = h.cir().mean(h.y0, 1.0);
        let err = |n| {
            let b = simulate(&ModelSpec::Heston(h), 1.0, &cfg(100_000, n, 11, Scheme::EulerLog)).unwrap();
            (mean_se(&b.state).0 - exact).abs()
        };
        let (e4, e8) = (err(4), err(8));
        assert!(e8 < 0.7 * e4, "{e4} {e8}");
    }

    #[test]
    fn antithetic_pairs_mirror_normals() {
        let m = ModelSpec::Sabr(Sabr {
            sabr_alpha: 0.5,
            rho: 0.0,
            y0: 0.2,
        });
        let c = SimConfig {
            antithetic: true,
            ..cfg(4, 1, 9, Scheme::EulerLog)
        };
        let b = simulate(&m, 1.0, &c).unwrap();
        // one step: log Y = ±α√h Z − α²h/2
        let l0 = b.state[0].ln() - 0.2_f64.ln() + 0.125;
        let l1 = b.state[1].ln() - 0.2_f64.ln() + 0.125;
        assert!((l0 + l1).abs() < 1e-12);
    }

    #[test]
    fn mgf_zero_and_stability() {
        // two years out the transition law is close to its gamma limit, so
        // the Pareto tail of e^{ξVIX²} (index ξ̃/ξ) is visible in the top 1%
        let h = heston();
        let (dt, tau) = (2.0, 30.0 / 365.0);
        let xt = crate::model_zoo::heston_xi_tilde(&h, dt, tau);
        let run = |seed, f: f64| {
            let b = simulate(&ModelSpec::Heston(h), dt, &cfg(50_000, 10, seed, Scheme::ExactCir)).unwrap();
            let v = estimate_vix(&b, tau, VixMode::Transform).unwrap();
            (empirical_mgf(&v, 0.0), empirical_mgf(&v, f * xt))
        };
        let (z, a) = run(1, 0.5);
        let (_, b) = run(2, 0.5);
        assert_eq!(z.mean, 1.0);
        assert!(!a.divergent && !b.divergent, "{a:?} {b:?}");
        assert!((a.mean - b.mean).abs() < 3.0 * a.std_error.hypot(b.std_error));
        let (_, c) = run(3, 0.25);
        let exact = crate::model_zoo::heston_vix2_mgf_exact(&h, 0.25 * xt, dt, tau);
        assert!((c.mean - exact).abs() < 3.0 * c.std_error, "{c:?} vs {exact}");
    }

    #[test]
    fn short_horizon_heston_tail_is_flagged() {
        // 41 days out the noncentral part dominates and the top 1% carries
        // most of the sample mean even at half the boundary
        let h = heston();
        let (dt, tau) = (41.0 / 365.0, 30.0 / 365.0);
        let xt = crate::model_zoo::heston_xi_tilde(&h, dt, tau);
        let b = simulate(&ModelSpec::Heston(h), dt, &cfg(50_000, 10, 1, Scheme::ExactCir)).unwrap();
        let v = estimate_vix(&b, tau, VixMode::Transform).unwrap();
        assert!(empirical_mgf(&v, 0.5 * xt).unreliable);
    }

    #[test]
    fn sabr_mgf_flagged_divergent() {
        let m = Sabr {
            sabr_alpha: 1.0,
            rho: 0.0,
            y0: 0.25,
        };
        let b = simulate(&ModelSpec::Sabr(m), 1.0, &cfg(100_000, 1, 4, Scheme::EulerLog)).unwrap();
        let v = estimate_vix(&b, 30.0 / 365.0, VixMode::Transform).unwrap();
        let e = empirical_mgf(&v, 2.0);
        assert!(e.divergent, "{e:?}");
    }

    #[test]
    fn lognormal_negative_moment() {
        // SABR with α → 0 is Black-Scholes: E S^{−q} = e^{q(q+1)σ²T/2}
        let m = Sabr {
            sabr_alpha: 1e-9,
            rho: 0.0,
            y0: 0.3,
        };
        let b = simulate(&ModelSpec::Sabr(m), 1.0, &cfg(100_000, 1, 6, Scheme::EulerLog)).unwrap();
        let e = empirical_negative_moment(&b, 2.0);
        let exact = (3.0 * 0.09_f64).exp();
        assert!((e.mean - exact).abs() < 3.0 * e.std_error, "{e:?} vs {exact}");
        assert!(!e.divergent);
    }

    #[test]
    fn nested_vix_agrees_with_transform() {
        let h = heston();
        let tau = 30.0 / 365.0;
        let b = simulate(&ModelSpec::Heston(h), 0.25, &cfg(1000, 10, 2, Scheme::ExactCir)).unwrap();
        let t = estimate_vix(&b, tau, VixMode::Transform).unwrap();
        let nested = estimate_vix(
            &b,
            tau,
            VixMode::Nested {
                inner_paths: 400,
                inner_steps: 10,
                budget: 10_000_000,
            },
        )
        .unwrap();
        let d: Vec<f64> = t.iter().zip(&nested).map(|(a, b)| a * a - b * b).collect();
        let (md, sed) = mean_se(&d);
        assert!(md.abs() < 3.0 * sed.max(1e-7), "{md} ± {sed}");
        assert!(matches!(
            estimate_vix(
                &b,
                tau,
                VixMode::Nested {
                    inner_paths: 400,
                    inner_steps: 10,
                    budget: 1000,
                }
            ),
            Err(SimError::BudgetExceeded { .. })
        ));
    }
}
