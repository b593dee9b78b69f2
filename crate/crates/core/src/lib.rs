//! Model-free link between an equity-index option market and its
//! volatility-index option market.
//!
//! The crate replicates the VIX and the MGF of VIX² from option strips,
//! estimates tail slopes, checks the Hölder MGF inequality between the two
//! markets and builds static arbitrage portfolios when it fails. A zoo of
//! stochastic-volatility models with closed-form moment boundaries and a
//! Monte Carlo engine serve as oracles.

pub mod black_scholes;
pub mod market_data;
pub mod model_zoo;
pub mod quad;
pub mod sim_oracle;
pub mod special_fn;
pub mod strip_replication;
pub mod svi_evt;
pub mod tail_analytics;
