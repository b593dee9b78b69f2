//! Option-chain ingestion for both markets.
//!
//! CSV schema (header required, any column order):
//! `market,expiry_years,valuation_years,rate,forward,strike,kind,bid,ask,mid`
//! with `kind` in {C, P}. Empty bid/ask/mid cells are allowed as long as one
//! usable price remains.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Market {
    Underlier,
    VolIndex,
}

impl Market {
    fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "underlier" | "spx" | "index" => Some(Market::Underlier),
            "volindex" | "vix" => Some(Market::VolIndex),
            _ => None,
        }
    }
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Market::Underlier => "underlier",
            Market::VolIndex => "volindex",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn code(self) -> &'static str {
        match self {
            OptionKind::Call => "C",
            OptionKind::Put => "P",
        }
    }
}

/// Which quote column becomes the working price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PriceField {
    #[default]
    Mid,
    Bid,
    Ask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    pub strike: f64,
    pub price: f64,
    pub kind: OptionKind,
    pub market: Market,
    pub bid: Option<f64>,
    pub ask: Option<f64>,
}

impl OptionQuote {
    pub fn new(strike: f64, price: f64, kind: OptionKind, market: Market) -> Self {
        Self {
            strike,
            price,
            kind,
            market,
            bid: None,
            ask: None,
        }
    }

    pub fn spread(&self) -> Option<f64> {
        match (self.bid, self.ask) {
            (Some(b), Some(a)) if a > b => Some(a - b),
            _ => None,
        }
    }
}

/// The VIX averaging window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tenor {
    pub tau: f64,
}

impl Default for Tenor {
    fn default() -> Self {
        Self { tau: 30.0 / 365.0 }
    }
}

impl Tenor {
    pub fn new(tau: f64) -> Result<Self, MarketDataError> {
        if tau > 0.0 && tau.is_finite() {
            Ok(Self { tau })
        } else {
            Err(MarketDataError::Invalid(format!("tau must be positive, got {tau}")))
        }
    }

    /// Parses "30d", "0.0822y" or a bare number of years.
    pub fn parse(s: &str) -> Result<Self, MarketDataError> {
        let s = s.trim();
        let bad = || MarketDataError::Invalid(format!("cannot parse tenor '{s}'"));
        let v = if let Some(d) = s.strip_suffix('d') {
            d.parse::<f64>().map_err(|_| bad())? / 365.0
        } else if let Some(y) = s.strip_suffix('y') {
            y.parse::<f64>().map_err(|_| bad())?
        } else {
            s.parse::<f64>().map_err(|_| bad())?
        };
        Self::new(v)
    }
}

/// One expiry's quotes for one market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSlice {
    pub market: Market,
    pub valuation_time: f64,
    pub expiry: f64,
    pub rate: f64,
    pub discount: f64,
    /// E_t S_T for the underlier, the future X_{t,T} for the vol index.
    pub forward: f64,
    /// Sorted by (strike, kind); at most one quote per (strike, kind).
    pub quotes: Vec<OptionQuote>,
    /// Quotes dropped by static-bound checks or filters, kept for inspection.
    pub rejected: Vec<OptionQuote>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketDataError {
    #[error("row {row}, column '{column}': {message}")]
    Malformed {
        row: usize,
        column: String,
        message: String,
    },
    #[error("row {row}: crossed market, bid {bid} > ask {ask}")]
    Crossed { row: usize, bid: f64, ask: f64 },
    #[error("row {row}: non-positive strike {strike}")]
    NonPositiveStrike { row: usize, strike: f64 },
    #[error("row {row}: missing {field}")]
    MissingMetadata { row: usize, field: String },
    #[error("row {row}: {field} differs from the first row")]
    InconsistentMetadata { row: usize, field: String },
    #[error("duplicate {kind:?} quote at strike {strike}")]
    DuplicateStrike { strike: f64, kind: OptionKind },
    #[error("need at least 3 strikes, found {found}")]
    TooFewStrikes { found: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Ingestion settings. Quotes failing a filter land in `rejected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub price_field: PriceField,
    /// Quotes priced at or below this are dropped (zero-bid wings).
    pub min_price: f64,
    /// Drop quotes whose (ask − bid)/mid exceeds this.
    pub max_rel_spread: Option<f64>,
    pub min_strikes: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            price_field: PriceField::Mid,
            min_price: 0.0,
            max_rel_spread: None,
            min_strikes: 3,
        }
    }
}

impl OptionSlice {
    /// Builds and validates a slice. Duplicates are an error; quotes outside
    /// the static bounds are moved to `rejected` with a warning.
    pub fn new(
        market: Market,
        valuation_time: f64,
        expiry: f64,
        rate: f64,
        forward: f64,
        quotes: Vec<OptionQuote>,
    ) -> Result<Self, MarketDataError> {
        Self::with_config(market, valuation_time, expiry, rate, forward, quotes, &ChainConfig::default())
    }

    pub fn with_config(
        market: Market,
        valuation_time: f64,
        expiry: f64,
        rate: f64,
        forward: f64,
        mut quotes: Vec<OptionQuote>,
        cfg: &ChainConfig,
    ) -> Result<Self, MarketDataError> {
        if !(expiry > valuation_time) {
            return Err(MarketDataError::Invalid(format!(
                "expiry {expiry} must be after valuation time {valuation_time}"
            )));
        }
        if !(forward > 0.0 && forward.is_finite()) {
            return Err(MarketDataError::Invalid(format!("forward must be positive, got {forward}")));
        }
        if !(rate >= 0.0) {
            return Err(MarketDataError::Invalid(format!("rate must be >= 0, got {rate}")));
        }
        let discount = (-rate * (expiry - valuation_time)).exp();
        quotes.sort_by(|a, b| a.strike.total_cmp(&b.strike).then(a.kind.cmp(&b.kind)));
        for w in quotes.windows(2) {
            if w[0].strike == w[1].strike && w[0].kind == w[1].kind {
                return Err(MarketDataError::DuplicateStrike {
                    strike: w[0].strike,
                    kind: w[0].kind,
                });
            }
        }
        let mut kept = Vec::with_capacity(quotes.len());
        let mut rejected = Vec::new();
        let mut warnings = Vec::new();
        for q in quotes {
            if !(q.strike > 0.0) {
                return Err(MarketDataError::NonPositiveStrike {
                    row: 0,
                    strike: q.strike,
                });
            }
            let (lo, hi) = static_band(forward, q.strike, discount, q.kind);
            let slack = 1e-12 * forward.max(q.strike);
            let mut reason = None;
            if !(q.price >= 0.0) {
                reason = Some(format!("negative price {}", q.price));
            } else if q.price > hi + slack {
                reason = Some(format!("price {} above static upper bound {hi}", q.price));
            } else if q.price < lo - slack {
                reason = Some(format!("price {} below intrinsic {lo}", q.price));
            } else if q.price <= cfg.min_price && cfg.min_price > 0.0 {
                reason = Some(format!("price {} at or below filter {}", q.price, cfg.min_price));
            } else if let (Some(lim), Some(s)) = (cfg.max_rel_spread, q.spread()) {
                if s / q.price > lim {
                    reason = Some(format!("relative spread {} above filter {lim}", s / q.price));
                }
            }
            match reason {
                Some(r) => {
                    warnings.push(format!("{} {} @ {}: {r}", q.market, q.kind.code(), q.strike));
                    rejected.push(q);
                }
                None => kept.push(q),
            }
        }
        let n = distinct_strikes(&kept);
        if n < cfg.min_strikes {
            return Err(MarketDataError::TooFewStrikes { found: n });
        }
        Ok(Self {
            market,
            valuation_time,
            expiry,
            rate,
            discount,
            forward,
            quotes: kept,
            rejected,
            warnings,
        })
    }

    /// T − t.
    pub fn ttm(&self) -> f64 {
        self.expiry - self.valuation_time
    }

    pub fn strikes(&self) -> Vec<f64> {
        let mut k: Vec<f64> = self.quotes.iter().map(|q| q.strike).collect();
        k.dedup();
        k
    }

    pub fn quote(&self, strike: f64, kind: OptionKind) -> Option<&OptionQuote> {
        self.quotes.iter().find(|q| q.strike == strike && q.kind == kind)
    }
}

/// [lower, upper] no-arbitrage band for a European option in forward terms.
pub fn static_band(forward: f64, strike: f64, discount: f64, kind: OptionKind) -> (f64, f64) {
    match kind {
        OptionKind::Call => (discount * (forward - strike).max(0.0), discount * forward),
        OptionKind::Put => (discount * (strike - forward).max(0.0), discount * strike),
    }
}

fn distinct_strikes(q: &[OptionQuote]) -> usize {
    let mut n = 0;
    let mut last = f64::NAN;
    for x in q {
        if x.strike != last {
            n += 1;
            last = x.strike;
        }
    }
    n
}

pub fn parse_chain(csv_bytes: &[u8], market: Market) -> Result<OptionSlice, MarketDataError> {
    parse_chain_with(csv_bytes, market, &ChainConfig::default())
}

/// Parses a chain. Rows are numbered from 1, not counting the header.
pub fn parse_chain_with(
    csv_bytes: &[u8],
    market: Market,
    cfg: &ChainConfig,
) -> Result<OptionSlice, MarketDataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(csv_bytes);
    let headers = rdr
        .headers()
        .map_err(|e| MarketDataError::Malformed {
            row: 0,
            column: "header".into(),
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let required = ["market", "expiry_years", "valuation_years", "rate", "forward", "strike", "kind"];
    for r in required {
        if col(r).is_none() {
            return Err(MarketDataError::MissingMetadata {
                row: 0,
                field: format!("column {r}"),
            });
        }
    }
    let idx = |n: &str| col(n);
    let (i_mkt, i_t, i_v, i_r, i_f, i_k, i_kind) = (
        idx("market").unwrap(),
        idx("expiry_years").unwrap(),
        idx("valuation_years").unwrap(),
        idx("rate").unwrap(),
        idx("forward").unwrap(),
        idx("strike").unwrap(),
        idx("kind").unwrap(),
    );
    let (i_bid, i_ask, i_mid) = (idx("bid"), idx("ask"), idx("mid"));

    let mut meta: Option<[f64; 4]> = None;
    let mut quotes = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| MarketDataError::Malformed {
            row,
            column: "record".into(),
            message: e.to_string(),
        })?;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize, name: &str| -> Result<Option<f64>, MarketDataError> {
            let s = cell(j);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|_| MarketDataError::Malformed {
                row,
                column: name.into(),
                message: format!("not a number: '{s}'"),
            })
        };
        let opt = |j: Option<usize>, name: &str| match j {
            Some(j) => num(j, name),
            None => Ok(None),
        };
        let req = |j: usize, name: &str| -> Result<f64, MarketDataError> {
            num(j, name)?.ok_or_else(|| MarketDataError::MissingMetadata {
                row,
                field: name.into(),
            })
        };

        let m = Market::parse(cell(i_mkt)).ok_or_else(|| MarketDataError::Malformed {
            row,
            column: "market".into(),
            message: format!("unknown market '{}'", cell(i_mkt)),
        })?;
        if m != market {
            return Err(MarketDataError::InconsistentMetadata {
                row,
                field: format!("market (expected {market}, found {m})"),
            });
        }
        let this = [
            req(i_t, "expiry_years")?,
            req(i_v, "valuation_years")?,
            req(i_r, "rate")?,
            req(i_f, "forward")?,
        ];
        match meta {
            None => meta = Some(this),
            Some(first) => {
                let names = ["expiry_years", "valuation_years", "rate", "forward"];
                for k in 0..4 {
                    if first[k] != this[k] {
                        return Err(MarketDataError::InconsistentMetadata {
                            row,
                            field: names[k].into(),
                        });
                    }
                }
            }
        }
        let strike = req(i_k, "strike")?;
        if !(strike > 0.0) {
            return Err(MarketDataError::NonPositiveStrike { row, strike });
        }
        let kind = match cell(i_kind).to_ascii_uppercase().as_str() {
            "C" | "CALL" => OptionKind::Call,
            "P" | "PUT" => OptionKind::Put,
            other => {
                return Err(MarketDataError::Malformed {
                    row,
                    column: "kind".into(),
                    message: format!("expected C or P, found '{other}'"),
                })
            }
        };
        let bid = opt(i_bid, "bid")?;
        let ask = opt(i_ask, "ask")?;
        let mid = opt(i_mid, "mid")?;
        if let (Some(b), Some(a)) = (bid, ask) {
            if b > a {
                return Err(MarketDataError::Crossed { row, bid: b, ask: a });
            }
        }
        let both = bid.zip(ask).map(|(b, a)| 0.5 * (b + a));
        let price = match cfg.price_field {
            PriceField::Mid => both.or(mid).or(bid).or(ask),
            PriceField::Bid => bid.or(both).or(mid).or(ask),
            PriceField::Ask => ask.or(both).or(mid).or(bid),
        }
        .ok_or_else(|| MarketDataError::MissingMetadata {
            row,
            field: "price (bid/ask/mid all empty)".into(),
        })?;
        quotes.push(OptionQuote {
            strike,
            price,
            kind,
            market,
            bid,
            ask,
        });
    }
    let [expiry, valuation, rate, forward] = meta.ok_or(MarketDataError::TooFewStrikes { found: 0 })?;
    OptionSlice::with_config(market, valuation, expiry, rate, forward, quotes, cfg)
}

/// Writes a slice back in the ingestion schema. Rejected quotes are omitted.
pub fn serialize_chain(slice: &OptionSlice) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["market", "expiry_years", "valuation_years", "rate", "forward", "strike", "kind", "bid", "ask", "mid"])
        .expect("in-memory write");
    let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for q in &slice.quotes {
        w.write_record([
            slice.market.to_string(),
            slice.expiry.to_string(),
            slice.valuation_time.to_string(),
            slice.rate.to_string(),
            slice.forward.to_string(),
            q.strike.to_string(),
            q.kind.code().to_string(),
            f(q.bid),
            f(q.ask),
            q.price.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// An out-of-the-money quote used by the strips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtmQuote {
    pub strike: f64,
    pub price: f64,
    pub kind: OptionKind,
    /// True if obtained from the other option by put-call parity.
    pub from_parity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtmSplit {
    /// Strikes ≤ forward, ascending.
    pub puts: Vec<OtmQuote>,
    /// Strikes > forward, ascending.
    pub calls: Vec<OtmQuote>,
    pub empty_puts: bool,
    pub empty_calls: bool,
}

/// Splits a slice at its forward. A strike equal to the forward goes to the
/// put side. When only the in-the-money option is quoted at a strike it is
/// converted by put-call parity.
pub fn put_call_split(slice: &OptionSlice) -> OtmSplit {
    let (f, b) = (slice.forward, slice.discount);
    let mut puts = Vec::new();
    let mut calls = Vec::new();
    for k in slice.strikes() {
        let want = if k <= f { OptionKind::Put } else { OptionKind::Call };
        let q = match slice.quote(k, want) {
            Some(q) => OtmQuote {
                strike: k,
                price: q.price,
                kind: want,
                from_parity: false,
            },
            None => {
                let other = slice
                    .quote(k, if want == OptionKind::Put { OptionKind::Call } else { OptionKind::Put })
                    .expect("every listed strike has a quote");
                // C − P = B(F − K)
                let price = match want {
                    OptionKind::Put => other.price - b * (f - k),
                    OptionKind::Call => other.price + b * (f - k),
                };
                OtmQuote {
                    strike: k,
                    price: price.max(0.0),
                    kind: want,
                    from_parity: true,
                }
            }
        };
        if want == OptionKind::Put {
            puts.push(q);
        } else {
            calls.push(q);
        }
    }
    OtmSplit {
        empty_puts: puts.is_empty(),
        empty_calls: calls.is_empty(),
        puts,
        calls,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "market,expiry_years,valuation_years,rate,forward,strike,kind,bid,ask,mid\n";

    fn spx_rows() -> String {
        let mut s = HEADER.to_string();
        for (k, b, a) in [(700.0, 1.1, 1.5), (800.0, 2.4, 2.9), (900.0, 5.6, 6.3)] {
            s += &format!("spx,0.10137,0,0.0028,1101.97,{k},P,{b},{a},\n");
        }
        s
    }

    #[test]
    fn parses_forward_and_mid() {
        let s = parse_chain(spx_rows().as_bytes(), Market::Underlier).unwrap();
        assert_eq!(s.forward, 1101.97);
        assert_eq!(s.quotes.len(), 3);
        assert!((s.quotes[0].price - 1.3).abs() < 1e-12);
        assert!((s.discount - (-0.0028_f64 * 0.10137).exp()).abs() < 1e-15);
    }

    #[test]
    fn bid_field_flag() {
        let cfg = ChainConfig {
            price_field: PriceField::Bid,
            ..Default::default()
        };
        let s = parse_chain_with(spx_rows().as_bytes(), Market::Underlier, &cfg).unwrap();
        assert_eq!(s.quotes[0].price, 1.1);
    }

    #[test]
    fn single_row_rejected() {
        let s = format!("{HEADER}spx,0.1,0,0.0028,1101.97,900,P,5.6,6.3,\n");
        assert_eq!(
            parse_chain(s.as_bytes(), Market::Underlier).unwrap_err(),
            MarketDataError::TooFewStrikes { found: 1 }
        );
    }

    #[test]
    fn duplicate_strike_named() {
        let s = spx_rows() + "spx,0.10137,0,0.0028,1101.97,800,P,2.5,2.8,\n";
        let e = parse_chain(s.as_bytes(), Market::Underlier).unwrap_err();
        assert_eq!(
            e,
            MarketDataError::DuplicateStrike {
                strike: 800.0,
                kind: OptionKind::Put
            }
        );
        assert!(e.to_string().contains("800"));
    }

    #[test]
    fn crossed_market_and_bad_cells() {
        let s = spx_rows() + "spx,0.10137,0,0.0028,1101.97,950,P,9.0,8.0,\n";
        assert!(matches!(
            parse_chain(s.as_bytes(), Market::Underlier),
            Err(MarketDataError::Crossed { row: 4, .. })
        ));
        let s = spx_rows() + "spx,0.10137,0,0.0028,1101.97,abc,P,9.0,9.5,\n";
        match parse_chain(s.as_bytes(), Market::Underlier) {
            Err(MarketDataError::Malformed { row, column, .. }) => {
                assert_eq!((row, column.as_str()), (4, "strike"));
            }
            other => panic!("{other:?}"),
        }
        let s = spx_rows() + "spx,0.10137,0,0.0028,1101.97,-5,P,9.0,9.5,\n";
        assert!(matches!(
            parse_chain(s.as_bytes(), Market::Underlier),
            Err(MarketDataError::NonPositiveStrike { row: 4, .. })
        ));
        let s = spx_rows() + "spx,0.10137,0,0.0028,,950,P,9.0,9.5,\n";
        assert!(matches!(
            parse_chain(s.as_bytes(), Market::Underlier),
            Err(MarketDataError::MissingMetadata { row: 4, .. })
        ));
    }

    #[test]
    fn static_bound_violators_rejected_with_warning() {
        let s = spx_rows() + "spx,0.10137,0,0.0028,1101.97,950,P,990,991,\n";
        let sl = parse_chain(s.as_bytes(), Market::Underlier).unwrap();
        assert_eq!(sl.quotes.len(), 3);
        assert_eq!(sl.rejected.len(), 1);
        assert!(sl.warnings[0].contains("950"));
    }

    #[test]
    fn split_boundary_goes_to_puts() {
        let q = |k, kind| OptionQuote::new(k, 1.0, kind, Market::Underlier);
        let s = OptionSlice::new(
            Market::Underlier,
            0.0,
            0.5,
            0.0,
            100.0,
            vec![q(90.0, OptionKind::Put), q(100.0, OptionKind::Put), q(110.0, OptionKind::Call)],
        )
        .unwrap();
        let sp = put_call_split(&s);
        assert_eq!(sp.puts.iter().map(|q| q.strike).collect::<Vec<_>>(), vec![90.0, 100.0]);
        assert_eq!(sp.calls.iter().map(|q| q.strike).collect::<Vec<_>>(), vec![110.0]);
    }

    #[test]
    fn split_flags_empty_side() {
        let q = |k| OptionQuote::new(k, 1.0, OptionKind::Call, Market::Underlier);
        let s = OptionSlice::new(Market::Underlier, 0.0, 0.5, 0.0, 100.0, vec![q(110.0), q(120.0), q(130.0)]).unwrap();
        let sp = put_call_split(&s);
        assert!(sp.empty_puts && !sp.empty_calls);
    }

    #[test]
    fn all_puts_below_forward_land_on_put_side() {
        let s = parse_chain(spx_rows().as_bytes(), Market::Underlier).unwrap();
        let sp = put_call_split(&s);
        assert_eq!(sp.puts.len(), 3);
        assert!(sp.empty_calls);
    }

    #[test]
    fn tenor_parsing() {
        assert!((Tenor::parse("30d").unwrap().tau - 30.0 / 365.0).abs() < 1e-15);
        assert_eq!(Tenor::default().tau, 30.0 / 365.0);
        assert!(Tenor::parse("-1").is_err());
    }
}
