use proptest::prelude::*;

use vixlink::black_scholes::{bs_price, implied_vol, BsInputs};
use vixlink::market_data::{parse_chain, serialize_chain, Market, OptionKind, OptionQuote, OptionSlice, Tenor};
use vixlink::quad::{integrate, integrate_to_inf};
use vixlink::special_fn::{bessel_i, hyp1f1};
use vixlink::strip_replication::{moment_claim_vix_strip, vix_from_strip, StripConfig};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn bs(f: f64, k: f64, vol: f64, t: f64, b: f64, kind: OptionKind) -> f64 {
    bs_price(
        &BsInputs {
            forward: f,
            strike: k,
            vol,
            ttm: t,
            discount: b,
        },
        kind,
    )
}

/// Log-spaced strikes out to ten standard deviations.
fn flat(market: Market, f: f64, vol: f64, t: f64, r: f64, n: usize) -> OptionSlice {
    let b = (-r * t).exp();
    let w = 10.0 * vol * t.sqrt();
    let quotes = (0..n)
        .map(|i| {
            let k = f * (-w + 2.0 * w * i as f64 / (n - 1) as f64).exp();
            let kind = if k < f { OptionKind::Put } else { OptionKind::Call };
            OptionQuote::new(k, bs(f, k, vol, t, b, kind), kind, market)
        })
        .collect();
    OptionSlice::new(market, 0.0, t, r, f, quotes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bessel_recurrence(a in 1.0f64..20.0, x in 0.05f64..200.0) {
        let lhs = bessel_i(a - 1.0, x).unwrap() - bessel_i(a + 1.0, x).unwrap();
        let rhs = 2.0 * a / x * bessel_i(a, x).unwrap();
        prop_assert!(rel(lhs, rhs) < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn kummer_transformation(a in -3.0f64..5.0, b in 0.5f64..8.0, x in -20.0f64..20.0) {
        let lhs = hyp1f1(a, b, x).unwrap();
        let rhs = x.exp() * hyp1f1(b - a, b, -x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(rhs.abs()).max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn quadrature_matches_antiderivatives(c in -5.0f64..5.0, lo in -2.0f64..0.0, w in 0.1f64..4.0) {
        let hi = lo + w;
        let exact = if c.abs() < 1e-12 { w } else { ((c * hi).exp() - (c * lo).exp()) / c };
        let got = integrate(|x| (c * x).exp(), lo, hi, 1e-13);
        prop_assert!(rel(got, exact) < 1e-10);
        let lam = c.abs() + 0.1;
        let tail = integrate_to_inf(|x| (-lam * x).exp(), 0.0, 1e-13);
        prop_assert!(rel(tail, 1.0 / lam) < 1e-9);
    }

    #[test]
    fn bs_parity_and_monotonicity(
        f in 10.0f64..500.0,
        m in 0.5f64..2.0,
        vol in 0.05f64..1.5,
        t in 0.02f64..2.0,
        r in 0.0f64..0.08,
    ) {
        let k = f * m;
        let b = (-r * t).exp();
        let c = bs(f, k, vol, t, b, OptionKind::Call);
        let p = bs(f, k, vol, t, b, OptionKind::Put);
        prop_assert!((c - p - b * (f - k)).abs() < 1e-9 * f);
        prop_assert!(bs(f, k * 1.01, vol, t, b, OptionKind::Call) <= c);
        prop_assert!(bs(f, k * 1.01, vol, t, b, OptionKind::Put) >= p);
        prop_assert!(bs(f, k, vol * 1.05, t, b, OptionKind::Call) >= c);
        prop_assert!(c >= b * (f - k).max(0.0) - 1e-12 && c <= b * f);
    }

    #[test]
    fn implied_vol_round_trip(
        f in 10.0f64..500.0,
        m in 0.7f64..1.4,
        vol in 0.05f64..1.5,
        t in 0.05f64..2.0,
        call in any::<bool>(),
    ) {
        let k = f * m;
        let kind = if call { OptionKind::Call } else { OptionKind::Put };
        let price = bs(f, k, vol, t, 1.0, kind);
        prop_assume!(price > 1e-6 * f);
        let iv = implied_vol(price, f, k, t, 1.0, kind).unwrap();
        prop_assert!((iv - vol).abs() < 1e-6, "{iv} vs {vol}");
    }

    #[test]
    fn chain_serialize_parse_round_trip(
        f in 10.0f64..5000.0,
        vol in 0.1f64..1.0,
        t in 0.05f64..1.0,
        r in 0.0f64..0.05,
        n in 5usize..40,
        vix in any::<bool>(),
    ) {
        let market = if vix { Market::VolIndex } else { Market::Underlier };
        let s = flat(market, f, vol, t, r, n);
        let back = parse_chain(serialize_chain(&s).as_bytes(), market).unwrap();
        prop_assert_eq!(back.quotes.len(), s.quotes.len());
        prop_assert_eq!(back.market, s.market);
        prop_assert!(rel(back.forward, s.forward) < 1e-15);
        prop_assert!(rel(back.discount, s.discount) < 1e-14);
        for (a, b) in back.quotes.iter().zip(&s.quotes) {
            prop_assert_eq!(a.kind, b.kind);
            prop_assert_eq!(a.strike, b.strike);
            prop_assert_eq!(a.price, b.price);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flat_smile_vix_is_the_vol(vol in 0.08f64..0.8, days in 10.0f64..60.0) {
        let t = days / 365.0;
        let s = flat(Market::Underlier, 100.0, vol, t, 0.0, 300);
        let v = vix_from_strip(&s, Tenor::new(t).unwrap(), &StripConfig::default()).unwrap();
        prop_assert!(rel(v.vix, vol) < 5e-3, "{} vs {vol}", v.vix);
    }

    #[test]
    fn lognormal_vix_moments(vol in 0.2f64..1.0, x in 10.0f64..40.0, r in 0.0f64..0.05, n in 2u32..4) {
        let t = 0.1;
        let s = flat(Market::VolIndex, x, vol, t, r, 300);
        let got = moment_claim_vix_strip(&s, n as f64, &StripConfig::default()).unwrap();
        let nf = n as f64;
        let exact = (-r * t).exp() * x.powf(nf) * (0.5 * nf * (nf - 1.0) * vol * vol * t).exp();
        prop_assert!(rel(got.value, exact) < 5e-3, "{} vs {exact}", got.value);
        prop_assert!(!got.diagnostics.divergent);
    }
}
