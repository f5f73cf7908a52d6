use fracexp::coeff::c_coefficient_analytic;
use fracexp::expansion::{exponent_set, merge_collisions, ExponentPair, Term, TermList, COLLISION_TOL};
use fracexp::expr::{parse, Expr, Func};
use fracexp::fbm::{covariance, HurstIndex};
use fracexp::gamma::gamma_value;
use fracexp::gaussian::{wick_moment, CovMatrix, PowerIndex};
use fracexp::word::{words_for_exponent, Word};
use proptest::prelude::*;

/// Sum over perfect matchings of the multiset of indices, by brute force.
fn pairing_sum(cov: &CovMatrix, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 1.0;
    }
    if labels.len() % 2 == 1 {
        return 0.0;
    }
    let first = labels[0];
    let rest = &labels[1..];
    (0..rest.len())
        .map(|j| {
            let mut remaining = rest.to_vec();
            let partner = remaining.remove(j);
            cov.get(first, partner) * pairing_sum(cov, &remaining)
        })
        .sum()
}

fn psd(dim: usize, entries: &[f64]) -> CovMatrix {
    // A Aᵀ for a dim × dim matrix A.
    CovMatrix::from_fn(dim, |i, j| (0..dim).map(|k| entries[i * dim + k] * entries[j * dim + k]).sum())
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Var),
        (0.0f64..10.0).prop_map(Expr::Const),
        (0u32..4).prop_map(|k| Expr::Const(k as f64)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            (inner.clone(), 0u32..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), Box::new(Expr::Const(k as f64)))),
            (
                inner,
                prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Tanh), Just(Func::Exp)]
            )
                .prop_map(|(a, f)| Expr::Call(f, Box::new(a))),
        ]
    })
}

fn word_strategy(max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(0u8..2, 1..=max_len).prop_map(|l| Word::new(l).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covariance_is_symmetric(s in 0.0f64..3.0, t in 0.0f64..3.0, h in 0.51f64..0.99) {
        let a = covariance(s, t, h).unwrap();
        let b = covariance(t, s, h).unwrap();
        prop_assert_eq!(a, b);
        let d = covariance(t, t, h).unwrap();
        prop_assert!((d - t.powf(2.0 * h)).abs() <= 1e-12 * t.powf(2.0 * h).max(1e-300));
    }

    #[test]
    fn wick_matches_pairings(
        entries in prop::collection::vec(-1.0f64..1.0, 9),
        powers in prop::collection::vec(0u32..4, 3),
    ) {
        let cov = psd(3, &entries);
        let labels: Vec<usize> = powers.iter().enumerate().flat_map(|(i, &p)| std::iter::repeat_n(i, p as usize)).collect();
        let want = pairing_sum(&cov, &labels);
        let got = wick_moment(&cov, &PowerIndex(powers)).unwrap();
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn wick_scales_homogeneously(
        entries in prop::collection::vec(-1.0f64..1.0, 4),
        powers in prop::collection::vec(0u32..5, 2),
        lambda in 0.1f64..3.0,
    ) {
        let cov = psd(2, &entries);
        let scaled = cov.scaled(lambda);
        let deg: u32 = powers.iter().sum();
        let idx = PowerIndex(powers);
        let a = wick_moment(&cov, &idx).unwrap();
        let b = wick_moment(&scaled, &idx).unwrap();
        let want = a * lambda.powf(deg as f64 / 2.0);
        prop_assert!((b - want).abs() <= 1e-11 * want.abs().max(1e-12));
    }

    #[test]
    fn parser_round_trips(e in expr_strategy(), x in -2.0f64..2.0) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        match (e.eval(x), back.eval(x)) {
            (Ok(a), Ok(b)) => prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{text}: {a} vs {b}"),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{text}: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn gamma_is_linear_in_f(w in word_strategy(4), x in -1.0f64..1.0, c in -2.0f64..2.0) {
        let b = parse("0.5*tanh(x) + 0.2").unwrap();
        let f = parse("sin(x)").unwrap();
        let g = parse("x^3 - exp(x)").unwrap();
        let combo = parse(&format!("sin(x) + ({c:?})*(x^3 - exp(x))")).unwrap();
        let lhs = gamma_value(&w, &combo, &b, x).unwrap();
        let rhs = gamma_value(&w, &f, &b, x).unwrap() + c * gamma_value(&w, &g, &b, x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn coefficients_are_reversal_invariant(w in word_strategy(5), h in 0.55f64..0.95) {
        prop_assume!(w.dt_slots().len() <= 3);
        let hurst = HurstIndex::new(h).unwrap();
        let a = c_coefficient_analytic(&w, hurst, 1e-10).unwrap().value;
        let b = c_coefficient_analytic(&w.reversed(), hurst, 1e-10).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
    }

    #[test]
    fn exponents_strictly_increase_after_merge(p in 0u32..4, q in 0u32..4, h in 0.51f64..0.99) {
        prop_assume!(p + q > 0);
        let hurst = HurstIndex::new(h).unwrap();
        let pairs = exponent_set(p, q, hurst).unwrap();
        let terms = TermList {
            hurst,
            truncation: ExponentPair::new(p, q),
            terms: pairs
                .iter()
                .map(|&pair| Term { pair, exponent: pair.value(h), coefficient: 1.0, stderr: None })
                .collect(),
        };
        let merged = merge_collisions(terms, COLLISION_TOL).unwrap();
        let total: f64 = merged.terms.iter().map(|t| t.coefficient).sum();
        prop_assert_eq!(total, pairs.len() as f64);
        prop_assert!(merged.terms.windows(2).all(|w| w[1].exponent > w[0].exponent));
    }
}

/// The expansion coefficient `Σ_I c_I Γ_I` is the same whether `Γ` is built
/// from the outermost or the innermost letter first.
#[test]
fn expansion_sum_is_independent_of_gamma_order() {
    let f = parse("sin(x)").unwrap();
    let b = parse("0.5*tanh(x)").unwrap();
    let hurst = HurstIndex::new(0.7).unwrap();
    for (m, n) in [(0, 2), (1, 1), (1, 2), (2, 1), (0, 3)] {
        let mut forward = 0.0;
        let mut backward = 0.0;
        for w in words_for_exponent(m, n).unwrap() {
            let c = c_coefficient_analytic(&w, hurst, 1e-12).unwrap().value;
            forward += c * gamma_value(&w, &f, &b, 0.3).unwrap();
            backward += c * gamma_value(&w.reversed(), &f, &b, 0.3).unwrap();
        }
        assert!((forward - backward).abs() < 1e-10, "({m},{n}): {forward} vs {backward}");
    }
}
