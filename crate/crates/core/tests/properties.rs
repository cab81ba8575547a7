use proptest::prelude::*;

use ramcheck::lang::ast::{BinOp, Func, UnOp};
use ramcheck::lang::{parse_expr_str, parse_model, parse_property, Expr};
use ramcheck::numerics::{transient_from, NumericOptions, UniformizedChain};
use ramcheck::ram::{SATELLITE_CTMC, CONSTELLATION_CTMC};
use ramcheck::{build_state_space, csl::Checker, Ctmc};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0i64..1000).prop_map(Expr::Int),
        (0.0f64..1e6).prop_map(Expr::Real),
        any::<bool>().prop_map(Expr::Bool),
        prop::sample::select(vec!["x", "y", "lambda", "MTBF"]).prop_map(|s| Expr::Ident(s.to_string())),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    let ops = vec![
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::And,
        BinOp::Or,
        BinOp::Implies,
    ];
    leaf().prop_recursive(4, 32, 3, move |inner| {
        prop_oneof![
            (prop::sample::select(ops.clone()), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            inner.clone().prop_map(|e| Expr::Unary(UnOp::Neg, Box::new(e))),
            inner.clone().prop_map(Expr::not),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(c, a, b)| Expr::Ite(Box::new(c), Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Call(Func::Min, vec![a, b])),
            inner.prop_map(|a| Expr::Call(Func::Ln, vec![a])),
        ]
    })
}

/// Random rate matrix on five states, roughly half the entries zero.
fn chain5() -> impl Strategy<Value = Ctmc> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..5.0], 25).prop_map(|r| {
        let entries: Vec<_> = (0..25)
            .filter(|&k| r[k] > 0.0)
            .map(|k| (k / 5, k % 5, r[k], None))
            .collect();
        Ctmc::from_rates(5, 0, &entries)
    })
}

fn chain_text(rates: &[(usize, usize, f64)], order: &[usize]) -> String {
    let mut s = String::from("ctmc\nmodule m\n  s : [0..4] init 0;\n");
    for &i in order {
        let (a, b, r) = rates[i];
        s.push_str(&format!("  [] s={a} -> {r:?} : (s'={b});\n"));
    }
    s.push_str("endmodule\n");
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn expression_print_parse_round_trip(e in expr()) {
        let text = e.to_string();
        let back = parse_expr_str(&text).unwrap();
        prop_assert_eq!(back, e, "{}", text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn embedded_chain_is_stochastic(c in chain5()) {
        for s in 0..5 {
            if c.is_absorbing(s) {
                continue;
            }
            let total: f64 = (0..5).map(|t| c.jump_probability(s, t)).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transient_distribution_sums_to_one(c in chain5(), t in 0.0f64..20.0) {
        let u = UniformizedChain::new(&c);
        let pi = transient_from(&u, &[1.0, 0.0, 0.0, 0.0, 0.0], t, &NumericOptions::default()).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(pi.iter().all(|&p| p >= -1e-15));
    }

    #[test]
    fn chapman_kolmogorov(c in chain5(), s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let opts = NumericOptions::default();
        let u = UniformizedChain::new(&c);
        let start = [0.2, 0.2, 0.2, 0.2, 0.2];
        let direct = transient_from(&u, &start, s + t, &opts).unwrap();
        let staged = transient_from(&u, &transient_from(&u, &start, s, &opts).unwrap(), t, &opts).unwrap();
        for (a, b) in direct.iter().zip(&staged) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn command_order_does_not_change_rates(
        rates in prop::collection::vec((0usize..5, 0usize..5, 0.01f64..10.0), 1..12),
        seed in any::<u64>(),
    ) {
        let identity: Vec<usize> = (0..rates.len()).collect();
        let mut shuffled = identity.clone();
        let mut x = seed;
        for i in (1..shuffled.len()).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (x >> 33) as usize % (i + 1));
        }
        let a = build_state_space(&parse_model(&chain_text(&rates, &identity)).unwrap()).unwrap();
        let b = build_state_space(&parse_model(&chain_text(&rates, &shuffled)).unwrap()).unwrap();
        // states are discovered in the same order only if reachability is the same, so compare by valuation
        prop_assert_eq!(a.ctmc.num_states(), b.ctmc.num_states());
        for s in 0..a.ctmc.num_states() {
            let vs = a.ctmc.valuation(s)[0];
            let sb = (0..b.ctmc.num_states()).find(|&k| b.ctmc.valuation(k)[0] == vs).unwrap();
            for t in 0..a.ctmc.num_states() {
                let vt = a.ctmc.valuation(t)[0];
                let tb = (0..b.ctmc.num_states()).find(|&k| b.ctmc.valuation(k)[0] == vt).unwrap();
                prop_assert!((a.ctmc.rate(s, t) - b.ctmc.rate(sb, tb)).abs() <= 1e-12 * a.ctmc.rate(s, t));
            }
        }
    }

    #[test]
    fn time_rescaling(c in chain5(), k in 0.1f64..10.0, t in 0.1f64..5.0) {
        let opts = NumericOptions::default();
        let scaled = {
            let entries: Vec<_> = (0..5)
                .flat_map(|s| c.transitions(s).iter().map(move |tr| (s, tr.target, tr.rate, None)))
                .map(|(s, d, r, a)| (s, d, r * k, a))
                .collect();
            Ctmc::from_rates(5, 0, &entries)
        };
        let start = [1.0, 0.0, 0.0, 0.0, 0.0];
        let a = transient_from(&UniformizedChain::new(&c), &start, t, &opts).unwrap();
        let b = transient_from(&UniformizedChain::new(&scaled), &start, t / k, &opts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn bundled_models_print_and_reparse() {
    for src in [SATELLITE_CTMC, CONSTELLATION_CTMC] {
        let ast = parse_model(src).unwrap();
        let again = parse_model(&ast.to_string()).unwrap();
        assert_eq!(ast, again);
        let (a, b) = (build_state_space(&ast).unwrap(), build_state_space(&again).unwrap());
        assert_eq!(a.ctmc.rate_matrix(), b.ctmc.rate_matrix());
    }
}

#[test]
fn threshold_agrees_with_query() {
    let model = build_state_space(&parse_model(CONSTELLATION_CTMC).unwrap()).unwrap();
    let checker = Checker::new(&model, NumericOptions::default());
    let v = checker.check(&parse_property("P=?[F<=129600 s=4]").unwrap()).unwrap().value();
    for (bound, expect) in [(v * 0.99, true), (v * 1.01, false)] {
        let q = parse_property(&format!("P>={bound:e}[F<=129600 s=4]")).unwrap();
        assert_eq!(checker.check(&q).unwrap().holds(), Some(expect));
    }
}
