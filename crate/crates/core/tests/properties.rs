use kothe_shifts::classify::{classify, Symbol};
use kothe_shifts::construct::{build_blocks, verify_blocks, BlockParams};
use kothe_shifts::logmath::{log_add_exp, log_sum_exp, tail_sum_test, TailVerdict, TestTuning};
use kothe_shifts::orbit::{build_fhc_vector, hitting_density, LazyVector};
use kothe_shifts::seqdsl::{eval, parse, Bindings};
use kothe_shifts::shifts::{apply_power, WeightSeq};
use kothe_shifts::spaces::{seminorm, BUILTIN_SPACES};
use kothe_shifts::{FiniteVector, LogReal, SearchConfig, SpaceSpec};
use proptest::prelude::*;

proptest! {
    #[test]
    fn log_add_exp_is_commutative_and_dominates(a in -700.0f64..700.0, b in -700.0f64..700.0) {
        let s = log_add_exp(a, b);
        prop_assert_eq!(s, log_add_exp(b, a));
        prop_assert!(s >= a.max(b));
        prop_assert!(s <= a.max(b) + std::f64::consts::LN_2 + 1e-12);
    }

    #[test]
    fn log_sum_matches_direct_sum(xs in prop::collection::vec(-30.0f64..30.0, 1..50)) {
        let direct: f64 = xs.iter().map(|x| x.exp()).sum();
        prop_assert!((log_sum_exp(xs.iter().copied()) - direct.ln()).abs() < 1e-12 * direct.ln().abs().max(1.0));
    }

    #[test]
    fn log_reals_multiply_beyond_f64(a in 500.0f64..5000.0, b in 500.0f64..5000.0) {
        let x = LogReal::from_ln(a).unwrap();
        let y = LogReal::from_ln(b).unwrap();
        let p = x.checked_mul(y).unwrap();
        prop_assert!((p.ln() - (a + b)).abs() < 1e-9);
        prop_assert!((p.checked_div(y).unwrap().ln() - a).abs() < 1e-9);
    }

    #[test]
    fn geometric_series_are_classified_by_ratio(r in 0.05f64..0.9) {
        let terms: Vec<f64> = (0..2000).map(|n| n as f64 * r.ln()).collect();
        prop_assert_eq!(tail_sum_test(&terms, TestTuning::default()).verdict, TailVerdict::Converges);
        let flat = vec![r.ln(); 2000];
        prop_assert_eq!(tail_sum_test(&flat, TestTuning::default()).verdict, TailVerdict::Diverges);
    }

    #[test]
    fn printed_expressions_parse_back(a in 1u32..9, b in 1u32..9, c in 0u32..5) {
        let text = format!("({a} * n + {b})^{c} / (m + {b}) - log(n + {a})");
        let e = parse(&text).unwrap();
        let again = parse(&e.to_string()).unwrap();
        for n in 0..20 {
            let bind = Bindings::nm(n as f64, 3.0);
            let x = eval(&e, &bind).unwrap();
            let y = eval(&again, &bind).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn powers_of_the_shift_compose(
        table in prop::collection::vec(0.25f64..4.0, 20),
        coords in prop::collection::vec(-2.0f64..2.0, 8),
        i in 0usize..4,
        j in 0usize..4,
    ) {
        let w = WeightSeq::from_table(&table).unwrap();
        let x = FiniteVector::from_pairs(coords.iter().copied().enumerate().collect());
        let once = apply_power(&w, &x, i + j);
        let twice = apply_power(&w, &apply_power(&w, &x, i), j);
        for k in 0..8 {
            let (a, b) = (once.get(k), twice.get(k));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn lazy_iterates_agree_with_apply_power(c in 1.1f64..3.0, n in 0usize..30, start in 0usize..10) {
        let w = WeightSeq::constant(c).unwrap();
        let x = LazyVector::unit(&w, start + n);
        let direct = apply_power(&w, &x.section(0, start + n + 1), n);
        let lazy = x.iterate_section(n, start + 1);
        for k in 0..=start {
            let (a, b) = (direct.get(k), lazy.get(k));
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "k={} {} {}", k, a, b);
        }
    }
}

#[test]
fn seminorms_increase_with_the_index() {
    let x = FiniteVector::from_pairs(vec![(0, 1.0), (3, -2.0), (10, 0.5)]);
    for name in BUILTIN_SPACES {
        let space = SpaceSpec::builtin(name).unwrap();
        let norms: Vec<f64> = (1..=6).map(|m| seminorm(&space, &x, m).unwrap().ln()).collect();
        assert!(norms.windows(2).all(|p| p[0] <= p[1] + 1e-12), "{name}: {norms:?}");
    }
}

#[test]
fn every_builtin_space_has_consistent_verdicts() {
    let cfg = SearchConfig::default().with_horizon(10_000);
    for name in BUILTIN_SPACES {
        let c = classify(&SpaceSpec::builtin(name).unwrap(), &cfg);
        assert!(
            c.invariant_violations().is_empty(),
            "{name}: {:?}",
            c.invariant_violations()
        );
        if c.symbol == Symbol::NoHypercyclic {
            assert!(!c.exists_chaotic.verdict.holds(), "{name}");
        }
    }
}

#[test]
fn blocks_survive_an_independent_reverification() {
    let b = build_blocks(3, 100_000, &BlockParams::default()).unwrap();
    let again = verify_blocks(&b.cuts, &b.sets, b.horizon, 1.0 / 64.0);
    assert!(again.passed());
    assert_eq!(again, b.report);
    let mut broken = b.sets.clone();
    let stolen = broken[0][5];
    broken[1].push(stolen);
    broken[1].sort_unstable();
    assert!(!verify_blocks(&b.cuts, &broken, b.horizon, 1.0 / 64.0).passed());
}

#[test]
fn orbit_vector_hits_on_every_block_member() {
    let space = SpaceSpec::builtin("entire").unwrap();
    let blocks = build_blocks(3, 30_000, &BlockParams::default()).unwrap();
    let w = WeightSeq::geometric(2.0).unwrap();
    let target = FiniteVector::unit(0);
    let x = build_fhc_vector(&w, &blocks, std::slice::from_ref(&target)).unwrap();
    let rep = hitting_density(&space, &x, &target, 1, 0.1, 30_000, 0);
    for &n in &blocks.union_members() {
        assert!(rep.rows[n].hit, "n={n}");
    }
}
