use std::collections::BTreeMap;

use mchl_core::arithmetic::{
    direct_search_factorize, memorize_table, prime_factorize, required_bucket_size, Selectors, TableModel,
    DEFAULT_TEMPERATURE,
};
use proptest::prelude::*;

fn table(m: usize) -> TableModel {
    memorize_table(m, required_bucket_size(m).unwrap(), DEFAULT_TEMPERATURE).unwrap()
}

fn factor_oracle(mut n: usize) -> BTreeMap<usize, u64> {
    let mut out = BTreeMap::new();
    let mut d = 2;
    while d * d <= n {
        while n.is_multiple_of(d) {
            *out.entry(d).or_default() += 1;
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        *out.entry(n).or_default() += 1;
    }
    out
}

#[test]
fn exhaustive_recall_up_to_m30() {
    for m in [1, 2, 7, 16, 30] {
        let t = table(m);
        for a in 1..=m {
            for b in 1..=m {
                assert_eq!(t.query_product(a, b).unwrap(), a * b, "M={m}");
            }
        }
    }
}

#[test]
fn aliquot_and_primality_match_trial_division() {
    let m = 30;
    let t = table(m);
    for n in 1..=m {
        let divisors: Vec<usize> = (1..=n).filter(|d| n % d == 0).collect();
        assert_eq!(t.aliquot_parts(n).unwrap().divisors, divisors);
        assert_eq!(t.is_prime_lookup(n).unwrap(), divisors.len() == 2);
    }
}

#[test]
fn m50_table_factorizes_every_label() {
    let t = table(50);
    let ops = Selectors::build(&t);
    for n in (1..=2500).filter(|&n| t.count(n) > 0) {
        let f = prime_factorize(&t, &ops, n).unwrap();
        assert_eq!(f.factors, factor_oracle(n), "n={n}");
        let direct = direct_search_factorize(n as u64).unwrap();
        let flat: Vec<u64> = f
            .factors
            .iter()
            .flat_map(|(&p, &e)| std::iter::repeat_n(p as u64, e as usize))
            .collect();
        assert_eq!(direct.primes, flat);
    }
}

#[test]
fn table_queries_are_thread_safe() {
    let t = table(20);
    let ops = Selectors::build(&t);
    std::thread::scope(|s| {
        for k in 0..4 {
            let (t, ops) = (&t, &ops);
            s.spawn(move || {
                for n in (2 + k..400).step_by(4).filter(|&n| t.count(n) > 0) {
                    assert_eq!(prime_factorize(t, ops, n).unwrap().factors, factor_oracle(n));
                }
            });
        }
    });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn product_of_two_table_factors_is_conserved(a in 1usize..=40, b in 1usize..=40) {
        let t = table(40);
        let ops = Selectors::build(&t);
        let f = prime_factorize(&t, &ops, a * b).unwrap();
        for s in &f.trace {
            prop_assert_eq!(s.value(), Some((a * b) as u128));
        }
        prop_assert!(f.iterations <= (a * b).ilog2() as usize + 1);
    }
}
