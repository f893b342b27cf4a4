mod support;

use autoprompt_core::similarity::{jaro, jaro_winkler, SimilarityParams};
use proptest::prelude::*;
use support::{all_strings, brute_jaro, brute_jaro_winkler};

#[test]
fn matches_brute_force_on_all_short_abc_strings() {
    let strings = all_strings(&['a', 'b', 'c'], 5);
    assert_eq!(strings.len(), 364);
    let p = SimilarityParams::default();
    for s1 in &strings {
        for s2 in &strings {
            let j = jaro(s1, s2);
            let expected = brute_jaro(s1, s2);
            assert!(
                (j - expected).abs() <= 1e-9,
                "jaro({s1:?}, {s2:?}) = {j}, oracle {expected}"
            );
            let jw = jaro_winkler(s1, s2, &p);
            let expected = brute_jaro_winkler(s1, s2, 0.1, 4);
            assert!(
                (jw - expected).abs() <= 1e-9,
                "jw({s1:?}, {s2:?}) = {jw}, oracle {expected}"
            );
        }
    }
}

#[test]
fn oracle_agrees_with_hand_computed_vectors() {
    assert!((brute_jaro("MARTHA", "MARHTA") - 0.944444).abs() < 1e-6);
    assert!((brute_jaro_winkler("MARTHA", "MARHTA", 0.1, 4) - 0.961111).abs() < 1e-6);
    assert!((brute_jaro("DWAYNE", "DUANE") - 0.822222).abs() < 1e-6);
    assert!((brute_jaro_winkler("DWAYNE", "DUANE", 0.1, 4) - 0.84).abs() < 1e-6);
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof!["[a-d]{0,12}", "[A-Za-zÄÖÜäöüß _]{0,24}", any::<String>(),]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn symmetric(a in text(), b in text()) {
        let p = SimilarityParams::default();
        prop_assert_eq!(jaro(&a, &b), jaro(&b, &a));
        prop_assert_eq!(jaro_winkler(&a, &b, &p), jaro_winkler(&b, &a, &p));
    }

    #[test]
    fn identity(a in text()) {
        prop_assert_eq!(jaro_winkler(&a, &a, &SimilarityParams::default()), 1.0);
    }

    #[test]
    fn bounded_and_dominant(
        a in text(),
        b in text(),
        scale in 0.0f64..=0.25,
        max_prefix in 0usize..=4,
    ) {
        let p = SimilarityParams::new(scale, max_prefix).unwrap();
        let j = jaro(&a, &b);
        let jw = jaro_winkler(&a, &b, &p);
        prop_assert!((0.0..=1.0).contains(&j));
        prop_assert!((0.0..=1.0).contains(&jw));
        prop_assert!(jw >= j);
    }

    #[test]
    fn equal_only_when_identical(a in "[a-c]{0,6}", b in "[a-c]{0,6}") {
        prop_assert_eq!(jaro(&a, &b) == 1.0, a == b);
    }
}
