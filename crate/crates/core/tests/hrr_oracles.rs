use cogkit_core::hrr::{
    bind, cleanup, cosine, involution, permute, random_symbol, superpose, unbind, HrrVector, SymbolLexicon,
};
use proptest::prelude::*;

/// `c_j = Σ_k a_k · b_{(j − k) mod d}` evaluated term by term.
fn direct_convolution(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = a.len();
    (0..d)
        .map(|j| (0..d).map(|k| a[k] * b[(j + d - k) % d]).sum())
        .collect()
}

fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let diff: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / scale
}

fn sym(name: &str, d: usize, seed: u64) -> HrrVector {
    random_symbol(name, d, seed).unwrap()
}

fn unit(name: &str, d: usize, seed: u64) -> HrrVector {
    sym(name, d, seed).normalized().unwrap()
}

#[test]
fn bind_matches_direct_sum() {
    for d in [1, 2, 3, 17, 32, 33, 64, 100, 256] {
        for t in 0..100u64 {
            let a = sym("a", d, t);
            let b = sym("b", d, t);
            let fast = bind(&a, &b).unwrap();
            let slow = direct_convolution(a.as_slice(), b.as_slice());
            assert!(rel_err(fast.as_slice(), &slow) <= 1e-10, "d={d} trial {t}");
        }
    }
}

#[test]
fn symbol_norm_is_one_on_average() {
    let mean: f64 = (0..10_000u64)
        .map(|s| {
            let v = sym("x", 256, s);
            v.dot(&v).unwrap()
        })
        .sum::<f64>()
        / 10_000.0;
    assert!((mean - 1.0).abs() <= 0.02, "mean squared norm {mean}");
}

#[test]
fn random_symbols_are_quasi_orthogonal() {
    let mean: f64 = (0..1000u64)
        .map(|s| cosine(&sym("A", 1024, s), &sym("B", 1024, s)).unwrap().abs())
        .sum::<f64>()
        / 1000.0;
    assert!(mean < 0.1, "mean |cos| {mean}");
}

#[test]
fn unbinding_recovers_the_bound_item() {
    let mean: f64 = (0..100u64)
        .map(|s| {
            let a = unit("a", 512, s);
            let b = unit("b", 512, s);
            cosine(&unbind(&bind(&a, &b).unwrap(), &b).unwrap(), &a).unwrap()
        })
        .sum::<f64>()
        / 100.0;
    assert!(mean >= 0.6, "mean cosine {mean}");
}

#[test]
fn superposition_resembles_its_members() {
    let wins = (0..100u64)
        .filter(|&s| {
            let (a, b, c) = (sym("a", 512, s), sym("b", 512, s), sym("c", 512, s));
            let sum = superpose([&a, &b], false).unwrap();
            cosine(&sum, &a).unwrap() > cosine(&sum, &c).unwrap()
        })
        .count();
    assert!(wins >= 95, "{wins}/100");
}

#[test]
fn cleanup_after_unbinding() {
    let names: Vec<String> = (0..50).map(|i| format!("s{i}")).collect();
    let mut hits = 0;
    for t in 0..100u64 {
        let lex = SymbolLexicon::with_names(&names, 1024, t).unwrap();
        let a = &names[(t as usize * 7) % 50];
        let b = &names[(t as usize * 13 + 1) % 50];
        let c = bind(lex.get(a).unwrap(), lex.get(b).unwrap()).unwrap();
        let got = cleanup(&unbind(&c, lex.get(b).unwrap()).unwrap(), &lex, 1).unwrap();
        if got[0].0 == *a {
            hits += 1;
        }
    }
    assert!(hits >= 99, "{hits}/100");
}

#[test]
fn lexicon_regenerates_bit_identically() {
    let names = ["x", "y", "z"];
    let a = SymbolLexicon::with_names(&names, 128, 5).unwrap();
    let b = SymbolLexicon::from_text(&a.to_text()).unwrap();
    for n in names {
        let (va, vb) = (a.get(n).unwrap().as_slice(), b.get(n).unwrap().as_slice());
        assert!(va.iter().zip(vb).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

fn vec_strategy(d: usize) -> impl Strategy<Value = HrrVector> {
    prop::collection::vec(-1.0f64..1.0, d).prop_map(|v| HrrVector::new(v).unwrap())
}

fn close(x: &HrrVector, y: &HrrVector) -> bool {
    rel_err(x.as_slice(), y.as_slice()) <= 1e-9 || x.norm() + y.norm() < 1e-12
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bind_is_commutative(a in vec_strategy(48), b in vec_strategy(48)) {
        prop_assert!(close(&bind(&a, &b).unwrap(), &bind(&b, &a).unwrap()));
    }

    #[test]
    fn bind_is_associative(a in vec_strategy(40), b in vec_strategy(40), c in vec_strategy(40)) {
        let left = bind(&bind(&a, &b).unwrap(), &c).unwrap();
        let right = bind(&a, &bind(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right));
    }

    #[test]
    fn bind_distributes_over_superpose(a in vec_strategy(36), b in vec_strategy(36), c in vec_strategy(36)) {
        let left = bind(&a, &superpose([&b, &c], false).unwrap()).unwrap();
        let right = superpose([&bind(&a, &b).unwrap(), &bind(&a, &c).unwrap()], false).unwrap();
        prop_assert!(close(&left, &right));
    }

    #[test]
    fn identity_is_neutral(a in vec_strategy(70)) {
        prop_assert!(close(&bind(&a, &HrrVector::identity(70).unwrap()).unwrap(), &a));
    }

    #[test]
    fn involution_is_an_isometry(a in vec_strategy(33)) {
        let mut before = a.as_slice().to_vec();
        let mut after = involution(&a).into_vec();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        prop_assert_eq!(after, before);
        prop_assert!((involution(&a).norm() - a.norm()).abs() <= 1e-15 * a.norm());
        prop_assert_eq!(involution(&involution(&a)), a);
    }

    #[test]
    fn permute_inverts(a in vec_strategy(20), s in -100i64..100) {
        prop_assert_eq!(permute(&permute(&a, s), -s), a.clone());
        prop_assert_eq!(permute(&a, 20), a);
    }

    #[test]
    fn cleanup_is_scale_invariant(seed in 0u64..10_000, c in 1e-3f64..1e3) {
        let names: Vec<String> = (0..12).map(|i| format!("n{i}")).collect();
        let lex = SymbolLexicon::with_names(&names, 64, seed).unwrap();
        let probe = sym("probe", 64, seed);
        let base: Vec<String> = cleanup(&probe, &lex, 12).unwrap().into_iter().map(|p| p.0).collect();
        let scaled: Vec<String> = cleanup(&probe.scale(c).unwrap(), &lex, 12).unwrap().into_iter().map(|p| p.0).collect();
        prop_assert_eq!(base, scaled);
    }

    #[test]
    fn cosine_is_bounded(a in vec_strategy(16), b in vec_strategy(16)) {
        if !a.is_zero() && !b.is_zero() {
            let c = cosine(&a, &b).unwrap();
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
