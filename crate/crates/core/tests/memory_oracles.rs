use cogkit_core::hrr::{cosine, random_symbol, HrrVector, SymbolLexicon};
use cogkit_core::memory::{DeclarativeMemory, WorkingMemoryBuffer};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

#[test]
fn later_positions_probe_more_cleanly() {
    let lex = SymbolLexicon::with_names(&names(16), 2048, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pool = names(16);
    let mut wins = 0;
    for _ in 0..100 {
        let list: Vec<&String> = (0..5).map(|_| pool.choose(&mut rng).unwrap()).collect();
        let mut wm = WorkingMemoryBuffer::new(2048, 0.8).unwrap();
        for item in &list {
            wm.encode(lex.get(item).unwrap()).unwrap();
        }
        let c5 = cosine(&wm.probe(5).unwrap(), lex.get(list[4]).unwrap()).unwrap();
        let c2 = cosine(&wm.probe(2).unwrap(), lex.get(list[1]).unwrap()).unwrap();
        if c5 > c2 {
            wins += 1;
        }
    }
    assert!(wins >= 90, "{wins}/100");
}

#[test]
fn list_recall_beats_chance() {
    let pool = names(16);
    let lex = SymbolLexicon::with_names(&pool, 2048, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut correct, mut total) = (0, 0);
    for _ in 0..100 {
        let list: Vec<&String> = (0..7).map(|_| pool.choose(&mut rng).unwrap()).collect();
        let mut wm = WorkingMemoryBuffer::new(2048, 0.9).unwrap();
        for item in &list {
            wm.encode(lex.get(item).unwrap()).unwrap();
        }
        for (p, item) in list.iter().enumerate() {
            correct += (wm.recall(p + 1, &lex).unwrap().0 == **item) as usize;
            total += 1;
        }
    }
    assert!(correct as f64 / total as f64 > 1.0 / 16.0);
}

#[test]
fn single_item_recall_is_near_exact_at_small_d() {
    for d in [64, 128, 1024] {
        let lex = SymbolLexicon::with_names(&names(10), d, 9).unwrap();
        for (name, v) in lex.iter() {
            let mut wm = WorkingMemoryBuffer::new(d, 0.5).unwrap();
            wm.encode(v).unwrap();
            let (got, score) = wm.recall(1, &lex).unwrap();
            assert_eq!(got, name);
            assert!(score >= 0.99);
        }
    }
}

#[test]
fn cue_retrieves_its_own_trace() {
    let mut hits = 0;
    for t in 0..100u64 {
        let concepts = names(20);
        let lex = SymbolLexicon::with_names(&concepts, 1024, t).unwrap();
        let mut dm = DeclarativeMemory::new(lex, 0.1).unwrap();
        for c in &concepts {
            dm.store_vector(c, &random_symbol(&format!("trace-{c}"), 1024, t).unwrap())
                .unwrap();
        }
        let target = &concepts[t as usize % 20];
        let r = dm.retrieve(dm.trace(target).unwrap(), 1).unwrap();
        hits += (r.ranked[0].0 == *target) as usize;
    }
    assert!(hits >= 99);
}

fn memory_with(contexts: &[&[&str]]) -> DeclarativeMemory {
    let lex = SymbolLexicon::with_names(&["X", "A", "B", "C", "D"], 128, 1).unwrap();
    let mut dm = DeclarativeMemory::new(lex, 0.1).unwrap();
    for c in contexts {
        dm.store("X", c).unwrap();
    }
    dm
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_counts_positions(n in 0usize..10, rho in 0.05f64..=1.0) {
        let lex = SymbolLexicon::with_names(&names(4), 64, 2).unwrap();
        let mut wm = WorkingMemoryBuffer::new(64, rho).unwrap();
        for i in 0..n {
            wm.encode(lex.get(&format!("w{}", i % 4)).unwrap()).unwrap();
        }
        prop_assert_eq!(wm.position(), n);
        prop_assert_eq!(wm.contents().is_zero(), n == 0);
    }

    #[test]
    fn strengths_form_a_distribution(seed in 0u64..10_000, n in 1usize..12, tau in 0.01f64..5.0) {
        let concepts = names(n);
        let lex = SymbolLexicon::with_names(&concepts, 64, seed).unwrap();
        let mut dm = DeclarativeMemory::new(lex, tau).unwrap();
        for c in &concepts {
            dm.store_vector(c, &random_symbol(c, 64, seed + 1).unwrap()).unwrap();
        }
        let r = dm.retrieve(&random_symbol("cue", 64, seed).unwrap(), 3).unwrap();
        prop_assert!((r.strengths.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(r.strengths.iter().all(|&s| s >= 0.0));
        prop_assert!(r.ranked.windows(2).all(|w| w[0].1 >= w[1].1));
        prop_assert!(r.strengths.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn store_order_commutes(i in 0usize..4, j in 0usize..4) {
        let all = ["A", "B", "C", "D"];
        let c1: &[&str] = &all[..=i];
        let c2: &[&str] = &all[j..];
        let ab = memory_with(&[c1, c2]);
        let ba = memory_with(&[c2, c1]);
        let (x, y) = (ab.trace("X").unwrap(), ba.trace("X").unwrap());
        let diff: f64 = x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-9 * (1.0 + x.norm()));
    }

    #[test]
    fn ranking_ignores_trace_scale(seed in 0u64..10_000, c in 1e-3f64..1e3) {
        let concepts = names(6);
        let lex = SymbolLexicon::with_names(&concepts, 64, seed).unwrap();
        let mut plain = DeclarativeMemory::new(lex.clone(), 0.1).unwrap();
        let mut scaled = DeclarativeMemory::new(lex, 0.1).unwrap();
        for name in &concepts {
            let v = random_symbol(name, 64, seed ^ 77).unwrap();
            plain.store_vector(name, &v).unwrap();
            scaled.store_vector(name, &v.scale(c).unwrap()).unwrap();
        }
        let cue = random_symbol("cue", 64, seed).unwrap();
        let order = |dm: &DeclarativeMemory| -> Vec<String> {
            dm.retrieve(&cue, 6).unwrap().ranked.into_iter().map(|p| p.0).collect()
        };
        prop_assert_eq!(order(&plain), order(&scaled));
    }

    #[test]
    fn every_trace_has_a_symbol_and_a_count(k in 0usize..6) {
        let lex = SymbolLexicon::with_names(&names(6), 32, 0).unwrap();
        let mut dm = DeclarativeMemory::new(lex, 0.1).unwrap();
        for i in 0..k {
            dm.store(&format!("w{i}"), &["w5"]).unwrap();
        }
        for (name, _) in dm.traces() {
            prop_assert!(dm.lexicon().contains(name));
            prop_assert!(dm.store_count(name) > 0);
        }
        let zero = HrrVector::zeros(32).unwrap();
        dm.store_vector("w0", &zero).unwrap();
        prop_assert_eq!(dm.trace("w0").is_some(), k > 0);
    }
}
