use std::hint::black_box;

use cogkit_core::hrr::{bind, cleanup, random_symbol, SymbolLexicon};
use cogkit_core::ngc::{NgcCircuit, NgcConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array1;

fn binding(c: &mut Criterion) {
    let mut g = c.benchmark_group("bind");
    // 32 and below take the direct sum; larger sizes go through the FFT.
    for d in [32, 256, 1024, 2048] {
        let a = random_symbol("a", d, 1).unwrap();
        let b = random_symbol("b", d, 1).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(d), &d, |bch, _| {
            bch.iter(|| bind(black_box(&a), black_box(&b)).unwrap())
        });
    }
    g.finish();
}

fn cleanup_lookup(c: &mut Criterion) {
    let names: Vec<String> = (0..50).map(|i| format!("s{i}")).collect();
    let lex = SymbolLexicon::with_names(&names, 1024, 3).unwrap();
    let probe = random_symbol("probe", 1024, 3).unwrap();
    c.bench_function("cleanup/50x1024", |b| b.iter(|| cleanup(black_box(&probe), &lex, 1).unwrap()));
}

fn settling(c: &mut Criterion) {
    let mut g = c.benchmark_group("settle");
    g.sample_size(20);
    for sizes in [vec![8, 16, 8], vec![784, 360, 360]] {
        let circuit = NgcCircuit::new(&sizes, 7, &NgcConfig::default()).unwrap();
        let x = Array1::from_elem(sizes[0], 0.3);
        let label = sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-");
        g.bench_function(label, |b| b.iter(|| circuit.settle(&[(0, x.clone())], None).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, binding, cleanup_lookup, settling);
criterion_main!(benches);
