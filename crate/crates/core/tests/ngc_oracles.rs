use cogkit_core::ngc::{energy, local_weight_update, Activation, FeedbackInit, GatingMask, NgcCircuit, NgcConfig};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gaussian(n: usize, std: f64, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).unwrap();
    Array1::from_shape_simple_fn(n, || normal.sample(&mut rng))
}

/// `0.5 ‖z_below − W · tanh(z)‖²`, computed without the library.
fn local_energy(w: &Array2<f64>, z_below: &Array1<f64>, z: &Array1<f64>) -> f64 {
    let phi = z.mapv(f64::tanh);
    let mut total = 0.0;
    for i in 0..w.nrows() {
        let mut mu = 0.0;
        for j in 0..w.ncols() {
            mu += w[[i, j]] * phi[j];
        }
        let e = z_below[i] - mu;
        total += 0.5 * e * e;
    }
    total
}

#[test]
fn hebbian_update_matches_finite_difference_gradient() {
    let h = 1e-6;
    for seed in 0..20u64 {
        let cfg = NgcConfig {
            sigma: 0.3,
            ..NgcConfig::default()
        };
        let circuit = NgcCircuit::new(&[8, 16, 8], seed, &cfg).unwrap();
        let x = gaussian(8, 1.0, 1000 + seed);
        let state = circuit.settle(&[(0, x)], None).unwrap();
        let updates = circuit.weight_updates(&state, 1.0);
        for l in 1..=circuit.depth() {
            let mut w = circuit.weight(l).clone();
            let mut fd = Array2::<f64>::zeros(w.dim());
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    let orig = w[[i, j]];
                    w[[i, j]] = orig + h;
                    let up = local_energy(&w, &state.z[l - 1], &state.z[l]);
                    w[[i, j]] = orig - h;
                    let down = local_energy(&w, &state.z[l - 1], &state.z[l]);
                    w[[i, j]] = orig;
                    fd[[i, j]] = -(up - down) / (2.0 * h);
                }
            }
            let diff = (&updates[l - 1] - &fd).mapv(|v| v * v).sum().sqrt();
            let scale = fd.mapv(|v| v * v).sum().sqrt();
            assert!(
                diff / scale <= 1e-4,
                "seed {seed} layer {l}: relative error {:e}",
                diff / scale
            );
        }
    }
}

#[test]
fn settling_descends_energy() {
    let mut descended = 0;
    for seed in 0..100u64 {
        let circuit = NgcCircuit::new(&[8, 16, 8], seed, &NgcConfig::default()).unwrap();
        let x = gaussian(8, 1.0, 5000 + seed);
        let state = circuit.settle(&[(0, x)], None).unwrap();
        if state.energy() < state.initial_energy() {
            descended += 1;
        }
    }
    assert!(descended >= 95, "descent in {descended}/100 instances");
}

#[test]
fn untrained_circuit_reconstructs_almost_nothing() {
    let x = gaussian(16, 1.0, 7);
    let norm = x.dot(&x).sqrt();
    let tied = NgcCircuit::new(&[16, 8], 1, &NgcConfig::default()).unwrap();
    let independent = NgcCircuit::new(
        &[16, 32],
        1,
        &NgcConfig {
            feedback_init: FeedbackInit::Independent,
            ..NgcConfig::default()
        },
    )
    .unwrap();
    for c in [tied, independent] {
        let (x_hat, err) = c.reconstruct(&x, None).unwrap();
        assert!(x_hat.dot(&x_hat).sqrt() < 0.3 * norm);
        assert!((err / norm - 1.0).abs() <= 0.05, "ratio {}", err / norm);
    }
}

#[test]
fn training_on_one_pattern_learns_to_reconstruct_it() {
    let x = gaussian(16, 1.0, 11);
    let norm = x.dot(&x).sqrt();
    let mut c = NgcCircuit::new(&[16, 32], 2, &NgcConfig::default()).unwrap();
    for _ in 0..200 {
        let state = c.settle(&[(0, x.clone())], None).unwrap();
        c.update_weights(&state, 0.05, 0.05).unwrap();
    }
    let (_, err) = c.reconstruct(&x, None).unwrap();
    assert!(err < 0.1 * norm, "error {err} vs norm {norm}");
}

#[test]
fn zero_input_does_not_grow_error() {
    let c = NgcCircuit::new(&[16, 32], 3, &NgcConfig::default()).unwrap();
    let state = c.settle(&[(0, Array1::zeros(16))], None).unwrap();
    assert!(state.energy() <= state.initial_energy());
    assert_eq!(state.energy(), 0.0);
}

#[test]
fn layerwise_updates_equal_full_update() {
    let cfg = NgcConfig {
        sigma: 0.2,
        ..NgcConfig::default()
    };
    let c = NgcCircuit::new(&[6, 10, 5, 4], 4, &cfg).unwrap();
    let mask = GatingMask::new(vec![
        Array1::from_shape_fn(10, |i| (i % 2) as f64),
        Array1::from_shape_fn(5, |i| (i % 3 != 0) as u8 as f64),
        Array1::ones(4),
    ])
    .unwrap();
    let state = c.settle(&[(0, gaussian(6, 1.0, 9))], Some(&mask)).unwrap();
    let full = c.weight_updates(&state, 0.1);
    for l in 1..=c.depth() {
        let local = local_weight_update(
            &state.e[l - 1].clone(),
            &state.z[l].clone(),
            mask.layer(l),
            Activation::Tanh,
            0.1,
        );
        assert_eq!(full[l - 1], local);
    }
}

#[test]
fn update_rules_are_transposes() {
    let cfg = NgcConfig {
        sigma: 0.2,
        feedback_init: FeedbackInit::Independent,
        ..NgcConfig::default()
    };
    let before = NgcCircuit::new(&[5, 7, 3], 8, &cfg).unwrap();
    let state = before.settle(&[(0, gaussian(5, 1.0, 1))], None).unwrap();
    let mut after = before.clone();
    after.update_weights(&state, 0.1, 0.02).unwrap();
    for l in 1..=2 {
        let dw = after.weight(l) - before.weight(l);
        let de = after.feedback(l) - before.feedback(l);
        let expect = dw.t().mapv(|v| v * 0.02 / 0.1);
        assert!((&de - &expect).iter().all(|v| v.abs() < 1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clamped_layers_are_bit_identical(seed in 0u64..1000, beta in 0.0f64..0.1) {
        let cfg = NgcConfig { beta, sigma: 0.1, ..NgcConfig::default() };
        let c = NgcCircuit::new(&[4, 6, 3], seed, &cfg).unwrap();
        let x = gaussian(4, 1.0, seed);
        let top = gaussian(3, 0.5, seed + 1);
        let state = c.settle(&[(0, x.clone()), (2, top.clone())], None).unwrap();
        prop_assert_eq!(&state.z[0], &x);
        prop_assert_eq!(&state.z[2], &top);
    }

    #[test]
    fn energy_is_nonnegative_and_errors_consistent(seed in 0u64..1000) {
        let c = NgcCircuit::new(&[5, 4, 3], seed, &NgcConfig { sigma: 0.3, ..NgcConfig::default() }).unwrap();
        let state = c.settle(&[(0, gaussian(5, 2.0, seed))], None).unwrap();
        prop_assert!(energy(&state) >= 0.0);
        for l in 0..c.depth() {
            prop_assert_eq!(&state.e[l], &(&state.z[l] - &state.mu[l]));
        }
        prop_assert!(state.e[c.depth()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gated_off_units_contribute_and_learn_nothing(seed in 0u64..1000, off in 0usize..6) {
        let c = NgcCircuit::new(&[4, 6], seed, &NgcConfig { sigma: 0.3, ..NgcConfig::default() }).unwrap();
        let mut gate = Array1::ones(6);
        gate[off] = 0.0;
        let mask = GatingMask::new(vec![gate]).unwrap();
        let state = c.settle(&[(0, gaussian(4, 1.0, seed))], Some(&mask)).unwrap();
        let mut probe = state.clone();
        probe.z[1][off] += 10.0;
        c.predict(&mut probe).unwrap();
        prop_assert_eq!(&probe.mu[0], &state.mu[0]);
        let dw = &c.weight_updates(&state, 0.5)[0];
        prop_assert!(dw.column(off).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn settle_is_deterministic(seed in 0u64..1000) {
        let c = NgcCircuit::new(&[6, 5, 4], seed, &NgcConfig::default()).unwrap();
        let x = gaussian(6, 1.0, seed);
        prop_assert_eq!(c.settle(&[(0, x.clone())], None).unwrap(), c.settle(&[(0, x)], None).unwrap());
    }
}
