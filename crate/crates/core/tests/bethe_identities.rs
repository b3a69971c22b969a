use deltagas_core::bethe::{permutations, Permutation, ScatteringContext};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn recursion_exhaustive_s4() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ctx = ScatteringContext::new(1.3).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
        for sigma in permutations(4) {
            let a = ctx.amplitude_real(&sigma, &k).norm().max(1.0);
            for i in 1..4 {
                worst = worst.max(ctx.recursion_residual(&sigma, i, &k).unwrap() / a);
            }
        }
    }
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn recursion_random_s6() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ctx = ScatteringContext::new(0.4).unwrap();
    for _ in 0..200 {
        let mut e: Vec<usize> = (1..=6).collect();
        for i in (1..6).rev() {
            e.swap(i, rng.gen_range(0..=i));
        }
        let sigma = Permutation::new(e).unwrap();
        let k: Vec<f64> = (0..6).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let i = rng.gen_range(1..6);
        let r = ctx.recursion_residual(&sigma, i, &k).unwrap();
        assert!(r <= 1e-12 * ctx.amplitude_real(&sigma, &k).norm().max(1.0));
    }
}

#[test]
fn s_matrix_unitarity_and_inverse_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10_000 {
        let c = rng.gen_range(0.01..50.0);
        let ctx = ScatteringContext::new(c).unwrap();
        let k = rng.gen_range(-100.0..100.0);
        let s = ctx.s_real(k);
        assert!((s.norm() - 1.0).abs() <= 1e-14);
        assert!((s * ctx.s_real(-k) - Complex64::new(1.0, 0.0)).norm() <= 1e-14);
        assert!((s.conj() - ctx.s_real(-k)).norm() <= 1e-14);
    }
}

#[test]
fn amplitude_of_reversal_is_product_over_all_pairs() {
    let ctx = ScatteringContext::new(0.9).unwrap();
    let k = [0.3, -1.1, 2.2, 0.7];
    let rev = Permutation::identity(4).reversed();
    let mut expect = Complex64::new(1.0, 0.0);
    for a in 0..4 {
        for b in 0..a {
            expect *= ctx.s_real(k[a] - k[b]);
        }
    }
    assert!((ctx.amplitude_real(&rev, &k) - expect).norm() < 1e-14);
}
