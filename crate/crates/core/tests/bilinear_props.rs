use capsim::bilinear::{closed_form_flops, flop_count};
use capsim::{
    make_classical, make_strassen, make_strassen_winograd, recursive_multiply, validate_bilinear,
    Matrix,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pair(n: usize, seed: u64) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (
        Matrix::random_uniform(n, n, &mut rng),
        Matrix::random_uniform(n, n, &mut rng),
    )
}

fn tol(n: usize, a: &Matrix, b: &Matrix) -> f64 {
    1e-10 * n as f64 * a.max_abs() * b.max_abs()
}

#[test]
fn registered_algorithms_are_valid() {
    assert!(validate_bilinear(&make_strassen_winograd()).unwrap());
    assert!(validate_bilinear(&make_strassen()).unwrap());
    for n0 in 2..=4 {
        assert!(validate_bilinear(&make_classical(n0).unwrap()).unwrap());
    }
}

#[test]
fn flop_closed_form_powers_of_two() {
    let sw = make_strassen_winograd();
    for n in [8u64, 16, 32, 64, 128] {
        let counted = flop_count(&sw, n as usize, 8).unwrap();
        assert_eq!(Some(counted), closed_form_flops(15, n, 8));
        // n^{ω0} = 343·7^t for n = 8·2^t, so (1280/343)·n^{ω0} = 1280·7^t.
        let t = (n / 8).trailing_zeros();
        assert_eq!(counted, 1280 * 7u64.pow(t) - 5 * n * n);
    }
}

#[test]
fn classical_two_is_bit_exact_with_fixed_order() {
    let c2 = make_classical(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [2usize, 8, 16, 64] {
        // Small integers: every partial sum is exact, so summation order is irrelevant.
        let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-8i32..=8) as f64);
        let b = Matrix::from_fn(n, n, |_, _| rng.random_range(-8i32..=8) as f64);
        let want = a.classical_mul(&b).unwrap();
        assert!(recursive_multiply(&c2, &a, &b, 1).unwrap().bit_eq(&want));
        // cutoff ≥ n runs the classical loop itself.
        let (x, y) = random_pair(n, n as u64);
        let want = x.classical_mul(&y).unwrap();
        assert!(recursive_multiply(&c2, &x, &y, n).unwrap().bit_eq(&want));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn recursive_matches_oracle(n in 1usize..=96, seed in any::<u64>(), cutoff in 1usize..=16) {
        let sw = make_strassen_winograd();
        let (a, b) = random_pair(n, seed);
        let c = recursive_multiply(&sw, &a, &b, cutoff).unwrap();
        let want = a.classical_mul(&b).unwrap();
        prop_assert!(c.max_abs_diff(&want) <= tol(n, &a, &b));
    }

    #[test]
    fn cutoff_does_not_change_result(t in 0u32..=5, seed in any::<u64>()) {
        let n = 4usize << t;
        let sw = make_strassen_winograd();
        let (a, b) = random_pair(n, seed);
        let base = recursive_multiply(&sw, &a, &b, n).unwrap();
        for cutoff in [1usize, 2, 8] {
            let c = recursive_multiply(&sw, &a, &b, cutoff).unwrap();
            prop_assert!(c.max_abs_diff(&base) <= tol(n, &a, &b));
        }
    }

    #[test]
    fn strassen_flops_telescope(t in 0u32..=6, nb in 1u64..=16) {
        let n = nb << t;
        for (alg, adds) in [(make_strassen_winograd(), 15), (make_strassen(), 18)] {
            prop_assert_eq!(Some(flop_count(&alg, n as usize, nb as usize).unwrap()),
                closed_form_flops(adds, n, nb));
        }
    }
}
