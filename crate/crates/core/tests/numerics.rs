use czgate_core::numerics::{expm_frechet, herm_eig, unitary_step, ComplexMatrix, C64};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(n: usize, scale: f64, rng: &mut impl Rng) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        m[(r, r)] = C64::new(scale * rng.random_range(-1.0..1.0), 0.0);
        for c in r + 1..n {
            let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            m[(r, c)] = z;
            m[(c, r)] = z.conj();
        }
    }
    m
}

fn fd_frechet(h: &ComplexMatrix, dh: &ComplexMatrix, dt: f64) -> ComplexMatrix {
    let eps = 1e-6;
    let plus = unitary_step(&h.add_scaled(dh, eps), dt).unwrap();
    let minus = unitary_step(&h.add_scaled(dh, -eps), dt).unwrap();
    (&plus - &minus).scale_real(0.5 / eps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn unitary_and_composable(n in 1usize..=27, seed in any::<u64>(), dt1 in 0.0f64..2.0, dt2 in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(n, 3.0, &mut rng);
        let u1 = unitary_step(&h, dt1).unwrap();
        let u2 = unitary_step(&h, dt2).unwrap();
        let u12 = unitary_step(&h, dt1 + dt2).unwrap();
        prop_assert!(u1.unitarity_residual() < 1e-10);
        prop_assert!(u1.matmul(&u2).max_abs_diff(&u12) < 1e-9);
    }

    #[test]
    fn eig_reconstructs(n in 1usize..=27, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(n, 1.0, &mut rng);
        let eig = herm_eig(&h).unwrap();
        prop_assert!(eig.reconstruct().max_abs_diff(&h) < 1e-10);
        prop_assert!(eig.vectors.unitarity_residual() < 1e-10);
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn spectrum_is_permutation_invariant(n in 1usize..=27, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(n, 1.0, &mut rng);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let ph = ComplexMatrix::from_fn(n, n, |r, c| h[(perm[r], perm[c])]);
        let a = herm_eig(&h).unwrap().values;
        let b = herm_eig(&ph).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn frechet_matches_central_differences(n in 1usize..=27, seed in any::<u64>(), dt in 0.05f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(n, 1.0, &mut rng);
        let dh = random_hermitian(n, 1.0, &mut rng);
        let du = expm_frechet(&h, &dh, dt).unwrap();
        let rel = du.max_abs_diff(&fd_frechet(&h, &dh, dt)) / du.max_abs();
        prop_assert!(rel < 1e-6, "relative error {rel:e}");
    }
}

#[test]
fn frechet_on_degenerate_spectrum() {
    // Repeated eigenvalues take the limit branch of the divided differences.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 6;
    let v = herm_eig(&random_hermitian(n, 1.0, &mut rng)).unwrap().vectors;
    let d = ComplexMatrix::from_real_diagonal(&[1.0, 1.0, 1.0, -0.5, -0.5, 2.0]);
    let h = v.matmul(&d).mul_adjoint(&v);
    let h = ComplexMatrix::from_fn(n, n, |r, c| (h[(r, c)] + h[(c, r)].conj()) * 0.5);
    let dh = random_hermitian(n, 1.0, &mut rng);
    let du = expm_frechet(&h, &dh, 0.7).unwrap();
    let rel = du.max_abs_diff(&fd_frechet(&h, &dh, 0.7)) / du.max_abs();
    assert!(rel < 1e-6, "relative error {rel:e}");
}

#[test]
fn frechet_at_gate_scale_norms() {
    // Spectra spanning hundreds of rad/ns, as in the circuit.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 27;
    let diag: Vec<f64> = (0..n).map(|k| 7.0 * k as f64).collect();
    let h = &ComplexMatrix::from_real_diagonal(&diag) + &random_hermitian(n, 0.5, &mut rng);
    let dh = ComplexMatrix::from_real_diagonal(&(0..n).map(|k| (k % 3) as f64 * std::f64::consts::TAU).collect::<Vec<_>>());
    let du = expm_frechet(&h, &dh, 1.0).unwrap();
    let rel = du.max_abs_diff(&fd_frechet(&h, &dh, 1.0)) / du.max_abs();
    assert!(rel < 1e-6, "relative error {rel:e}");
}
