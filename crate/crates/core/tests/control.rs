use std::f64::consts::TAU;

use czgate_core::control::{cz_fidelity, fidelity_at, leakage, FULL_BOUNDS};
use czgate_core::numerics::{unitary_step, ComplexMatrix, C64};
use czgate_core::{CircuitParams, GateModel, PulseSchedule, ScheduleShape, SmoothedPulse};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unitary(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(n, n);
    for r in 0..n {
        h[(r, r)] = C64::new(rng.random_range(-3.0..3.0), 0.0);
        for c in r + 1..n {
            let z = C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            h[(r, c)] = z;
            h[(c, r)] = z.conj();
        }
    }
    unitary_step(&h, 1.0).unwrap()
}

fn grid_max(u: &ComplexMatrix, points: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for a in 0..points {
        for b in 0..points {
            let (b1, b2) = (TAU * a as f64 / points as f64, TAU * b as f64 / points as f64);
            best = best.max(fidelity_at(u, b1, b2));
        }
    }
    best
}

#[test]
fn identity_compensates_to_point_six_on_grid() {
    let id = ComplexMatrix::identity(4);
    let grid = grid_max(&id, 360);
    assert!((grid - 0.6).abs() < 1e-4, "grid maximum {grid}");
    let f = cz_fidelity(&id).fidelity;
    assert!((f - 0.6).abs() < 1e-12 && f >= grid - 1e-12, "{f}");
}

#[test]
fn leakage_identity_on_random_blocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let n = rng.random_range(4..=9);
        let u = random_unitary(n, &mut rng);
        let block = ComplexMatrix::from_fn(4, 4, |r, c| u[(r, c)]);
        let outside: f64 = (0..4).map(|c| (4..n).map(|r| u[(r, c)].norm_sqr()).sum::<f64>()).sum::<f64>() / 4.0;
        assert!((leakage(&block) - outside).abs() < 1e-13);
        assert!(leakage(&block) >= -1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phase_search_beats_grid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(4..=8);
        let u = random_unitary(n, &mut rng);
        let block = ComplexMatrix::from_fn(4, 4, |r, c| u[(r, c)]);
        let f = cz_fidelity(&block);
        prop_assert!(f.fidelity >= grid_max(&block, 90) - 1e-12);
        prop_assert!((0.0..=1.0).contains(&f.fidelity));
    }

    #[test]
    fn propagation_conserves_probability(seed in any::<u64>(), steps in 1usize..12) {
        let model = GateModel::new(&CircuitParams::default()).unwrap();
        let shape = ScheduleShape::new(steps as f64, 1.0, FULL_BOUNDS).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..steps).map(|_| rng.random_range(FULL_BOUNDS.0..=FULL_BOUNDS.1)).collect();
        let sched = PulseSchedule::new(shape, values).unwrap();
        let u = model.full_unitary(&sched).unwrap();
        prop_assert!(u.unitarity_residual() < 1e-10);
        let eval = model.propagate(&sched).unwrap();
        prop_assert_eq!(eval.populations.len(), steps + 1);
        // The first four tracked labels are the computational states.
        let last = eval.populations.last().unwrap();
        let kept: f64 = (0..4).map(|l| (0..4).map(|s| last[l][s]).sum::<f64>()).sum::<f64>() / 4.0;
        prop_assert!((1.0 - kept - eval.leakage).abs() < 1e-12);
        for pops in &eval.populations {
            for s in 0..4 {
                let total: f64 = (0..pops.len()).map(|l| pops[l][s]).sum();
                prop_assert!(total <= 1.0 + 1e-12);
            }
        }
    }
}

#[test]
fn narrow_smoothing_recovers_piecewise_constant() {
    let p = CircuitParams::default();
    let model = GateModel::new(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let shape = ScheduleShape::with_gate_time(10.0).unwrap();
    let values = (0..10).map(|_| rng.random_range(4.5..6.3)).collect();
    let base = PulseSchedule::new(shape, values).unwrap();
    let exact = model.propagate(&base).unwrap().fidelity;
    let gap = |w: f64| {
        let sp = SmoothedPulse::new(base.clone(), w, 0.01, p.coupler.freq).unwrap();
        (model.propagate_smoothed(&sp).unwrap().fidelity - exact).abs()
    };
    let gaps = [gap(0.02), gap(0.005), gap(0.002)];
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    assert!(gaps[2] < 1e-4, "{gaps:?}");
}
