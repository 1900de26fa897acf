use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use czgate_core::gradopt::infidelity_and_gradient;
use czgate_core::numerics::herm_eig;
use czgate_core::rl::{SacAgent, SacConfig, Transition};
use czgate_core::{CircuitParams, GateModel, PulseSchedule, ScheduleShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn schedule(gate_time: f64, seed: u64) -> PulseSchedule {
    let shape = ScheduleShape::with_gate_time(gate_time).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = shape.bounds;
    PulseSchedule::new(shape, (0..shape.steps()).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn circuit(c: &mut Criterion) {
    let model = GateModel::new(&CircuitParams::default()).unwrap();
    let h = model.hamiltonian(5.5);
    c.bench_function("herm_eig d=27", |b| b.iter(|| herm_eig(black_box(&h)).unwrap()));

    let big = GateModel::new(&CircuitParams::default().with_levels(4)).unwrap();
    let h = big.hamiltonian(5.5);
    c.bench_function("herm_eig d=64", |b| b.iter(|| herm_eig(black_box(&h)).unwrap()));

    for t in [10.0, 20.0] {
        let s = schedule(t, 1);
        c.bench_function(&format!("propagate {t} ns"), |b| b.iter(|| model.propagate(black_box(&s)).unwrap()));
        c.bench_function(&format!("gradient {t} ns"), |b| {
            b.iter(|| infidelity_and_gradient(&model, black_box(&s)).unwrap())
        });
    }
}

fn sac(c: &mut Criterion) {
    let cfg = SacConfig { hidden: vec![64, 64], batch_size: 64, ..SacConfig::default() };
    let mut agent = SacAgent::new(37, 1, cfg, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let state: Vec<f64> = (0..37).map(|_| rng.random()).collect();
        let next_state: Vec<f64> = (0..37).map(|_| rng.random()).collect();
        let action = vec![rng.random_range(-1.0..1.0)];
        agent.remember(Transition { state, action, reward: rng.random(), next_state, done: rng.random_bool(0.1) });
    }
    c.bench_function("sac update 64x64 batch 64", |b| b.iter(|| agent.update().unwrap()));
}

criterion_group!(benches, circuit, sac);
criterion_main!(benches);
