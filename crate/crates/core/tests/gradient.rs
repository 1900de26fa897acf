mod support;

use czgate_core::control::{cz_fidelity, fidelity_at, FULL_BOUNDS};
use czgate_core::gradopt::{infidelity_and_gradient, naive_ansatz, refine_observed, AnsatzKind, OptimizerConfig};
use czgate_core::{CircuitParams, Error, GateModel, PulseSchedule, ScheduleShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::dd_oracle::fd_gradient;

fn random_values(rng: &mut impl Rng, shape: &ScheduleShape) -> Vec<f64> {
    let (lo, hi) = shape.bounds;
    (0..shape.steps()).map(|_| rng.random_range(lo + 1e-3..hi - 1e-3)).collect()
}

fn infidelity(model: &GateModel, shape: ScheduleShape, values: &[f64]) -> f64 {
    let s = PulseSchedule::new(shape, values.to_vec()).unwrap();
    infidelity_and_gradient(model, &s).unwrap().infidelity
}

#[test]
fn gradient_matches_central_differences() {
    let model = GateModel::new(&CircuitParams::default()).unwrap();
    let shape = ScheduleShape::with_gate_time(10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let values = random_values(&mut rng, &shape);
        let g = infidelity_and_gradient(&model, &PulseSchedule::new(shape, values.clone()).unwrap()).unwrap();
        let fd = fd_gradient(&model, &values, shape.step_len, 1e-6);
        for (a, b) in g.grad.iter().zip(&fd) {
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    assert!(worst < 1e-6, "worst per-component relative error {worst:.3e}");
}

#[test]
fn decoupled_circuit_has_zero_gradient() {
    let p = CircuitParams::default().uncoupled();
    let model = GateModel::new(&p).unwrap();
    let shape = ScheduleShape::with_gate_time(10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = infidelity_and_gradient(&model, &PulseSchedule::new(shape, random_values(&mut rng, &shape)).unwrap())
        .unwrap();
    assert!(g.grad.iter().all(|x| x.abs() < 1e-12), "{:?}", g.grad);
}

#[test]
fn gradient_vanishes_at_interior_minimum() {
    // One 4 ns step: golden-section search on the infidelity alone.
    let model = GateModel::new(&CircuitParams::default()).unwrap();
    let shape = ScheduleShape::new(4.0, 4.0, FULL_BOUNDS).unwrap();
    let f = |w: f64| infidelity(&model, shape, &[w]);
    let grid: Vec<f64> = (1..200).map(|i| 4.2 + 2.18 * i as f64 / 200.0).collect();
    let i0 = (1..grid.len() - 1)
        .filter(|&i| f(grid[i]) < f(grid[i - 1]) && f(grid[i]) < f(grid[i + 1]))
        .min_by(|&a, &b| f(grid[a]).total_cmp(&f(grid[b])))
        .expect("an interior local minimum on the grid");
    let (mut a, mut b) = (grid[i0 - 1], grid[i0 + 1]);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-9 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let w = 0.5 * (a + b);
    let g = infidelity_and_gradient(&model, &PulseSchedule::new(shape, vec![w]).unwrap()).unwrap();
    assert!(g.grad[0].abs() < 1e-6, "gradient {:.3e} at {w}", g.grad[0]);
}

#[test]
fn phase_reoptimization_is_second_order() {
    let model = GateModel::new(&CircuitParams::default()).unwrap();
    let shape = ScheduleShape::with_gate_time(10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..3 {
        let values = random_values(&mut rng, &shape);
        let dir: Vec<f64> = (0..values.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let block = |eps: f64| {
            let v: Vec<f64> = values.iter().zip(&dir).map(|(x, d)| x + eps * d).collect();
            let s = PulseSchedule::new(shape, v).unwrap();
            model.computational_block(&model.full_unitary(&s).unwrap())
        };
        let opt = cz_fidelity(&block(0.0));
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for eps in [1e-2, 5e-3, 2e-3, 1e-3] {
            let u = block(eps);
            let gain = cz_fidelity(&u).fidelity - fidelity_at(&u, opt.beta1, opt.beta2);
            assert!(gain >= -1e-15);
            xs.push(f64::ln(eps));
            ys.push(gain.ln());
        }
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope >= 1.9, "log-log slope {slope:.3}");
    }
}

#[test]
fn refine_is_monotone_and_bounded() {
    let model = GateModel::new(&CircuitParams::default()).unwrap();
    let shape = ScheduleShape::with_gate_time(10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = OptimizerConfig { max_iters: 150, learning_rate: 2e-2, ..OptimizerConfig::default() };
    for kind in [AnsatzKind::Constant, AnsatzKind::Ramp, AnsatzKind::Random] {
        let init = naive_ansatz(kind, shape, &mut rng).unwrap();
        let mut seen = 0;
        let r = refine_observed(&model, &init, &cfg, |x, rec| {
            assert!(x.values().iter().all(|v| shape.contains(*v)), "iterate {} out of bounds", rec.iter);
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, r.trace.len());
        assert!(r.trace.windows(2).all(|w| w[1].best_infidelity <= w[0].best_infidelity));
        let first = r.trace[0].infidelity;
        assert!(r.best_infidelity <= first);
        let exact = infidelity(&model, shape, r.best.values());
        assert_eq!(exact, r.best_infidelity);
    }
}

#[test]
fn refine_rejects_bad_config() {
    let model = GateModel::new(&CircuitParams::default()).unwrap();
    let init = PulseSchedule::constant(ScheduleShape::with_gate_time(5.0).unwrap(), 5.0).unwrap();
    let cfg = OptimizerConfig { learning_rate: -1.0, ..OptimizerConfig::default() };
    assert!(matches!(refine_observed(&model, &init, &cfg, |_, _| {}), Err(Error::Precondition(_))));
}

#[test]
fn naive_ansatz_shapes() {
    let shape = ScheduleShape::with_gate_time(5.0).unwrap();
    let (lo, hi) = shape.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let c = naive_ansatz(AnsatzKind::Constant, shape, &mut rng).unwrap();
    assert!(c.values().iter().all(|&v| v == 0.5 * (lo + hi)));
    let r = naive_ansatz(AnsatzKind::Ramp, shape, &mut rng).unwrap();
    assert_eq!(r.values()[0], hi);
    assert_eq!(r.values()[2], lo);
    assert_eq!(r.values()[4], hi);
    let x = naive_ansatz(AnsatzKind::Random, shape, &mut rng).unwrap();
    assert!(x.values().iter().all(|v| shape.contains(*v)));
}
