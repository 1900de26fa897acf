//! CZ fidelity with virtual-Z compensation, leakage and the RL reward.
//!
//! For a computational block `u` (basis 000, 001, 100, 101) the compensated
//! overlap is `M(b) = CZ^dagger D(b) u` with
//! `D(b) = diag(1, e^{i b2}, e^{i b1}, e^{i (b1 + b2)})`, and the fidelity is
//! the average gate fidelity `(Tr(M^dagger M) + |Tr M|^2) / 20`. Only
//! `|Tr M|` depends on the phases, so the search is over the 2-torus of a
//! scalar function.

use std::f64::consts::{PI, TAU};

use crate::numerics::{ComplexMatrix, C64};

const CZ_SIGNS: [f64; 4] = [1.0, 1.0, 1.0, -1.0];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CzFidelity {
    /// Average gate fidelity.
    pub fidelity: f64,
    /// `|Tr M|^2 / 16` at the same phases.
    pub process_fidelity: f64,
    /// Compensation phase on qubit 1, rad in (-pi, pi].
    pub beta1: f64,
    /// Compensation phase on qubit 2, rad in (-pi, pi].
    pub beta2: f64,
}

/// Per-diagonal weights `c_j e^{i phi_j(b)}` such that `Tr M = sum_j w_j u_jj`.
pub fn trace_weights(beta1: f64, beta2: f64) -> [C64; 4] {
    let phases = [0.0, beta2, beta1, beta1 + beta2];
    std::array::from_fn(|j| C64::from_polar(CZ_SIGNS[j], phases[j]))
}

/// `Tr M` at the given phases.
pub fn compensated_trace(u: &ComplexMatrix, beta1: f64, beta2: f64) -> C64 {
    trace_weights(beta1, beta2).iter().enumerate().map(|(j, w)| w * u[(j, j)]).sum()
}

/// Fidelity at fixed compensation phases.
pub fn fidelity_at(u: &ComplexMatrix, beta1: f64, beta2: f64) -> f64 {
    (u.frobenius_sq() + compensated_trace(u, beta1, beta2).norm_sqr()) / 20.0
}

/// `|Tr M(b)|^2` and its gradient and Hessian in `(b1, b2)`.
struct TraceObjective {
    a: [C64; 4],
}

impl TraceObjective {
    fn new(u: &ComplexMatrix) -> Self {
        Self { a: std::array::from_fn(|j| u[(j, j)] * CZ_SIGNS[j]) }
    }

    fn value(&self, b1: f64, b2: f64) -> f64 {
        let [a0, a1, a2, a3] = self.a;
        let s = a0 + a1 * C64::cis(b2) + a2 * C64::cis(b1) + a3 * C64::cis(b1 + b2);
        s.norm_sqr()
    }

    /// Best `b1` for fixed `b2`: align `e^{i b1} (a2 + a3 e^{i b2})` with `a0 + a1 e^{i b2}`.
    fn best_b1(&self, b2: f64) -> f64 {
        let [a0, a1, a2, a3] = self.a;
        let lead = a0 + a1 * C64::cis(b2);
        let rest = a2 + a3 * C64::cis(b2);
        lead.arg() - rest.arg()
    }

    fn derivatives(&self, b1: f64, b2: f64) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let [a0, a1, a2, a3] = self.a;
        let e1 = a2 * C64::cis(b1);
        let e2 = a1 * C64::cis(b2);
        let e12 = a3 * C64::cis(b1 + b2);
        let s = a0 + e1 + e2 + e12;
        let i = C64::i();
        // dS/db1, dS/db2 and second derivatives.
        let d1 = i * (e1 + e12);
        let d2 = i * (e2 + e12);
        let d11 = -(e1 + e12);
        let d22 = -(e2 + e12);
        let d12 = -e12;
        let re = |z: C64| z.re;
        let g = [2.0 * re(s.conj() * d1), 2.0 * re(s.conj() * d2)];
        let h11 = 2.0 * (d1.norm_sqr() + re(s.conj() * d11));
        let h22 = 2.0 * (d2.norm_sqr() + re(s.conj() * d22));
        let h12 = 2.0 * (re(d1.conj() * d2) + re(s.conj() * d12));
        (s.norm_sqr(), g, [[h11, h12], [h12, h22]])
    }

    /// Newton ascent from `start`. Far from the optimum a step must raise the
    /// value; close to it the value is flat to rounding, so small steps are
    /// taken on the strength of the gradient alone. Iteration stops once the
    /// step stops shrinking, leaving the phases accurate to rounding.
    fn polish(&self, start: [f64; 2]) -> [f64; 2] {
        const LOCAL: f64 = 1e-3;
        let mut x = start;
        let mut fx = self.value(x[0], x[1]);
        let mut last_move = f64::INFINITY;
        for _ in 0..50 {
            let (_, g, h) = self.derivatives(x[0], x[1]);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            // Only a concave model gives an ascent step.
            if !(h[0][0] < 0.0 && det > 0.0) {
                break;
            }
            let step = [-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(h[0][0] * g[1] - h[1][0] * g[0]) / det];
            let moved = step[0].abs().max(step[1].abs());
            let cand = [x[0] + step[0], x[1] + step[1]];
            let fc = self.value(cand[0], cand[1]);
            let accept = if moved < LOCAL { moved < last_move } else { fc >= fx };
            if !accept {
                break;
            }
            x = cand;
            fx = fc;
            last_move = moved;
            if moved == 0.0 {
                break;
            }
        }
        x
    }
}

fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Nelder-Mead minimization in two dimensions.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], scale: f64, iters: usize) -> ([f64; 2], f64) {
    let mut simplex = [start, [start[0] + scale, start[1]], [start[0], start[1] + scale]];
    let mut vals = simplex.map(&f);
    for _ in 0..iters {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);
        if (vals[2] - vals[0]).abs() < 1e-16 * (1.0 + vals[0].abs()) {
            break;
        }
        let centroid = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let along = |t: f64| [centroid[0] + t * (simplex[2][0] - centroid[0]), centroid[1] + t * (simplex[2][1] - centroid[1])];
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            if fe < fr {
                simplex[2] = expanded;
                vals[2] = fe;
            } else {
                simplex[2] = reflected;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = reflected;
            vals[2] = fr;
        } else {
            let contracted = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fc = f(contracted);
            if fc < vals[2].min(fr) {
                simplex[2] = contracted;
                vals[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
                    ];
                    vals[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (simplex[best], vals[best])
}

/// Fidelity of `u` to CZ, maximized over the virtual-Z phases.
pub fn cz_fidelity(u: &ComplexMatrix) -> CzFidelity {
    assert_eq!((u.rows(), u.cols()), (4, 4), "cz_fidelity expects the 4x4 computational block");
    let obj = TraceObjective::new(u);

    // Analytic seed, exact when the block is diagonal with a pi conditional phase.
    let arg_ratio = |a: C64, b: C64| if a.norm() > 0.0 && b.norm() > 0.0 { (a / b).arg() } else { 0.0 };
    let mut seeds = vec![[arg_ratio(u[(0, 0)], u[(2, 2)]), arg_ratio(u[(0, 0)], u[(1, 1)])]];
    // Profile seeds: b1 is solvable in closed form for each b2.
    const PROFILE: usize = 24;
    for m in 0..PROFILE {
        let b2 = TAU * m as f64 / PROFILE as f64;
        seeds.push([obj.best_b1(b2), b2]);
    }
    let seed = seeds
        .into_iter()
        .max_by(|a, b| obj.value(a[0], a[1]).total_cmp(&obj.value(b[0], b[1])))
        .unwrap();

    let (refined, _) = nelder_mead(|x| -obj.value(x[0], x[1]), seed, 0.05, 200);
    let start = if obj.value(refined[0], refined[1]) >= obj.value(seed[0], seed[1]) { refined } else { seed };
    let polished = obj.polish(start);
    // Values within rounding of each other: prefer the stationary point.
    let (fs, fp) = (obj.value(start[0], start[1]), obj.value(polished[0], polished[1]));
    let best = if fp >= fs - 1e-13 * (1.0 + fs) { polished } else { start };

    let (beta1, beta2) = (wrap_phase(best[0]), wrap_phase(best[1]));
    let tr = compensated_trace(u, beta1, beta2).norm_sqr();
    let fidelity = ((u.frobenius_sq() + tr) / 20.0).clamp(0.0, 1.0);
    CzFidelity { fidelity, process_fidelity: (tr / 16.0).clamp(0.0, 1.0), beta1, beta2 }
}

/// Population lost from the computational subspace, `1 - Tr(u^dagger u) / 4`.
pub fn leakage(u: &ComplexMatrix) -> f64 {
    1.0 - u.frobenius_sq() / 4.0
}

/// `-log10(1 - F)`, capped at 12.
pub fn reward(fidelity: f64) -> f64 {
    let infidelity = 1.0 - fidelity;
    if infidelity < 1e-12 {
        12.0
    } else {
        -infidelity.log10()
    }
}
