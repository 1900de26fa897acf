//! Analytic gradient of the CZ infidelity with respect to the per-step coupler
//! frequencies, and a bounded Adam refiner built on it.
//!
//! For `U = U_n ... U_1` the derivative with respect to step `k` is
//! `U_n ... U_{k+1} dU_k U_{k-1} ... U_1`, where `dU_k` is the Fréchet
//! derivative of `exp(-i H dt)` along `dH/dwc = 2 pi n_c`. Only the
//! computational block enters the fidelity, so forward products are kept as
//! `d x 4` column blocks and backward products as `4 x d` row blocks. The
//! compensation phases are held at their optimum (the phase gradient vanishes
//! there).

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::control::{cz_fidelity, trace_weights, CzFidelity, GateModel, PulseSchedule, ScheduleShape};
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, HermEig, C64};

#[derive(Clone, Debug)]
pub struct GradResult {
    pub infidelity: f64,
    /// dI/dwc per step, 1/GHz.
    pub grad: Vec<f64>,
    pub fidelity: CzFidelity,
}

impl GradResult {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

pub fn infidelity_and_gradient(model: &GateModel, sched: &PulseSchedule) -> Result<GradResult> {
    let n = sched.len();
    let dt = sched.step_len();
    let d = model.dim();
    let comp = model.computational_columns();

    let eigs: Vec<HermEig> = sched.values().iter().map(|&wc| model.step_eig(wc)).collect::<Result<_>>()?;
    let units: Vec<ComplexMatrix> = eigs.iter().map(|e| e.unitary(dt)).collect();

    let identity = ComplexMatrix::identity(d);
    let mut forward = Vec::with_capacity(n + 1);
    forward.push(identity.select_cols(comp));
    for u in &units {
        let next = u.matmul(forward.last().unwrap());
        forward.push(next);
    }
    // backward[k] = P^dagger U_n ... U_{k+1}
    let mut backward = vec![identity.select_rows(comp); n + 1];
    for k in (0..n).rev() {
        backward[k] = backward[k + 1].matmul(&units[k]);
    }

    let u_comp = forward[n].select_rows(comp);
    let fidelity = cz_fidelity(&u_comp);
    let weights = trace_weights(fidelity.beta1, fidelity.beta2);
    let trace: C64 = (0..4).map(|j| weights[j] * u_comp[(j, j)]).sum();

    let number = model.coupler_number();
    let mut grad = Vec::with_capacity(n);
    for k in 0..n {
        let v = &eigs[k].vectors;
        let rotated = v.adjoint_mul(number).matmul(v);
        let inner = rotated.hadamard(&eigs[k].frechet_weights(dt));
        let left = backward[k + 1].matmul(v);
        let right = v.adjoint_mul(&forward[k]);
        let du = left.matmul(&inner).matmul(&right);

        let mut d_frob = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                d_frob += 2.0 * (u_comp[(r, c)].conj() * du[(r, c)]).re;
            }
        }
        let d_trace: C64 = (0..4).map(|j| weights[j] * du[(j, j)]).sum();
        let d_trace_sq = 2.0 * (trace.conj() * d_trace).re;
        grad.push(-(d_frob + d_trace_sq) / 20.0);
    }

    Ok(GradResult { infidelity: 1.0 - fidelity.fidelity, grad, fidelity })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// Clip to the nearest bound.
    Clamp,
    /// Mirror overshoot back into the interval, then clip.
    Reflect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// GHz per iteration.
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub bound_mode: BoundMode,
    /// Stop once |dI| stays below this for `patience` iterations.
    pub tolerance: f64,
    pub patience: usize,
    /// Random ansatz count for gradient-only runs.
    pub restarts: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            learning_rate: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-12,
            bound_mode: BoundMode::Clamp,
            tolerance: 1e-12,
            patience: 50,
            restarts: 3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.tolerance > 0.0) {
            return Err(crate::error::precondition("learning rate and tolerance must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(crate::error::precondition("moment decay rates must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub infidelity: f64,
    pub grad_norm: f64,
    pub best_infidelity: f64,
}

#[derive(Clone, Debug)]
pub struct Refinement {
    pub best: PulseSchedule,
    pub best_infidelity: f64,
    pub trace: Vec<IterationRecord>,
}

impl Refinement {
    /// CSV with header `iter,infidelity,grad_norm`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,infidelity,grad_norm\n");
        for r in &self.trace {
            writeln!(out, "{},{:.12e},{:.12e}", r.iter, r.infidelity, r.grad_norm).unwrap();
        }
        out
    }
}

fn project(shape: &ScheduleShape, value: f64, mode: BoundMode) -> f64 {
    let (lo, hi) = shape.bounds;
    match mode {
        BoundMode::Clamp => value.clamp(lo, hi),
        BoundMode::Reflect => {
            let v = if value < lo {
                2.0 * lo - value
            } else if value > hi {
                2.0 * hi - value
            } else {
                value
            };
            v.clamp(lo, hi)
        }
    }
}

/// Bounded Adam descent on the infidelity; returns the best schedule seen.
pub fn refine(model: &GateModel, init: &PulseSchedule, cfg: &OptimizerConfig) -> Result<Refinement> {
    refine_observed(model, init, cfg, |_, _| {})
}

/// [`refine`], calling `observe` with every evaluated iterate and its record.
pub fn refine_observed(
    model: &GateModel,
    init: &PulseSchedule,
    cfg: &OptimizerConfig,
    mut observe: impl FnMut(&PulseSchedule, &IterationRecord),
) -> Result<Refinement> {
    cfg.validate()?;
    let shape = init.shape();
    let n = init.len();
    let mut x = PulseSchedule::new(shape, init.values().to_vec())?;
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut best = x.clone();
    let mut best_inf = f64::INFINITY;
    let mut trace = Vec::new();
    let mut prev = f64::NAN;
    let mut quiet = 0usize;

    for iter in 0..=cfg.max_iters {
        let res = infidelity_and_gradient(model, &x)?;
        if !res.infidelity.is_finite() || res.grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration: iter });
        }
        if res.infidelity < best_inf {
            best_inf = res.infidelity;
            best = x.clone();
        }
        let record = IterationRecord { iter, infidelity: res.infidelity, grad_norm: res.grad_norm(), best_infidelity: best_inf };
        observe(&x, &record);
        trace.push(record);
        if (res.infidelity - prev).abs() < cfg.tolerance {
            quiet += 1;
            if quiet >= cfg.patience {
                break;
            }
        } else {
            quiet = 0;
        }
        prev = res.infidelity;
        if iter == cfg.max_iters {
            break;
        }

        let t = (iter + 1) as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let next = x.values().iter().enumerate().map(|(k, &xk)| {
            let g = res.grad[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            let step = cfg.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + cfg.epsilon);
            project(&shape, xk - step, cfg.bound_mode)
        });
        let next: Vec<f64> = next.collect();
        x = PulseSchedule::new(shape, next)?;
    }

    Ok(Refinement { best, best_infidelity: best_inf, trace })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzKind {
    /// Hold at the bound midpoint.
    Constant,
    /// Linear V from the upper bound down to the lower bound and back.
    Ramp,
    /// Uniform within the bounds.
    Random,
}

pub fn naive_ansatz(kind: AnsatzKind, shape: ScheduleShape, rng: &mut impl Rng) -> Result<PulseSchedule> {
    let n = shape.steps();
    let (lo, hi) = shape.bounds;
    let values = match kind {
        AnsatzKind::Constant => vec![shape.midpoint(); n],
        AnsatzKind::Ramp if n == 1 => vec![lo],
        AnsatzKind::Ramp => (0..n)
            .map(|k| {
                let x = 2.0 * k as f64 / (n - 1) as f64 - 1.0;
                shape.clamp(lo + (hi - lo) * x.abs())
            })
            .collect(),
        AnsatzKind::Random => (0..n).map(|_| rng.random_range(lo..=hi)).collect(),
    };
    PulseSchedule::new(shape, values)
}
