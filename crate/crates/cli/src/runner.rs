//! Optimization pipelines shared by the `optimize`, sweep and step-study
//! commands.

use czgate_core::gradopt::{naive_ansatz, refine, AnsatzKind, OptimizerConfig, Refinement};
use czgate_core::rl::{train_gate, GateTraining, SacConfig};
use czgate_core::{CircuitParams, GateEvaluation, GateModel, PulseSchedule, Result, ScheduleShape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Method;

/// A schedule together with its full evaluation.
#[derive(Clone, Debug)]
pub struct Scored {
    pub schedule: PulseSchedule,
    pub evaluation: GateEvaluation,
}

impl Scored {
    pub fn new(model: &GateModel, schedule: PulseSchedule) -> Result<Self> {
        let evaluation = model.propagate(&schedule)?;
        Ok(Self { schedule, evaluation })
    }

    pub fn infidelity(&self) -> f64 {
        self.evaluation.infidelity()
    }
}

#[derive(Clone, Debug)]
pub struct GradRun {
    pub best: Scored,
    /// Trace of the ansatz that produced `best`.
    pub refinement: Refinement,
    pub ansatz: AnsatzKind,
}

/// Refine the constant, ramp and `restarts` random ansätze; keep the best.
pub fn run_grad(p: &CircuitParams, shape: ScheduleShape, opt: &OptimizerConfig, seed: u64) -> Result<GradRun> {
    let model = GateModel::new(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds = vec![AnsatzKind::Constant, AnsatzKind::Ramp];
    kinds.extend(std::iter::repeat_n(AnsatzKind::Random, opt.restarts));
    let mut best: Option<(Refinement, AnsatzKind)> = None;
    for kind in kinds {
        let init = naive_ansatz(kind, shape, &mut rng)?;
        let r = refine(&model, &init, opt)?;
        log::debug!("grad ansatz {kind:?}: infidelity {:.3e}", r.best_infidelity);
        if best.as_ref().is_none_or(|(b, _)| r.best_infidelity < b.best_infidelity) {
            best = Some((r, kind));
        }
    }
    let (refinement, ansatz) = best.expect("at least two ansätze");
    Ok(GradRun { best: Scored::new(&model, refinement.best.clone())?, refinement, ansatz })
}

#[derive(Clone, Debug)]
pub struct RlRun {
    pub training: GateTraining,
    pub best: Scored,
}

pub fn run_rl(p: &CircuitParams, shape: ScheduleShape, sac: &SacConfig, seed: u64) -> Result<RlRun> {
    let training = train_gate(p, sac, shape, seed)?;
    let best = Scored::new(&GateModel::new(p)?, training.best.clone())?;
    Ok(RlRun { training, best })
}

#[derive(Clone, Debug)]
pub struct HybridRun {
    pub best: Scored,
    pub refinement: Refinement,
}

/// Refine the RL schedule. The refined schedule is kept only if it scores at
/// least as well as its seed under the same evaluator, so the result never
/// falls behind the RL stage.
pub fn refine_rl(p: &CircuitParams, rl: &RlRun, opt: &OptimizerConfig) -> Result<HybridRun> {
    let model = GateModel::new(p)?;
    let refinement = refine(&model, &rl.best.schedule, opt)?;
    let refined = Scored::new(&model, refinement.best.clone())?;
    let best = if refined.infidelity() <= rl.best.infidelity() { refined } else { rl.best.clone() };
    Ok(HybridRun { best, refinement })
}

#[derive(Clone, Debug)]
pub struct Optimization {
    pub method: Method,
    pub best: Scored,
    pub rl: Option<RlRun>,
    pub refinement: Option<Refinement>,
}

pub fn optimize(
    p: &CircuitParams,
    shape: ScheduleShape,
    method: Method,
    sac: &SacConfig,
    opt: &OptimizerConfig,
    seed: u64,
) -> Result<Optimization> {
    match method {
        Method::Grad => {
            let g = run_grad(p, shape, opt, seed)?;
            Ok(Optimization { method, best: g.best, rl: None, refinement: Some(g.refinement) })
        }
        Method::Rl => {
            let r = run_rl(p, shape, sac, seed)?;
            Ok(Optimization { method, best: r.best.clone(), rl: Some(r), refinement: None })
        }
        Method::RlGrad => {
            let r = run_rl(p, shape, sac, seed)?;
            let h = refine_rl(p, &r, opt)?;
            Ok(Optimization { method, best: h.best, rl: Some(r), refinement: Some(h.refinement) })
        }
    }
}
