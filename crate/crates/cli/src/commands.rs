use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use czgate_core::circuit::{xx_coupling_sw, zz_coupling};
use czgate_core::{GateModel, PulseSchedule, ScheduleShape, SmoothedPulse};
use rayon::prelude::*;

use crate::config::{cell_seed, Method, RunConfig};
use crate::output::{csv_bytes, num, versions, write_atomic, OutputDir, RunManifest, MANIFEST};
use crate::runner::{optimize, refine_rl, run_grad, run_rl};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Diagnose,
    Optimize,
    SweepGateTime,
    Robustness,
    Smoothing,
    StepStudy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Diagnose => "diagnose",
            Command::Optimize => "optimize",
            Command::SweepGateTime => "sweep-gate-time",
            Command::Robustness => "robustness",
            Command::Smoothing => "smoothing",
            Command::StepStudy => "step-study",
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Summary {
    fidelity: Option<f64>,
    leakage: Option<f64>,
}

const OK: &str = "ok";

fn status_of(e: &impl std::fmt::Display) -> String {
    format!("error: {e}")
}

/// Runs a command, writes its outputs and a manifest into `cfg.out_dir`, and
/// returns the manifest. Failures are reported through the manifest status.
pub fn execute(command: Command, cfg: &RunConfig) -> RunManifest {
    let start = Instant::now();
    let mut out = None;
    let result = OutputDir::new(&cfg.out_dir).and_then(|dir| {
        let dir = out.insert(dir);
        cfg.validate()?;
        match command {
            Command::Diagnose => diagnose(cfg, dir),
            Command::Optimize => optimize_cmd(cfg, dir),
            Command::SweepGateTime => sweep_gate_time(cfg, dir),
            Command::Robustness => robustness(cfg, dir),
            Command::Smoothing => smoothing(cfg, dir),
            Command::StepStudy => step_study(cfg, dir),
        }
    });
    let (status, error, summary) = match result {
        Ok(s) => (OK.to_string(), None, s),
        Err(e) => ("failed".to_string(), Some(format!("{e:#}")), Summary::default()),
    };
    let manifest = RunManifest {
        command: command.name().to_string(),
        status,
        error,
        seed: cfg.seed,
        config: cfg.clone(),
        versions: versions(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        final_fidelity: summary.fidelity,
        final_leakage: summary.leakage,
        files: out.map(|o| o.files().to_vec()).unwrap_or_default(),
    };
    match serde_json::to_vec_pretty(&manifest) {
        Ok(bytes) => {
            if let Err(e) = write_atomic(&cfg.out_dir.join(MANIFEST), &bytes) {
                log::error!("could not write manifest: {e:#}");
            }
        }
        Err(e) => log::error!("could not serialize manifest: {e}"),
    }
    manifest
}

fn pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers).build()?)
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn diagnose(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Summary> {
    let d = &cfg.diagnose;
    let mut rows = Vec::with_capacity(d.points);
    for wc in grid(d.wc_min_ghz, d.wc_max_ghz, d.points) {
        let mut p = cfg.circuit;
        p.coupler.freq = wc;
        let row = match (xx_coupling_sw(&p), zz_coupling(&p)) {
            (Ok(xx), Ok(zz)) => vec![num(wc), num(zz), num(xx), OK.to_string()],
            (Err(e), _) | (_, Err(e)) => {
                log::warn!("skipping wc = {wc}: {e}");
                vec![num(wc), String::new(), String::new(), format!("skipped: {e}")]
            }
        };
        rows.push(row);
    }
    out.write("diagnose.csv", &csv_bytes(&["wc_ghz", "zz_khz", "xx_sw_mhz", "status"], &rows)?)?;
    Ok(Summary::default())
}

fn optimize_cmd(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Summary> {
    let shape = cfg.schedule.shape()?;
    let res = optimize(&cfg.circuit, shape, cfg.method, &cfg.sac, &cfg.optimizer, cfg.seed)?;
    out.write("pulse.json", res.best.schedule.to_json()?.as_bytes())?;
    out.write("populations.csv", res.best.evaluation.populations_csv().as_bytes())?;
    if let Some(rl) = &res.rl {
        out.write("learning_curve.csv", rl.training.outcome.curve_csv().as_bytes())?;
        out.write("rl_pulse.json", rl.best.schedule.to_json()?.as_bytes())?;
    }
    if let Some(r) = &res.refinement {
        out.write("refine_trace.csv", r.trace_csv().as_bytes())?;
    }
    let e = &res.best.evaluation;
    let mut summary = BTreeMap::from([
        ("fidelity", e.fidelity),
        ("process_fidelity", e.process_fidelity),
        ("leakage", e.leakage),
        ("beta1", e.beta1),
        ("beta2", e.beta2),
    ]);
    if let Some(rl) = &res.rl {
        summary.insert("rl_stage_fidelity", rl.best.evaluation.fidelity);
    }
    out.write("result.json", &serde_json::to_vec_pretty(&summary)?)?;
    log::info!("{} at {} ns: F = {:.6}", cfg.method, shape.gate_time, e.fidelity);
    Ok(Summary { fidelity: Some(e.fidelity), leakage: Some(e.leakage) })
}

/// Infidelity and leakage for every requested method in one sweep cell. The
/// rl and rl+grad entries share a single RL stage.
fn run_cell(
    cfg: &RunConfig,
    shape: ScheduleShape,
    methods: &[Method],
    seed: u64,
) -> BTreeMap<Method, Result<(f64, f64), String>> {
    let p = &cfg.circuit;
    let mut res = BTreeMap::new();
    let score = |s: &crate::runner::Scored| (s.infidelity(), s.evaluation.leakage);
    if methods.contains(&Method::Grad) {
        let r = run_grad(p, shape, &cfg.optimizer, seed).map(|g| score(&g.best)).map_err(|e| status_of(&e));
        res.insert(Method::Grad, r);
    }
    if methods.contains(&Method::Rl) || methods.contains(&Method::RlGrad) {
        match run_rl(p, shape, &cfg.sac, seed) {
            Ok(rl) => {
                res.insert(Method::Rl, Ok(score(&rl.best)));
                let h = refine_rl(p, &rl, &cfg.optimizer).map(|h| score(&h.best)).map_err(|e| status_of(&e));
                res.insert(Method::RlGrad, h);
            }
            Err(e) => {
                res.insert(Method::Rl, Err(status_of(&e)));
                res.insert(Method::RlGrad, Err(status_of(&e)));
            }
        }
    }
    res
}

fn sweep_gate_time(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Summary> {
    let sw = &cfg.sweep;
    if let Some(t) = sw.gate_times_ns.iter().find(|t| !(5.0..=50.0).contains(*t)) {
        bail!("gate time {t} ns outside [5, 50] ns");
    }
    if sw.methods.is_empty() {
        bail!("no methods selected");
    }
    let cells: Vec<(f64, usize)> =
        sw.gate_times_ns.iter().flat_map(|&t| (0..cfg.seeds).map(move |r| (t, r))).collect();
    let step = cfg.schedule.step_ns;
    let results: Vec<_> = pool(cfg.workers)?.install(|| {
        cells
            .par_iter()
            .map(|&(t, r)| {
                let seed = cell_seed(cfg.seed, &[t.to_bits(), step.to_bits(), r as u64]);
                let res = match ScheduleShape::new(t, step, cfg.schedule.bounds_ghz) {
                    Ok(shape) => run_cell(cfg, shape, &sw.methods, seed),
                    Err(e) => sw.methods.iter().map(|&m| (m, Err(status_of(&e)))).collect(),
                };
                log::info!("gate time {t} ns, replicate {r} done");
                (t, seed, res)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for &t in &sw.gate_times_ns {
        for &m in &sw.methods {
            for (_, seed, res) in results.iter().filter(|(ct, _, _)| *ct == t) {
                let row = match &res[&m] {
                    Ok((inf, leak)) => vec![num(*inf), num(*leak), OK.to_string()],
                    Err(s) => vec![String::new(), String::new(), s.clone()],
                };
                rows.push([vec![num(t), m.to_string(), seed.to_string()], row].concat());
            }
        }
    }
    let header = ["gate_time_ns", "method", "seed", "infidelity", "leakage", "status"];
    out.write("sweep_gate_time.csv", &csv_bytes(&header, &rows)?)?;
    Ok(Summary::default())
}

fn require_pulse(path: &Option<PathBuf>, what: &str) -> anyhow::Result<PulseSchedule> {
    let path: &Path = path.as_deref().with_context(|| format!("{what} needs a pulse file"))?;
    PulseSchedule::load(path).with_context(|| format!("loading pulse {}", path.display()))
}

fn robustness(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Summary> {
    let rc = &cfg.robustness;
    let pulse = require_pulse(&rc.pulse, "robustness")?;
    let nominal = cfg.circuit;
    let gate_w1 = nominal.resonant_gate_w1();
    let center = rc.vary.get(&nominal);
    let lo = rc.min_ghz.unwrap_or(center - rc.half_span_ghz);
    let hi = rc.max_ghz.unwrap_or(center + rc.half_span_ghz);
    let reference = GateModel::with_gate_w1(&nominal, gate_w1)?.propagate(&pulse)?;
    let rows: Vec<Vec<String>> = grid(lo, hi, rc.points)
        .into_iter()
        .map(|value| {
            let mut p = nominal;
            rc.vary.set(&mut p, value);
            let eval = GateModel::with_gate_w1(&p, gate_w1).and_then(|m| m.propagate(&pulse));
            match eval {
                Ok(e) => vec![rc.vary.name().to_string(), num(value), num(e.fidelity), OK.to_string()],
                Err(e) => vec![rc.vary.name().to_string(), num(value), String::new(), status_of(&e)],
            }
        })
        .collect();
    out.write("robustness.csv", &csv_bytes(&["vary", "value_ghz", "fidelity", "status"], &rows)?)?;
    Ok(Summary { fidelity: Some(reference.fidelity), leakage: Some(reference.leakage) })
}

fn smoothing(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Summary> {
    let sc = &cfg.smoothing;
    let pulse = require_pulse(&sc.pulse, "smoothing")?;
    if let Some(w) = sc.widths_ns.iter().find(|w| !(**w > 0.0)) {
        bail!("logistic widths must be positive, got {w}");
    }
    let model = GateModel::new(&cfg.circuit)?;
    let reference = model.propagate(&pulse)?;
    let mut widths = sc.widths_ns.clone();
    widths.sort_by(f64::total_cmp);
    let sub_step = sc.sub_step_ns.min(pulse.step_len() / 10.0);
    let idle = cfg.circuit.coupler.freq;
    let rows: Vec<Vec<String>> = pool(cfg.workers)?.install(|| {
        widths
            .par_iter()
            .map(|&w| {
                let eval = SmoothedPulse::new(pulse.clone(), w, sub_step, idle).and_then(|sp| model.propagate_smoothed(&sp));
                match eval {
                    Ok(e) => vec![num(w), num(e.fidelity), OK.to_string()],
                    Err(e) => vec![num(w), String::new(), status_of(&e)],
                }
            })
            .collect()
    });
    out.write("smoothing.csv", &csv_bytes(&["w_ns", "fidelity", "status"], &rows)?)?;
    Ok(Summary { fidelity: Some(reference.fidelity), leakage: Some(reference.leakage) })
}

fn step_study(cfg: &RunConfig, out: &mut OutputDir) -> anyhow::Result<Summary> {
    let tau = cfg.schedule.gate_time_ns;
    let shapes: Vec<ScheduleShape> = cfg
        .step_study
        .steps_ns
        .iter()
        .map(|&s| ScheduleShape::new(tau, s, cfg.schedule.bounds_ghz))
        .collect::<Result<_, _>>()
        .context("every step length must divide the gate time")?;
    let cells: Vec<(ScheduleShape, usize)> =
        shapes.iter().flat_map(|&s| (0..cfg.seeds).map(move |r| (s, r))).collect();
    let rows: Vec<Vec<String>> = pool(cfg.workers)?.install(|| {
        cells
            .par_iter()
            .map(|&(shape, r)| {
                let seed = cell_seed(cfg.seed, &[tau.to_bits(), shape.step_len.to_bits(), r as u64]);
                let res = optimize(&cfg.circuit, shape, Method::RlGrad, &cfg.sac, &cfg.optimizer, seed);
                log::info!("step {} ns, replicate {r} done", shape.step_len);
                let head = vec![num(shape.step_len), seed.to_string()];
                match res {
                    Ok(o) => [head, vec![num(o.best.infidelity()), OK.to_string()]].concat(),
                    Err(e) => [head, vec![String::new(), status_of(&e)]].concat(),
                }
            })
            .collect()
    });
    out.write("step_study.csv", &csv_bytes(&["step_ns", "seed", "infidelity", "status"], &rows)?)?;
    Ok(Summary::default())
}
