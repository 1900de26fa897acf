use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use czgate_cli::{execute, Command, Method, Overrides, RunConfig, Vary};

#[derive(Parser, Debug)]
#[command(name = "czgate", version, about = "Design fast CZ pulses for tunable-coupler transmons")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// grad, rl or rl+grad.
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Transmon truncation (levels per mode).
    #[arg(long, global = true)]
    levels: Option<usize>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Static ZZ and XX couplings versus idle coupler frequency.
    Diagnose {
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        wc_min: Option<f64>,
        #[arg(long)]
        wc_max: Option<f64>,
    },
    /// Optimize one pulse.
    Optimize {
        #[arg(long)]
        gate_time: Option<f64>,
    },
    /// Infidelity versus gate time for each method and seed.
    SweepGateTime {
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
    },
    /// Re-evaluate a fixed pulse while one idle frequency is varied.
    Robustness {
        #[arg(long)]
        pulse: Option<PathBuf>,
        #[arg(long)]
        vary: Option<Vary>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Fidelity of a pulse with logistic edges of several widths.
    Smoothing {
        #[arg(long)]
        pulse: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<f64>>,
    },
    /// rl+grad infidelity versus control step length.
    StepStudy {
        #[arg(long, value_delimiter = ',')]
        steps: Option<Vec<f64>>,
    },
}

fn build(cli: Cli) -> anyhow::Result<(Command, RunConfig)> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Overrides { seed: cli.seed, out_dir: cli.out, method: cli.method, levels: cli.levels, workers: cli.workers }
        .apply(&mut cfg);
    let command = match cli.command {
        Cmd::Diagnose { points, wc_min, wc_max } => {
            let d = &mut cfg.diagnose;
            d.points = points.unwrap_or(d.points);
            d.wc_min_ghz = wc_min.unwrap_or(d.wc_min_ghz);
            d.wc_max_ghz = wc_max.unwrap_or(d.wc_max_ghz);
            Command::Diagnose
        }
        Cmd::Optimize { gate_time } => {
            if let Some(t) = gate_time {
                cfg.schedule.gate_time_ns = t;
            }
            Command::Optimize
        }
        Cmd::SweepGateTime { times, methods } => {
            if let Some(t) = times {
                cfg.sweep.gate_times_ns = t;
            }
            if let Some(m) = methods {
                cfg.sweep.methods = m;
            }
            Command::SweepGateTime
        }
        Cmd::Robustness { pulse, vary, points } => {
            let r = &mut cfg.robustness;
            r.pulse = pulse.or(r.pulse.take());
            r.vary = vary.unwrap_or(r.vary);
            r.points = points.unwrap_or(r.points);
            Command::Robustness
        }
        Cmd::Smoothing { pulse, widths } => {
            let s = &mut cfg.smoothing;
            s.pulse = pulse.or(s.pulse.take());
            if let Some(w) = widths {
                s.widths_ns = w;
            }
            Command::Smoothing
        }
        Cmd::StepStudy { steps } => {
            if let Some(s) = steps {
                cfg.step_study.steps_ns = s;
            }
            Command::StepStudy
        }
    };
    Ok((command, cfg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (command, cfg) = match build(Cli::parse()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let manifest = execute(command, &cfg);
    if manifest.succeeded() {
        println!("{}", cfg.out_dir.join("manifest.json").display());
        ExitCode::SUCCESS
    } else {
        eprintln!("error: {}", manifest.error.as_deref().unwrap_or("unknown failure"));
        ExitCode::FAILURE
    }
}
